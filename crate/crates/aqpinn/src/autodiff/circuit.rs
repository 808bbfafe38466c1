//! Jet-valued statevector evaluation of ansatz circuits.
//!
//! The embedding angles are jets in (x, y, t), so amplitudes are jets too and
//! every expectation value comes out with its full input-derivative set. The
//! RY/CNOT gate family keeps amplitudes real, which this evaluator relies on;
//! layouts containing RZ gates are rejected.
//!
//! Two interchangeable routes produce the angle partials needed by the tape:
//!
//! * `ParameterShift` re-evaluates at angle +/- pi/2; exact for RY because
//!   every expectation is sinusoidal in each single angle.
//! * `Direct` differentiates through the simulator itself with one reverse
//!   sweep per observable (d RY(a)/da = 1/2 RY(a + pi)).
//!
//! Both are exact; they are cross-checked to 1e-10 in the test suite.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::ansatz::{AngleSource, CircuitLayout, GateSlot};
use crate::error::{Error, Result};

use super::jet::Jet;

/// How angle partials for the tape are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMethod {
    ParameterShift,
    Direct,
}

/// Expectations and their partials toward every angle of the circuit.
///
/// Jets of `d_theta[m]` / `d_feat[i]` are the input-derivative expansions of
/// dE/d(theta_m) and dE/d(feature_i); indexing is `[angle][observable]`.
pub struct CircuitJets {
    pub base: Vec<Jet>,
    pub d_theta: Vec<Vec<Jet>>,
    pub d_feat: Vec<Vec<Jet>>,
}

/// Flattened gate: every rotation is RY with either a feature jet or a bound
/// parameter as its angle.
#[derive(Clone, Copy)]
enum FlatGate {
    RyFeature { qubit: usize, feature: usize },
    RyParam { qubit: usize, param: usize },
    RyFixed { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

fn flatten_gates(layout: &CircuitLayout) -> Result<Vec<FlatGate>> {
    let mut gates = Vec::with_capacity(layout.n_qubits + layout.gates.len());
    for q in 0..layout.n_qubits {
        gates.push(FlatGate::RyFeature { qubit: q, feature: q });
    }
    for slot in &layout.gates {
        gates.push(match *slot {
            GateSlot::Ry { qubit, angle } => match angle {
                AngleSource::Param(p) => FlatGate::RyParam { qubit, param: p },
                AngleSource::Fixed(a) => FlatGate::RyFixed { qubit, angle: a },
            },
            GateSlot::Rz { .. } => {
                return Err(Error::usage(
                    "RZ gates are not supported by the differentiable circuit evaluator"
                        .to_string(),
                ))
            }
            GateSlot::Cnot { control, target } => FlatGate::Cnot { control, target },
        });
    }
    Ok(gates)
}

struct JetState {
    n_qubits: usize,
    amps: Vec<Jet>,
}

impl JetState {
    fn zero_ket(n_qubits: usize) -> JetState {
        let mut amps = vec![Jet::ZERO; 1 << n_qubits];
        amps[0] = Jet::constant(1.0);
        JetState { n_qubits, amps }
    }

    /// RY with a constant angle: real rotation with scalar coefficients.
    fn ry_const(&mut self, qubit: usize, angle: f64) {
        let (s, c) = (angle / 2.0).sin_cos();
        self.rotate_pairs(qubit, |a0, a1| {
            let mut n0 = a0.scale(c);
            n0.add_scaled(&a1, -s);
            let mut n1 = a0.scale(s);
            n1.add_scaled(&a1, c);
            (n0, n1)
        });
    }

    /// RY whose angle is itself a jet (the embedding gates).
    fn ry_jet(&mut self, qubit: usize, half_cos: &Jet, half_sin: &Jet) {
        self.rotate_pairs(qubit, |a0, a1| {
            let n0 = half_cos.mul(&a0).sub(&half_sin.mul(&a1));
            let n1 = half_sin.mul(&a0).add(&half_cos.mul(&a1));
            (n0, n1)
        });
    }

    fn cnot(&mut self, control: usize, target: usize) {
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for idx in 0..self.amps.len() {
            if idx & cbit != 0 && idx & tbit == 0 {
                self.amps.swap(idx, idx | tbit);
            }
        }
    }

    fn rotate_pairs<F: FnMut(Jet, Jet) -> (Jet, Jet)>(&mut self, qubit: usize, mut f: F) {
        let bit = 1usize << qubit;
        let n = self.amps.len();
        let mut base = 0;
        while base < n {
            for low in base..base + bit {
                let (n0, n1) = f(self.amps[low], self.amps[low | bit]);
                self.amps[low] = n0;
                self.amps[low | bit] = n1;
            }
            base += bit << 1;
        }
    }

    fn expect_z(&self, qubit: usize) -> Jet {
        let bit = 1usize << qubit;
        let mut acc = Jet::ZERO;
        for (idx, amp) in self.amps.iter().enumerate() {
            let sq = amp.square();
            if idx & bit == 0 {
                acc = acc.add(&sq);
            } else {
                acc = acc.sub(&sq);
            }
        }
        acc
    }

    /// Z observable applied as a sign flip; used to seed the reverse sweep.
    fn apply_z(&self, qubit: usize) -> JetState {
        let bit = 1usize << qubit;
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(idx, a)| if idx & bit == 0 { *a } else { a.neg() })
            .collect();
        JetState {
            n_qubits: self.n_qubits,
            amps,
        }
    }
}

struct AngleJets {
    /// Per rotation gate: (cos(angle/2), sin(angle/2)) as jets.
    half: Vec<Option<(Jet, Jet)>>,
}

fn angle_jets(gates: &[FlatGate], features: &[Jet], theta: &[f64]) -> AngleJets {
    let half = gates
        .iter()
        .map(|gate| match *gate {
            FlatGate::RyFeature { feature, .. } => {
                let h = features[feature].scale(0.5);
                Some((h.cos(), h.sin()))
            }
            FlatGate::RyParam { param, .. } => {
                let (s, c) = (theta[param] / 2.0).sin_cos();
                Some((Jet::constant(c), Jet::constant(s)))
            }
            FlatGate::RyFixed { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                Some((Jet::constant(c), Jet::constant(s)))
            }
            FlatGate::Cnot { .. } => None,
        })
        .collect();
    AngleJets { half }
}

fn run_forward(gates: &[FlatGate], angles: &AngleJets, n_qubits: usize) -> JetState {
    let mut state = JetState::zero_ket(n_qubits);
    for (gate, half) in gates.iter().zip(angles.half.iter()) {
        apply(&mut state, gate, half);
    }
    state
}

fn apply(state: &mut JetState, gate: &FlatGate, half: &Option<(Jet, Jet)>) {
    match *gate {
        FlatGate::RyFeature { qubit, .. } => {
            let (c, s) = half.as_ref().expect("rotation angle");
            state.ry_jet(qubit, c, s);
        }
        FlatGate::RyParam { qubit, .. } | FlatGate::RyFixed { qubit, .. } => {
            let (c, s) = half.as_ref().expect("rotation angle");
            // parameter angles are derivative-free, so scalar coefficients suffice
            if c.c[1..].iter().all(|&v| v == 0.0) && s.c[1..].iter().all(|&v| v == 0.0) {
                state.rotate_pairs(qubit, |a0, a1| {
                    let (cv, sv) = (c.value(), s.value());
                    let mut n0 = a0.scale(cv);
                    n0.add_scaled(&a1, -sv);
                    let mut n1 = a0.scale(sv);
                    n1.add_scaled(&a1, cv);
                    (n0, n1)
                });
            } else {
                state.ry_jet(qubit, c, s);
            }
        }
        FlatGate::Cnot { control, target } => state.cnot(control, target),
    }
}

fn expectations(state: &JetState, observables: &[usize]) -> Vec<Jet> {
    observables.iter().map(|&q| state.expect_z(q)).collect()
}

/// Evaluates expectations of `observables` (Z on the given qubits) together
/// with partials toward every circuit angle.
pub fn eval_circuit_jets(
    features: &[Jet],
    layout: &CircuitLayout,
    theta: &[f64],
    observables: &[usize],
    method: GradMethod,
) -> Result<CircuitJets> {
    if features.len() != layout.n_qubits {
        return Err(Error::usage(format!(
            "circuit expects {} features, got {}",
            layout.n_qubits,
            features.len()
        )));
    }
    if theta.len() != layout.param_count {
        return Err(Error::usage(format!(
            "circuit expects {} parameters, got {}",
            layout.param_count,
            theta.len()
        )));
    }
    if let Some(&q) = observables.iter().find(|&&q| q >= layout.n_qubits) {
        return Err(Error::usage(format!(
            "observable qubit {q} out of range for {} qubits",
            layout.n_qubits
        )));
    }
    let gates = flatten_gates(layout)?;
    match method {
        GradMethod::ParameterShift => {
            eval_by_shift(&gates, features, layout, theta, observables)
        }
        GradMethod::Direct => eval_by_sweep(&gates, features, layout, theta, observables),
    }
}

/// Forward evaluation only: expectations with input derivatives, no partials.
pub fn eval_circuit_values(
    features: &[Jet],
    layout: &CircuitLayout,
    theta: &[f64],
    observables: &[usize],
) -> Result<Vec<Jet>> {
    if features.len() != layout.n_qubits || theta.len() != layout.param_count {
        return Err(Error::usage("circuit shape mismatch".to_string()));
    }
    let gates = flatten_gates(layout)?;
    let angles = angle_jets(&gates, features, theta);
    let state = run_forward(&gates, &angles, layout.n_qubits);
    Ok(expectations(&state, observables))
}

fn eval_by_shift(
    gates: &[FlatGate],
    features: &[Jet],
    layout: &CircuitLayout,
    theta: &[f64],
    observables: &[usize],
) -> Result<CircuitJets> {
    let n = layout.n_qubits;
    let angles = angle_jets(gates, features, theta);
    let base = expectations(&run_forward(gates, &angles, n), observables);

    let mut d_theta = Vec::with_capacity(theta.len());
    for m in 0..theta.len() {
        let mut shifted = theta.to_vec();
        shifted[m] = theta[m] + FRAC_PI_2;
        let plus = expectations(
            &run_forward(gates, &angle_jets(gates, features, &shifted), n),
            observables,
        );
        shifted[m] = theta[m] - FRAC_PI_2;
        let minus = expectations(
            &run_forward(gates, &angle_jets(gates, features, &shifted), n),
            observables,
        );
        d_theta.push(shift_halves(&plus, &minus));
    }

    let mut d_feat = Vec::with_capacity(features.len());
    for i in 0..features.len() {
        let mut shifted = features.to_vec();
        shifted[i].c[0] = features[i].c[0] + FRAC_PI_2;
        let plus = expectations(
            &run_forward(gates, &angle_jets(gates, &shifted, theta), n),
            observables,
        );
        shifted[i].c[0] = features[i].c[0] - FRAC_PI_2;
        let minus = expectations(
            &run_forward(gates, &angle_jets(gates, &shifted, theta), n),
            observables,
        );
        d_feat.push(shift_halves(&plus, &minus));
    }

    Ok(CircuitJets {
        base,
        d_theta,
        d_feat,
    })
}

fn shift_halves(plus: &[Jet], minus: &[Jet]) -> Vec<Jet> {
    plus.iter()
        .zip(minus.iter())
        .map(|(p, m)| p.sub(m).scale(0.5))
        .collect()
}

/// Reverse sweep: dE/d(angle_k) = 2 <phi_k, dG_k psi_{k-1}> with
/// phi_k = G_{k+1}^T ... G_L^T Z psi_L, everything jet-valued.
fn eval_by_sweep(
    gates: &[FlatGate],
    features: &[Jet],
    layout: &CircuitLayout,
    theta: &[f64],
    observables: &[usize],
) -> Result<CircuitJets> {
    let n = layout.n_qubits;
    let angles = angle_jets(gates, features, theta);

    // Forward pass caching the state before each gate.
    let mut prefixes = Vec::with_capacity(gates.len());
    let mut state = JetState::zero_ket(n);
    for (gate, half) in gates.iter().zip(angles.half.iter()) {
        prefixes.push(state.amps.clone());
        apply(&mut state, gate, half);
    }
    let base = expectations(&state, observables);

    let mut d_theta = vec![vec![Jet::ZERO; observables.len()]; theta.len()];
    let mut d_feat = vec![vec![Jet::ZERO; observables.len()]; features.len()];

    for (o, &obs_qubit) in observables.iter().enumerate() {
        let mut bra = state.apply_z(obs_qubit);
        for (k, gate) in gates.iter().enumerate().rev() {
            let half = &angles.half[k];
            match *gate {
                FlatGate::RyFeature { qubit, feature } => {
                    let d =
                        ry_derivative_overlap(&bra.amps, &prefixes[k], qubit, half.as_ref().unwrap());
                    d_feat[feature][o] = d;
                    undo_ry(&mut bra, qubit, half.as_ref().unwrap());
                }
                FlatGate::RyParam { qubit, param } => {
                    let d =
                        ry_derivative_overlap(&bra.amps, &prefixes[k], qubit, half.as_ref().unwrap());
                    d_theta[param][o] = d;
                    undo_ry(&mut bra, qubit, half.as_ref().unwrap());
                }
                FlatGate::RyFixed { qubit, .. } => {
                    undo_ry(&mut bra, qubit, half.as_ref().unwrap());
                }
                FlatGate::Cnot { control, target } => bra.cnot(control, target),
            }
        }
    }

    Ok(CircuitJets {
        base,
        d_theta,
        d_feat,
    })
}

/// 2 <bra, dRY/da psi>, with dRY(a)/da = 1/2 [[-sin, -cos], [cos, -sin]]
/// in the half-angle. Restricted to the rotated pairs.
fn ry_derivative_overlap(bra: &[Jet], pre: &[Jet], qubit: usize, half: &(Jet, Jet)) -> Jet {
    let (c, s) = half;
    let bit = 1usize << qubit;
    let mut acc = Jet::ZERO;
    let mut base = 0;
    while base < pre.len() {
        for low in base..base + bit {
            let a0 = &pre[low];
            let a1 = &pre[low | bit];
            // d(new0)/da = (-s a0 - c a1)/2, d(new1)/da = (c a0 - s a1)/2
            let d0 = s.mul(a0).add(&c.mul(a1)).scale(-0.5);
            let d1 = c.mul(a0).sub(&s.mul(a1)).scale(0.5);
            acc = acc.add(&bra[low].mul(&d0));
            acc = acc.add(&bra[low | bit].mul(&d1));
        }
        base += bit << 1;
    }
    acc.scale(2.0)
}

/// Applies RY(-a), i.e. the transpose, to unwind the bra.
fn undo_ry(state: &mut JetState, qubit: usize, half: &(Jet, Jet)) {
    let (c, s) = half;
    let constant = c.c[1..].iter().all(|&v| v == 0.0) && s.c[1..].iter().all(|&v| v == 0.0);
    if constant {
        let (cv, sv) = (c.value(), s.value());
        state.rotate_pairs(qubit, |a0, a1| {
            let mut n0 = a0.scale(cv);
            n0.add_scaled(&a1, sv);
            let mut n1 = a0.scale(-sv);
            n1.add_scaled(&a1, cv);
            (n0, n1)
        });
    } else {
        state.rotate_pairs(qubit, |a0, a1| {
            let n0 = c.mul(&a0).add(&s.mul(&a1));
            let n1 = c.mul(&a1).sub(&s.mul(&a0));
            (n0, n1)
        });
    }
}

/// Plain-valued parameter-shift gradient of Z expectations; the reference
/// implementation used by tests and the gradient checker.
pub fn parameter_shift_grad(
    features: &[f64],
    layout: &CircuitLayout,
    theta: &[f64],
    observables: &[crate::qsim::ObservableZ],
) -> Result<Vec<Vec<f64>>> {
    let mut grads = Vec::with_capacity(theta.len());
    for m in 0..theta.len() {
        let mut shifted = theta.to_vec();
        shifted[m] = theta[m] + FRAC_PI_2;
        let plus = crate::qsim::run_circuit(features, layout, &shifted, observables)?;
        shifted[m] = theta[m] - FRAC_PI_2;
        let minus = crate::qsim::run_circuit(features, layout, &shifted, observables)?;
        grads.push(
            plus.iter()
                .zip(minus.iter())
                .map(|(p, q)| (p - q) / 2.0)
                .collect(),
        );
    }
    Ok(grads)
}

/// Direct simulator differentiation at plain-value level: replaces gate m by
/// its angle derivative (1/2 RY(angle + pi)) and overlaps with Z psi.
pub fn direct_grad(
    features: &[f64],
    layout: &CircuitLayout,
    theta: &[f64],
    observables: &[crate::qsim::ObservableZ],
) -> Result<Vec<Vec<f64>>> {
    let jets: Vec<Jet> = features.iter().map(|&f| Jet::constant(f)).collect();
    let obs: Vec<usize> = observables.iter().map(|o| o.qubit_index).collect();
    let out = eval_circuit_jets(&jets, layout, theta, &obs, GradMethod::Direct)?;
    Ok(out
        .d_theta
        .iter()
        .map(|per_obs| per_obs.iter().map(|j| j.value()).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::build_qmps;
    use crate::autodiff::jet::{DX, DXX, VAL};
    use crate::qsim::ObservableZ;

    #[test]
    fn bare_embedding_is_cosine() {
        let layout = crate::ansatz::CircuitLayout::custom(1, vec![], 0);
        let a = 0.7;
        let feat = [Jet::input(a, 0)];
        let out = eval_circuit_values(&feat, &layout, &[], &[0]).unwrap();
        assert!((out[0].c[VAL] - a.cos()).abs() < 1e-14);
        assert!((out[0].c[DX] - (-a.sin())).abs() < 1e-14);
        assert!((out[0].c[DXX] - (-a.cos())).abs() < 1e-14);
    }

    #[test]
    fn shift_and_direct_agree_on_qmps() {
        let layout = build_qmps(4, 1).unwrap();
        let mut seed = 99u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((seed >> 33) as f64) / (u32::MAX as f64) * 2.0 - 1.0
        };
        for _ in 0..5 {
            let feats: Vec<Jet> = (0..4)
                .map(|d| {
                    let mut j = Jet::input(next(), d.min(2));
                    j.c[DXX] = next();
                    j
                })
                .collect();
            let theta: Vec<f64> = (0..layout.param_count).map(|_| next()).collect();
            let obs = [0usize, 1, 2, 3];
            let a = eval_circuit_jets(&feats, &layout, &theta, &obs, GradMethod::ParameterShift)
                .unwrap();
            let b = eval_circuit_jets(&feats, &layout, &theta, &obs, GradMethod::Direct).unwrap();
            for (x, y) in a.base.iter().zip(b.base.iter()) {
                for k in 0..crate::autodiff::jet::N_COMPS {
                    assert!((x.c[k] - y.c[k]).abs() < 1e-12);
                }
            }
            for (dx, dy) in a.d_theta.iter().zip(b.d_theta.iter()) {
                for (x, y) in dx.iter().zip(dy.iter()) {
                    for k in 0..crate::autodiff::jet::N_COMPS {
                        assert!((x.c[k] - y.c[k]).abs() < 1e-10);
                    }
                }
            }
            for (dx, dy) in a.d_feat.iter().zip(b.d_feat.iter()) {
                for (x, y) in dx.iter().zip(dy.iter()) {
                    for k in 0..crate::autodiff::jet::N_COMPS {
                        assert!((x.c[k] - y.c[k]).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn value_gradients_match_run_circuit_shift() {
        let layout = build_qmps(4, 1).unwrap();
        let feats = [0.3, -0.2, 0.9, 0.1];
        let theta = [0.4, -0.5, 0.2, 0.8, -0.3, 0.6];
        let obs = [ObservableZ::new(0), ObservableZ::new(2)];
        let shift = parameter_shift_grad(&feats, &layout, &theta, &obs).unwrap();
        let direct = direct_grad(
            &feats,
            &layout,
            &theta,
            &obs,
        )
        .unwrap();
        for (a, b) in shift.iter().zip(direct.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn rz_layout_rejected() {
        let layout = crate::ansatz::CircuitLayout::custom(
            1,
            vec![crate::ansatz::GateSlot::Rz {
                qubit: 0,
                angle: crate::ansatz::AngleSource::Fixed(0.3),
            }],
            0,
        );
        let feat = [Jet::constant(0.0)];
        assert!(eval_circuit_values(&feat, &layout, &[], &[0]).is_err());
    }
}
