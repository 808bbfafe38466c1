//! Exact statevector simulation of small qubit registers.
//!
//! Qubit 0 is the least-significant bit of the basis index, so basis state
//! `|b_{n-1} ... b_1 b_0>` lives at amplitude index `sum b_q * 2^q`. Gates are
//! applied in place over the amplitude array via stride iteration.

use num_complex::Complex64;

use crate::ansatz::{AngleSource, CircuitLayout, GateSlot};
use crate::error::{Error, Result};

/// Hard cap on register size; keeps the statevector at <= 4096 amplitudes.
pub const MAX_QUBITS: usize = 12;

/// Full complex amplitude vector of a small qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

/// A primitive gate: RY/RZ rotations and CNOT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

/// Pauli-Z measurement on a single qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservableZ {
    pub qubit_index: usize,
}

impl ObservableZ {
    pub fn new(qubit_index: usize) -> Self {
        ObservableZ { qubit_index }
    }
}

/// Creates `|0...0>` on `n_qubits` qubits.
pub fn init_state(n_qubits: usize) -> Result<Statevector> {
    if n_qubits < 1 || n_qubits > MAX_QUBITS {
        return Err(Error::config(format!(
            "qubit count must be in 1..={MAX_QUBITS}, got {n_qubits}"
        )));
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
    amplitudes[0] = Complex64::new(1.0, 0.0);
    Ok(Statevector {
        n_qubits,
        amplitudes,
    })
}

impl Statevector {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::usage(format!(
                "qubit index {q} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }
}

/// Applies a gate in place. Norm is preserved to within 1e-12.
pub fn apply_gate(state: &mut Statevector, gate: Gate) -> Result<()> {
    match gate {
        Gate::Ry { qubit, angle } => {
            state.check_qubit(qubit)?;
            let (s, c) = (angle / 2.0).sin_cos();
            for_each_pair(state, qubit, |a0, a1| {
                let new0 = c * *a0 - s * *a1;
                let new1 = s * *a0 + c * *a1;
                *a0 = new0;
                *a1 = new1;
            });
        }
        Gate::Rz { qubit, angle } => {
            state.check_qubit(qubit)?;
            let phase0 = Complex64::from_polar(1.0, -angle / 2.0);
            let phase1 = Complex64::from_polar(1.0, angle / 2.0);
            for_each_pair(state, qubit, |a0, a1| {
                *a0 *= phase0;
                *a1 *= phase1;
            });
        }
        Gate::Cnot { control, target } => {
            state.check_qubit(control)?;
            state.check_qubit(target)?;
            if control == target {
                return Err(Error::usage(
                    "CNOT control and target must be distinct".to_string(),
                ));
            }
            let cbit = 1usize << control;
            let tbit = 1usize << target;
            for idx in 0..state.amplitudes.len() {
                if idx & cbit != 0 && idx & tbit == 0 {
                    state.amplitudes.swap(idx, idx | tbit);
                }
            }
        }
    }
    Ok(())
}

/// Visits each (bit=0, bit=1) amplitude pair of `qubit` once.
fn for_each_pair<F: FnMut(&mut Complex64, &mut Complex64)>(
    state: &mut Statevector,
    qubit: usize,
    mut f: F,
) {
    let bit = 1usize << qubit;
    let n = state.amplitudes.len();
    let mut base = 0;
    while base < n {
        for low in base..base + bit {
            let (head, tail) = state.amplitudes.split_at_mut(low + bit);
            f(&mut head[low], &mut tail[0]);
        }
        base += bit << 1;
    }
}

/// Applies `RY(features[i])` to qubit `i`, in index order.
pub fn angle_embed(state: &mut Statevector, features: &[f64]) -> Result<()> {
    if features.len() != state.n_qubits {
        return Err(Error::usage(format!(
            "angle embedding expects {} features, got {}",
            state.n_qubits,
            features.len()
        )));
    }
    for (q, &angle) in features.iter().enumerate() {
        apply_gate(state, Gate::Ry { qubit: q, angle })?;
    }
    Ok(())
}

/// Z expectation on one qubit: sum of |amp|^2 weighted by the bit parity.
pub fn expect_z(state: &Statevector, obs: ObservableZ) -> Result<f64> {
    state.check_qubit(obs.qubit_index)?;
    let bit = 1usize << obs.qubit_index;
    let mut acc = 0.0;
    for (idx, amp) in state.amplitudes.iter().enumerate() {
        let sign = if idx & bit == 0 { 1.0 } else { -1.0 };
        acc += sign * amp.norm_sqr();
    }
    Ok(acc)
}

/// Resolves a layout gate slot to a concrete gate given a parameter vector.
pub fn resolve_gate(slot: &GateSlot, params: &[f64]) -> Gate {
    match *slot {
        GateSlot::Ry { qubit, ref angle } => Gate::Ry {
            qubit,
            angle: resolve_angle(angle, params),
        },
        GateSlot::Rz { qubit, ref angle } => Gate::Rz {
            qubit,
            angle: resolve_angle(angle, params),
        },
        GateSlot::Cnot { control, target } => Gate::Cnot { control, target },
    }
}

fn resolve_angle(source: &AngleSource, params: &[f64]) -> f64 {
    match *source {
        AngleSource::Param(slot) => params[slot],
        AngleSource::Fixed(angle) => angle,
    }
}

/// Runs init -> angle embedding -> layout gates -> Z expectations.
///
/// Parameters bind to the layout's slots in declaration order.
pub fn run_circuit(
    features: &[f64],
    layout: &CircuitLayout,
    params: &[f64],
    observables: &[ObservableZ],
) -> Result<Vec<f64>> {
    if features.len() != layout.n_qubits {
        return Err(Error::usage(format!(
            "circuit expects {} features, got {}",
            layout.n_qubits,
            features.len()
        )));
    }
    if params.len() != layout.param_count {
        return Err(Error::usage(format!(
            "circuit expects {} parameters, got {}",
            layout.param_count,
            params.len()
        )));
    }
    let mut state = init_state(layout.n_qubits)?;
    angle_embed(&mut state, features)?;
    for slot in &layout.gates {
        apply_gate(&mut state, resolve_gate(slot, params))?;
    }
    observables
        .iter()
        .map(|&obs| expect_z(&state, obs))
        .collect()
}
