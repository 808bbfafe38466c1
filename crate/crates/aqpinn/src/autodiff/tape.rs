//! Reverse-mode tape over the trainable parameter vector.
//!
//! Every node stores its value and the exact local partials toward its
//! operands, so the reverse sweep is a single pass of multiply-accumulate
//! over the edge list. Parameter leaves occupy the first `param_count`
//! node slots; `backward` returns their adjoints.
//!
//! Quantum expectation values enter the tape as single nodes whose partials
//! are supplied by the circuit evaluator (see `super::circuit`).

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static TAPE_IDS: AtomicU64 = AtomicU64::new(1);

/// Handle to a tape node. Cheap to copy; only valid for the tape generation
/// that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: u32,
}

/// Append-only computation record; topologically ordered by construction.
pub struct Tape {
    id: u64,
    vals: Vec<f64>,
    edges: Vec<(u32, f64)>,
    bounds: Vec<u32>,
    param_count: usize,
    zero: u32,
    adjoint: Vec<f64>,
}

impl Tape {
    /// Creates a tape whose first nodes are the parameter leaves.
    pub fn with_params(params: &[f64]) -> (Tape, Vec<Var>) {
        let id = TAPE_IDS.fetch_add(1, Ordering::Relaxed);
        let mut tape = Tape {
            id,
            vals: Vec::with_capacity(1024),
            edges: Vec::with_capacity(4096),
            bounds: vec![0],
            param_count: params.len(),
            zero: 0,
            adjoint: Vec::new(),
        };
        let vars = params.iter().map(|&v| tape.push(v)).collect();
        tape.zero = tape.push(0.0).idx;
        (tape, vars)
    }

    /// Clears all nodes, reseeds the parameter leaves, and invalidates every
    /// previously issued `Var` by bumping the tape generation.
    pub fn reset(&mut self, params: &[f64]) -> Vec<Var> {
        self.id = TAPE_IDS.fetch_add(1, Ordering::Relaxed);
        self.vals.clear();
        self.edges.clear();
        self.bounds.clear();
        self.bounds.push(0);
        self.param_count = params.len();
        let vars = params.iter().map(|&v| self.push(v)).collect();
        self.zero = self.push(0.0).idx;
        vars
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    fn push(&mut self, value: f64) -> Var {
        self.vals.push(value);
        self.bounds.push(self.edges.len() as u32);
        Var {
            tape: self.id,
            idx: (self.vals.len() - 1) as u32,
        }
    }

    fn check(&self, v: Var) -> Var {
        debug_assert_eq!(v.tape, self.id, "Var used with a foreign tape");
        v
    }

    pub fn zero(&self) -> Var {
        Var {
            tape: self.id,
            idx: self.zero,
        }
    }

    pub fn is_zero(&self, v: Var) -> bool {
        v.idx == self.zero && v.tape == self.id
    }

    pub fn constant(&mut self, value: f64) -> Var {
        if value == 0.0 {
            return self.zero();
        }
        self.push(value)
    }

    pub fn value(&self, v: Var) -> f64 {
        self.vals[self.check(v).idx as usize]
    }

    /// Raw node with explicit local partials; the building block for every
    /// operation including the circuit expectation primitive.
    pub fn node(&mut self, value: f64, edges: &[(Var, f64)]) -> Var {
        for &(p, d) in edges {
            self.check(p);
            if d != 0.0 && p.idx != self.zero {
                self.edges.push((p.idx, d));
            }
        }
        self.vals.push(value);
        self.bounds.push(self.edges.len() as u32);
        Var {
            tape: self.id,
            idx: (self.vals.len() - 1) as u32,
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        if self.is_zero(a) {
            return b;
        }
        if self.is_zero(b) {
            return a;
        }
        self.node(self.vals[a.idx as usize] + self.vals[b.idx as usize], &[(a, 1.0), (b, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        if self.is_zero(b) {
            return a;
        }
        self.node(
            self.vals[a.idx as usize] - self.vals[b.idx as usize],
            &[(a, 1.0), (b, -1.0)],
        )
    }

    pub fn neg(&mut self, a: Var) -> Var {
        if self.is_zero(a) {
            return a;
        }
        self.node(-self.vals[a.idx as usize], &[(a, -1.0)])
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        if self.is_zero(a) || k == 0.0 {
            return self.zero();
        }
        self.node(k * self.vals[a.idx as usize], &[(a, k)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        if self.is_zero(a) || self.is_zero(b) {
            return self.zero();
        }
        let (va, vb) = (self.vals[a.idx as usize], self.vals[b.idx as usize]);
        self.node(va * vb, &[(a, vb), (b, va)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let vb = self.value(b);
        if vb == 0.0 {
            return Err(Error::numeric("division by zero on tape".to_string()));
        }
        let va = self.value(a);
        Ok(self.node(va / vb, &[(a, 1.0 / vb), (b, -va / (vb * vb))]))
    }

    pub fn square(&mut self, a: Var) -> Var {
        if self.is_zero(a) {
            return self.zero();
        }
        let va = self.vals[a.idx as usize];
        self.node(va * va, &[(a, 2.0 * va)])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).tanh();
        self.node(t, &[(a, 1.0 - t * t)])
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let (s, c) = self.value(a).sin_cos();
        self.node(s, &[(a, c)])
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let (s, c) = self.value(a).sin_cos();
        self.node(c, &[(a, -s)])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = self.value(a).exp();
        self.node(e, &[(a, e)])
    }

    pub fn recip(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if va == 0.0 {
            return Err(Error::numeric("reciprocal of zero on tape".to_string()));
        }
        let r = 1.0 / va;
        Ok(self.node(r, &[(a, -r * r)]))
    }

    /// Fused polynomial node: `bias + sum c_i * v_i + sum c_j * a_j * b_j`.
    ///
    /// Being at most quadratic, its local partials are exact functions of the
    /// operand values, so one node replaces a chain of adds and muls.
    pub fn poly(&mut self, bias: f64, linear: &[(f64, Var)], quad: &[(f64, Var, Var)]) -> Var {
        let mut value = bias;
        let start = self.edges.len();
        for &(c, v) in linear {
            self.check(v);
            let val = self.vals[v.idx as usize];
            value += c * val;
            if c != 0.0 && v.idx != self.zero {
                self.edges.push((v.idx, c));
            }
        }
        for &(c, a, b) in quad {
            self.check(a);
            self.check(b);
            let (va, vb) = (self.vals[a.idx as usize], self.vals[b.idx as usize]);
            value += c * va * vb;
            if c != 0.0 && a.idx != self.zero && b.idx != self.zero {
                self.edges.push((a.idx, c * vb));
                self.edges.push((b.idx, c * va));
            }
        }
        if self.edges.len() == start && value == 0.0 {
            return self.zero();
        }
        self.vals.push(value);
        self.bounds.push(self.edges.len() as u32);
        Var {
            tape: self.id,
            idx: (self.vals.len() - 1) as u32,
        }
    }

    /// Reverse accumulation from `loss`; returns d(loss)/d(params).
    pub fn backward(&mut self, loss: Var) -> Result<Vec<f64>> {
        if loss.tape != self.id || (loss.idx as usize) >= self.vals.len() {
            return Err(Error::usage(
                "backward: loss is not a node of this tape".to_string(),
            ));
        }
        self.adjoint.clear();
        self.adjoint.resize(self.vals.len(), 0.0);
        self.adjoint[loss.idx as usize] = 1.0;
        for i in (0..self.vals.len()).rev() {
            let a = self.adjoint[i];
            if a == 0.0 {
                continue;
            }
            let (lo, hi) = (self.bounds[i] as usize, self.bounds[i + 1] as usize);
            for &(p, d) in &self.edges[lo..hi] {
                self.adjoint[p as usize] += a * d;
            }
        }
        Ok(self.adjoint[..self.param_count].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_of_parameter() {
        let (mut tape, gamma) = Tape::with_params(&[3.0]);
        let loss = tape.square(gamma[0]);
        let grad = tape.backward(loss).unwrap();
        assert_eq!(grad, vec![6.0]);
    }

    #[test]
    fn unused_parameter_has_zero_gradient() {
        let (mut tape, gamma) = Tape::with_params(&[2.0, 5.0]);
        let loss = tape.square(gamma[0]);
        let grad = tape.backward(loss).unwrap();
        assert_eq!(grad, vec![4.0, 0.0]);
    }

    #[test]
    fn chain_through_tanh_and_mul() {
        // loss = tanh(a * b), d/da = (1 - tanh^2) * b
        let (mut tape, gamma) = Tape::with_params(&[0.3, -1.2]);
        let p = tape.mul(gamma[0], gamma[1]);
        let loss = tape.tanh(p);
        let grad = tape.backward(loss).unwrap();
        let t = (0.3f64 * -1.2).tanh();
        let s = 1.0 - t * t;
        assert!((grad[0] - s * -1.2).abs() < 1e-15);
        assert!((grad[1] - s * 0.3).abs() < 1e-15);
    }

    #[test]
    fn poly_node_partials() {
        // f = 2 + 3a + a*b - 0.5*b*b
        let (mut tape, g) = Tape::with_params(&[1.5, 2.0]);
        let f = tape.poly(
            2.0,
            &[(3.0, g[0])],
            &[(1.0, g[0], g[1]), (-0.5, g[1], g[1])],
        );
        assert!((tape.value(f) - (2.0 + 4.5 + 3.0 - 2.0)).abs() < 1e-15);
        let grad = tape.backward(f).unwrap();
        assert!((grad[0] - (3.0 + 2.0)).abs() < 1e-15);
        assert!((grad[1] - (1.5 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_sum_is_sum_of_gradients() {
        let mut rng = 7u64;
        let mut next = move || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for _ in 0..20 {
            let params: Vec<f64> = (0..4).map(|_| next()).collect();
            let (mut tape, g) = Tape::with_params(&params);
            let f1 = {
                let m = tape.mul(g[0], g[1]);
                tape.sin(m)
            };
            let f2 = {
                let s = tape.square(g[2]);
                let e = tape.exp(g[3]);
                tape.mul(s, e)
            };
            let sum = tape.add(f1, f2);
            let grad_sum = tape.backward(sum).unwrap();
            let g1 = tape.backward(f1).unwrap();
            let g2 = tape.backward(f2).unwrap();
            for k in 0..4 {
                assert!((grad_sum[k] - (g1[k] + g2[k])).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn foreign_var_rejected() {
        let (mut tape_a, _) = Tape::with_params(&[1.0]);
        let (mut tape_b, gb) = Tape::with_params(&[1.0]);
        let loss_b = tape_b.square(gb[0]);
        assert!(matches!(tape_a.backward(loss_b), Err(Error::Usage(_))));
    }

    #[test]
    fn division_by_zero_is_numeric_error() {
        let (mut tape, g) = Tape::with_params(&[1.0]);
        let zero = tape.constant(0.0);
        assert!(matches!(tape.div(g[0], zero), Err(Error::Numeric(_))));
    }

    #[test]
    fn reset_invalidates_old_vars() {
        let (mut tape, g) = Tape::with_params(&[2.0]);
        let old_loss = tape.square(g[0]);
        let g2 = tape.reset(&[4.0]);
        assert!(tape.backward(old_loss).is_err());
        let loss = tape.square(g2[0]);
        assert_eq!(tape.backward(loss).unwrap(), vec![8.0]);
    }
}
