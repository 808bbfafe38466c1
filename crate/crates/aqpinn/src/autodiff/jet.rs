//! Truncated Taylor jets in the three inputs (x, y, t).
//!
//! A jet carries the value, all first and second partial derivatives, and the
//! purely spatial third-order derivatives (xxx, xxy, xyy, yyy). The spatial
//! third order is required by the streamfunction head: u = d(psi)/dy means the
//! viscous terms of the momentum residual are third derivatives of psi.
//!
//! Components store actual partial derivatives (not Taylor coefficients), so
//! the Leibniz rule picks up multinomial factors. Product and chain-rule
//! expansions are table-driven; the tables are generated from the multi-index
//! set at first use and shared by the numeric jets here and the tape-backed
//! scalars in `super::scalar`.

use std::sync::OnceLock;

pub const N_COMPS: usize = 14;

pub const VAL: usize = 0;
pub const DX: usize = 1;
pub const DY: usize = 2;
pub const DT: usize = 3;
pub const DXX: usize = 4;
pub const DXY: usize = 5;
pub const DYY: usize = 6;
pub const DXT: usize = 7;
pub const DYT: usize = 8;
pub const DTT: usize = 9;
pub const DXXX: usize = 10;
pub const DXXY: usize = 11;
pub const DXYY: usize = 12;
pub const DYYY: usize = 13;

/// Exponent triples (x, y, t) for each component, in component order.
pub const EXPONENTS: [[u8; 3]; N_COMPS] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [2, 0, 0],
    [1, 1, 0],
    [0, 2, 0],
    [1, 0, 1],
    [0, 1, 1],
    [0, 0, 2],
    [3, 0, 0],
    [2, 1, 0],
    [1, 2, 0],
    [0, 3, 0],
];

fn comp_index(exp: [u8; 3]) -> Option<usize> {
    EXPONENTS.iter().position(|&e| e == exp)
}

fn binomial(n: u8, k: u8) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * f64::from(n - i) / f64::from(i + 1);
    }
    acc
}

/// Product of per-direction binomials: the Leibniz weight of splitting `alpha`
/// into `beta` + (`alpha` - `beta`).
pub fn multinomial(alpha: [u8; 3], beta: [u8; 3]) -> f64 {
    (0..3).map(|d| binomial(alpha[d], beta[d])).product()
}

/// One Leibniz term: out += coeff * a[lhs] * b[rhs].
#[derive(Debug, Clone, Copy)]
pub struct MulTerm {
    pub lhs: usize,
    pub rhs: usize,
    pub coeff: f64,
}

/// One chain-rule term: out += coeff * phi^(order) * prod(a[factors]).
#[derive(Debug, Clone)]
pub struct ChainTerm {
    pub order: usize,
    pub factors: Vec<usize>,
    pub coeff: f64,
}

pub struct Tables {
    /// Per output component: ordered Leibniz expansion of a product.
    pub mul: Vec<Vec<MulTerm>>,
    /// Per output component of order >= 1: Faa di Bruno expansion terms.
    pub chain: Vec<Vec<ChainTerm>>,
}

static TABLES: OnceLock<Tables> = OnceLock::new();

pub fn tables() -> &'static Tables {
    TABLES.get_or_init(build_tables)
}

fn build_tables() -> Tables {
    let mut mul = Vec::with_capacity(N_COMPS);
    let mut chain = Vec::with_capacity(N_COMPS);
    for &alpha in EXPONENTS.iter() {
        mul.push(mul_terms(alpha));
        chain.push(chain_terms(alpha));
    }
    Tables { mul, chain }
}

fn mul_terms(alpha: [u8; 3]) -> Vec<MulTerm> {
    let mut terms = Vec::new();
    for bx in 0..=alpha[0] {
        for by in 0..=alpha[1] {
            for bt in 0..=alpha[2] {
                let beta = [bx, by, bt];
                let rest = [alpha[0] - bx, alpha[1] - by, alpha[2] - bt];
                // The component set is closed under taking sub-indices, so
                // both halves are always present.
                let lhs = comp_index(beta).expect("sub-index in component set");
                let rhs = comp_index(rest).expect("sub-index in component set");
                terms.push(MulTerm {
                    lhs,
                    rhs,
                    coeff: multinomial(alpha, beta),
                });
            }
        }
    }
    terms
}

/// Expands d^alpha phi(f) into terms phi^(k) * prod of derivatives of f by
/// enumerating set partitions of the direction multiset of alpha.
fn chain_terms(alpha: [u8; 3]) -> Vec<ChainTerm> {
    let mut dirs = Vec::new();
    for (d, &count) in alpha.iter().enumerate() {
        for _ in 0..count {
            dirs.push(d);
        }
    }
    if dirs.is_empty() {
        return Vec::new();
    }
    // Accumulate coefficients keyed by (phi order, sorted factor components).
    let mut acc: Vec<(usize, Vec<usize>, f64)> = Vec::new();
    for partition in set_partitions(dirs.len()) {
        let mut factors: Vec<usize> = partition
            .iter()
            .map(|block| {
                let mut exp = [0u8; 3];
                for &pos in block {
                    exp[dirs[pos]] += 1;
                }
                comp_index(exp).expect("block exponent in component set")
            })
            .collect();
        factors.sort_unstable();
        let order = partition.len();
        match acc
            .iter_mut()
            .find(|(o, f, _)| *o == order && *f == factors)
        {
            Some(entry) => entry.2 += 1.0,
            None => acc.push((order, factors, 1.0)),
        }
    }
    acc.into_iter()
        .map(|(order, factors, coeff)| ChainTerm {
            order,
            factors,
            coeff,
        })
        .collect()
}

/// All set partitions of {0, .., n-1} for n <= 3.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    match n {
        1 => vec![vec![vec![0]]],
        2 => vec![vec![vec![0, 1]], vec![vec![0], vec![1]]],
        3 => vec![
            vec![vec![0, 1, 2]],
            vec![vec![0, 1], vec![2]],
            vec![vec![0, 2], vec![1]],
            vec![vec![1, 2], vec![0]],
            vec![vec![0], vec![1], vec![2]],
        ],
        _ => unreachable!("jet order is capped at 3"),
    }
}

/// Numeric jet: value plus input derivatives, propagated by table-driven
/// truncated Taylor arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub c: [f64; N_COMPS],
}

impl Jet {
    pub const ZERO: Jet = Jet { c: [0.0; N_COMPS] };

    pub fn constant(v: f64) -> Jet {
        let mut c = [0.0; N_COMPS];
        c[VAL] = v;
        Jet { c }
    }

    /// Seeds an input variable: unit first derivative in one direction.
    pub fn input(v: f64, direction: usize) -> Jet {
        let mut c = [0.0; N_COMPS];
        c[VAL] = v;
        c[1 + direction] = 1.0;
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[VAL]
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(other.c.iter()) {
            *a += b;
        }
        Jet { c }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(other.c.iter()) {
            *a -= b;
        }
        Jet { c }
    }

    pub fn neg(&self) -> Jet {
        let mut c = self.c;
        for a in c.iter_mut() {
            *a = -*a;
        }
        Jet { c }
    }

    pub fn scale(&self, k: f64) -> Jet {
        let mut c = self.c;
        for a in c.iter_mut() {
            *a *= k;
        }
        Jet { c }
    }

    pub fn add_scaled(&mut self, other: &Jet, k: f64) {
        for (a, b) in self.c.iter_mut().zip(other.c.iter()) {
            *a += k * b;
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let t = tables();
        let mut c = [0.0; N_COMPS];
        for (out, terms) in c.iter_mut().zip(t.mul.iter()) {
            let mut acc = 0.0;
            for term in terms {
                acc += term.coeff * self.c[term.lhs] * other.c[term.rhs];
            }
            *out = acc;
        }
        Jet { c }
    }

    pub fn square(&self) -> Jet {
        self.mul(self)
    }

    /// Composes with a scalar function given its value and first three
    /// derivatives at this jet's value.
    pub fn compose(&self, phi: [f64; 4]) -> Jet {
        let t = tables();
        let mut c = [0.0; N_COMPS];
        c[VAL] = phi[0];
        for k in 1..N_COMPS {
            let mut acc = 0.0;
            for term in &t.chain[k] {
                let mut prod = term.coeff * phi[term.order];
                for &f in &term.factors {
                    prod *= self.c[f];
                }
                acc += prod;
            }
            c[k] = acc;
        }
        Jet { c }
    }

    pub fn tanh(&self) -> Jet {
        let v = self.c[VAL].tanh();
        let s = 1.0 - v * v;
        self.compose([v, s, -2.0 * v * s, -2.0 * s * (1.0 - 3.0 * v * v)])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.c[VAL].sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.c[VAL].sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(&self) -> Jet {
        let e = self.c[VAL].exp();
        self.compose([e, e, e, e])
    }

    pub fn recip(&self) -> Jet {
        let r = 1.0 / self.c[VAL];
        let r2 = r * r;
        self.compose([r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2])
    }

    pub fn div(&self, other: &Jet) -> Jet {
        self.mul(&other.recip())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() < tol, "{what}: {a} vs {b}");
    }

    #[test]
    fn seeds_are_unit_gradients() {
        let x = Jet::input(1.0, 0);
        assert_eq!(x.c[VAL], 1.0);
        assert_eq!(x.c[DX], 1.0);
        assert_eq!(x.c[DY], 0.0);
        assert_eq!(x.c[DXX], 0.0);
    }

    #[test]
    fn product_rule_bilinear() {
        let x = Jet::input(2.0, 0);
        let y = Jet::input(3.0, 1);
        let p = x.mul(&y);
        assert_eq!(p.c[VAL], 6.0);
        assert_eq!(p.c[DX], 3.0);
        assert_eq!(p.c[DY], 2.0);
        assert_eq!(p.c[DXY], 1.0);
        assert_eq!(p.c[DXX], 0.0);
    }

    #[test]
    fn square_polynomial() {
        let x = Jet::input(5.0, 0);
        let sq = x.square();
        assert_eq!(sq.c[VAL], 25.0);
        assert_eq!(sq.c[DX], 10.0);
        assert_eq!(sq.c[DXX], 2.0);
        assert_eq!(sq.c[DXXX], 0.0);
    }

    #[test]
    fn cube_has_constant_third_derivative() {
        let x = Jet::input(1.5, 0);
        let cube = x.mul(&x).mul(&x);
        assert_close(cube.c[VAL], 3.375, 1e-15, "value");
        assert_close(cube.c[DX], 3.0 * 1.5 * 1.5, 1e-15, "dx");
        assert_close(cube.c[DXX], 6.0 * 1.5, 1e-15, "dxx");
        assert_close(cube.c[DXXX], 6.0, 1e-15, "dxxx");
    }

    #[test]
    fn tanh_at_zero() {
        let x = Jet::input(0.0, 0);
        let t = x.tanh();
        assert_eq!(t.c[VAL], 0.0);
        assert_eq!(t.c[DX], 1.0);
        assert_eq!(t.c[DXX], 0.0);
        assert_close(t.c[DXXX], -2.0, 1e-15, "dxxx");
    }

    #[test]
    fn sin_at_half_pi() {
        let x = Jet::input(std::f64::consts::FRAC_PI_2, 0);
        let s = x.sin();
        assert_close(s.c[VAL], 1.0, 1e-15, "value");
        assert_close(s.c[DX], 0.0, 1e-15, "dx");
        assert_close(s.c[DXX], -1.0, 1e-15, "dxx");
    }

    /// Central finite differences on composite expressions, all 14 components.
    #[test]
    fn composite_matches_finite_differences() {
        let f = |x: f64, y: f64, t: f64| (x * y).tanh() + x * x * t.sin() + (0.3 * y).exp();
        let (x0, y0, t0) = (0.7, -0.4, 1.1);

        let jx = Jet::input(x0, 0);
        let jy = Jet::input(y0, 1);
        let jt = Jet::input(t0, 2);
        let got = jx
            .mul(&jy)
            .tanh()
            .add(&jx.square().mul(&jt.sin()))
            .add(&jy.scale(0.3).exp());

        let h = 1e-4;
        let fd = |dx: f64, dy: f64, dt: f64| f(x0 + dx * h, y0 + dy * h, t0 + dt * h);
        let fd_x = (fd(1.0, 0.0, 0.0) - fd(-1.0, 0.0, 0.0)) / (2.0 * h);
        let fd_yy = (fd(0.0, 1.0, 0.0) - 2.0 * fd(0.0, 0.0, 0.0) + fd(0.0, -1.0, 0.0)) / (h * h);
        let fd_xt = (fd(1.0, 0.0, 1.0) - fd(1.0, 0.0, -1.0) - fd(-1.0, 0.0, 1.0)
            + fd(-1.0, 0.0, -1.0))
            / (4.0 * h * h);
        assert_close(got.c[VAL], f(x0, y0, t0), 1e-14, "value");
        assert_close(got.c[DX], fd_x, 1e-7, "dx");
        assert_close(got.c[DYY], fd_yy, 1e-5, "dyy");
        assert_close(got.c[DXT], fd_xt, 1e-5, "dxt");
    }

    /// Third-order components against an analytically differentiable case.
    #[test]
    fn third_order_spatial_analytic() {
        // f = sin(x) * cos(y): f_xxy = -cos(x) * (-sin(y)) = cos x sin y
        let (x0, y0) = (0.9, 0.3);
        let jx = Jet::input(x0, 0);
        let jy = Jet::input(y0, 1);
        let f = jx.sin().mul(&jy.cos());
        assert_close(f.c[DXXX], -x0.cos() * y0.cos(), 1e-14, "dxxx");
        assert_close(f.c[DXXY], x0.sin() * y0.sin(), 1e-14, "dxxy");
        assert_close(f.c[DXYY], -x0.cos() * y0.cos(), 1e-14, "dxyy");
        assert_close(f.c[DYYY], x0.sin() * y0.sin(), 1e-14, "dyyy");
    }

    #[test]
    fn division_roundtrip() {
        let x = Jet::input(0.8, 0);
        let y = Jet::input(1.7, 1);
        let q = x.sin().div(&y);
        let back = q.mul(&y);
        let expect = x.sin();
        for k in 0..N_COMPS {
            assert_close(back.c[k], expect.c[k], 1e-12, &format!("comp {k}"));
        }
    }
}
