//! Structured complex linear algebra for the coupled (v, φ) operator.
//!
//! The generator is an "arrow" matrix: a tridiagonal block on the spatial
//! unknowns, a diagonal block on the diffusive modes, and couplings that only
//! touch the first spatial unknown.

use num_complex::Complex64;
use thiserror::Error;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular at pivot index {pivot_index} (|pivot| = {magnitude:e})")]
    Singular { pivot_index: usize, magnitude: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Complex tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    pub fn conj_transpose(&self) -> Self {
        Self {
            lower: self.upper.iter().map(|z| z.conj()).collect(),
            diag: self.diag.iter().map(|z| z.conj()).collect(),
            upper: self.lower.iter().map(|z| z.conj()).collect(),
        }
    }

    /// LU factorization with partial pivoting by row interchanges.
    pub fn factor(&self) -> Result<TridiagonalLu, LinalgError> {
        let n = self.len();
        let mut d = self.diag.clone();
        let mut dl = self.lower.clone();
        let mut du = self.upper.clone();
        let mut du2 = vec![ZERO; n.saturating_sub(2)];
        let mut swap = vec![false; n];
        let scale = d.iter().chain(&dl).chain(&du).fold(0.0f64, |m, z| m.max(z.norm()));
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                let f = if d[i] != ZERO { dl[i] / d[i] } else { ZERO };
                dl[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                // rows i and i+1 change places
                let f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                let t = du[i];
                du[i] = d[i + 1];
                d[i + 1] = t - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du[i + 1];
                }
                swap[i] = true;
            }
        }
        for (i, p) in d.iter().enumerate() {
            if p.norm() <= 1e-300_f64.max(scale * 1e-15) {
                return Err(LinalgError::Singular { pivot_index: i, magnitude: p.norm() });
            }
        }
        Ok(TridiagonalLu { dl, d, du, du2, swap })
    }
}

#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    swap: Vec<bool>,
}

impl TridiagonalLu {
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swap[i] {
                b.swap(i, i + 1);
            }
            let t = b[i];
            b[i + 1] -= self.dl[i] * t;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.du[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.du2[i] * b[i + 2];
            }
            b[i] = s / self.d[i];
        }
    }

    /// Smallest pivot modulus; a cheap conditioning indicator.
    pub fn min_pivot(&self) -> f64 {
        self.d.iter().fold(f64::INFINITY, |m, z| m.min(z.norm()))
    }
}

/// Block matrix [[T, r e₀ᵀ-row], [c e₀-column, diag(p)]] where `row0[j]`
/// couples mode j into the first spatial row and `col0[j]` couples the first
/// spatial unknown into mode j.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrowMatrix {
    pub tri: Tridiagonal,
    pub row0: Vec<Complex64>,
    pub col0: Vec<Complex64>,
    pub modes: Vec<Complex64>,
}

impl ArrowMatrix {
    pub fn n_space(&self) -> usize {
        self.tri.len()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.n_space() + self.n_modes()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_space();
        let mut y = vec![ZERO; self.dim()];
        self.tri.apply(&x[..n], &mut y[..n]);
        for j in 0..self.n_modes() {
            y[0] += self.row0[j] * x[n + j];
            y[n + j] = self.col0[j] * x[0] + self.modes[j] * x[n + j];
        }
        y
    }

    pub fn conj_transpose(&self) -> Self {
        Self {
            tri: self.tri.conj_transpose(),
            row0: self.col0.iter().map(|z| z.conj()).collect(),
            col0: self.row0.iter().map(|z| z.conj()).collect(),
            modes: self.modes.iter().map(|z| z.conj()).collect(),
        }
    }

    /// s I − c M.
    pub fn shifted(&self, s: Complex64, c: Complex64) -> Self {
        let neg = |v: &[Complex64]| v.iter().map(|z| -c * z).collect::<Vec<_>>();
        let mut tri = Tridiagonal { lower: neg(&self.tri.lower), diag: neg(&self.tri.diag), upper: neg(&self.tri.upper) };
        for d in tri.diag.iter_mut() {
            *d += s;
        }
        Self {
            tri,
            row0: neg(&self.row0),
            col0: neg(&self.col0),
            modes: self.modes.iter().map(|z| s - c * z).collect(),
        }
    }

    /// Eliminates the diagonal mode block into the (0, 0) entry and factors
    /// the remaining tridiagonal Schur complement.
    pub fn factor(&self) -> Result<ArrowLu, LinalgError> {
        let mut schur = self.tri.clone();
        for j in 0..self.n_modes() {
            let p = self.modes[j];
            if p.norm() < 1e-300 {
                return Err(LinalgError::Singular { pivot_index: self.n_space() + j, magnitude: p.norm() });
            }
            schur.diag[0] -= self.row0[j] * self.col0[j] / p;
        }
        Ok(ArrowLu { lu: schur.factor()?, row0: self.row0.clone(), col0: self.col0.clone(), modes: self.modes.clone() })
    }

    /// Eigenpair nearest `shift`: inverse iteration until it locks on, then
    /// Rayleigh-quotient shifts. Returns λ, a unit vector and the
    /// relative residual ‖Mx − λx‖/|λ|.
    pub fn nearest_eigenpair(&self, shift: Complex64, tol: f64, max_iter: usize) -> Result<(Complex64, Vec<Complex64>, f64), LinalgError> {
        let one = Complex64::new(1.0, 0.0);
        let n = self.dim();
        let mut x: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0, 0.1 * (i as f64).sin())).collect();
        normalize(&mut x);
        let mut sigma = shift;
        let mut best = (shift, x.clone(), f64::INFINITY);
        let mut nudges = 0;
        for it in 0..max_iter {
            let lu = match self.shifted(sigma, one).factor() {
                Ok(lu) => lu,
                // sigma sits on an eigenvalue to working precision
                Err(LinalgError::Singular { .. }) if it > 0 => return Ok(best),
                // a shift placed exactly on an eigenvalue: move it off slightly
                Err(LinalgError::Singular { .. }) if nudges < 3 => {
                    nudges += 1;
                    sigma += Complex64::new(1.0, 1.0) * (1e-10 * sigma.norm().max(1.0));
                    continue;
                }
                Err(e) => return Err(e),
            };
            x = lu.solve(&x)?;
            normalize(&mut x);
            let mx = self.apply(&x);
            let lambda: Complex64 = mx.iter().zip(&x).map(|(a, b)| a * b.conj()).sum();
            let res = mx.iter().zip(&x).map(|(a, b)| (a - lambda * b).norm_sqr()).sum::<f64>().sqrt() / lambda.norm().max(1.0);
            if res < best.2 {
                best = (lambda, x.clone(), res);
            }
            if res < tol {
                break;
            }
            // fixed shift until the nearest eigenvalue dominates
            if res < 1e-3 {
                sigma = lambda;
            }
        }
        Ok(best)
    }
}

fn normalize(x: &mut [Complex64]) {
    let s = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if s > 0.0 {
        x.iter_mut().for_each(|z| *z /= s);
    }
}

#[derive(Debug, Clone)]
pub struct ArrowLu {
    lu: TridiagonalLu,
    row0: Vec<Complex64>,
    col0: Vec<Complex64>,
    modes: Vec<Complex64>,
}

impl ArrowLu {
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        let m = self.modes.len();
        let n = self.lu.d.len();
        if b.len() != n + m {
            return Err(LinalgError::Dimension { expected: n + m, got: b.len() });
        }
        let mut x = b.to_vec();
        for j in 0..m {
            x[0] -= self.row0[j] * b[n + j] / self.modes[j];
        }
        self.lu.solve_in_place(&mut x[..n]);
        for j in 0..m {
            x[n + j] = (b[n + j] - self.col0[j] * x[0]) / self.modes[j];
        }
        Ok(x)
    }

    pub fn min_pivot(&self) -> f64 {
        self.lu.min_pivot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> ArrowMatrix {
        let n = 6;
        ArrowMatrix {
            tri: Tridiagonal {
                lower: (0..n - 1).map(|i| c(1.0 + i as f64, 0.3)).collect(),
                // small diagonal forces row interchanges
                diag: (0..n).map(|i| c(0.01 * i as f64, -0.2)).collect(),
                upper: (0..n - 1).map(|i| c(-0.5, 0.1 * i as f64)).collect(),
            },
            row0: vec![c(0.2, 0.0), c(-0.4, 0.1), c(0.0, 1.0)],
            col0: vec![c(1.0, 0.0), c(0.5, 0.5), c(-1.0, 0.2)],
            modes: vec![c(2.0, 0.0), c(-3.0, 1.0), c(0.7, -0.2)],
        }
    }

    #[test]
    fn solve_roundtrip_with_pivoting() {
        let a = sample();
        let b: Vec<Complex64> = (0..a.dim()).map(|i| c(i as f64 - 2.0, 0.5 * i as f64)).collect();
        for m in [a.clone(), a.conj_transpose(), a.shifted(c(0.0, 3.0), c(1.0, 0.0))] {
            let x = m.factor().unwrap().solve(&b).unwrap();
            let r = m.apply(&x);
            let err: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{err}");
        }
    }

    #[test]
    fn adjoint_identity() {
        let a = sample();
        let x: Vec<Complex64> = (0..a.dim()).map(|i| c(1.0 / (1.0 + i as f64), 0.2)).collect();
        let y: Vec<Complex64> = (0..a.dim()).map(|i| c(0.3, i as f64)).collect();
        let dot = |u: &[Complex64], v: &[Complex64]| u.iter().zip(v).map(|(p, q)| p * q.conj()).sum::<Complex64>();
        let lhs = dot(&a.apply(&x), &y);
        let rhs = dot(&x, &a.conj_transpose().apply(&y));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn singular_detected() {
        let t = Tridiagonal { lower: vec![c(1.0, 0.0)], diag: vec![c(1.0, 0.0), c(1.0, 0.0)], upper: vec![c(1.0, 0.0)] };
        assert!(matches!(t.factor(), Err(LinalgError::Singular { .. })));
    }
}
