//! Diffusive realization of the fractional integral I^{1−α̃,η}.
//!
//! The ξ-axis is folded onto ξ > 0 and discretized on a log-uniform midpoint
//! grid, plus one lumped node carrying the power-law tail beyond the grid.

pub use crate::params::ModelParams;
use crate::quadrature::gauss_legendre;
use crate::special::recip_gamma;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use thiserror::Error;

/// Default relative tolerance a grid must reach to be certified.
pub const CERT_TOL: f64 = 1e-4;
const CERT_REAL: usize = 20;
const CERT_IMAG: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusiveError {
    #[error("singular node: mu(0) diverges for alpha_tilde = {0} < 1/2")]
    SingularNode(f64),
    #[error("branch cut: lambda + eta = {0} lies on (-inf, 0]")]
    BranchCut(Complex64),
    #[error("grid certification failed: worst lambda = {worst_lambda}, relative error {error:e} > {tol:e}")]
    Certification { worst_lambda: Complex64, error: f64, tol: f64 },
    #[error("invalid grid request: {0}")]
    InvalidRequest(String),
    #[error("grid file: {0}")]
    Io(String),
}

/// μ(ξ) = ξ^{(2α̃−1)/2}.
pub fn mu_weight(xi: f64, alpha_tilde: f64) -> Result<f64, DiffusiveError> {
    if xi == 0.0 {
        return match alpha_tilde {
            a if a > 0.5 => Ok(0.0),
            0.5 => Ok(1.0),
            a => Err(DiffusiveError::SingularNode(a)),
        };
    }
    Ok(xi.powf(alpha_tilde - 0.5))
}

/// π/sin(α̃π) · (λ+η)^{α̃−1}, principal branch.
pub fn kernel_integral_closed(lambda: Complex64, params: &ModelParams) -> Result<Complex64, DiffusiveError> {
    let c = lambda + params.eta;
    if c.im == 0.0 && c.re <= 0.0 {
        return Err(DiffusiveError::BranchCut(c));
    }
    let at = params.alpha_tilde;
    Ok(c.powf(at - 1.0) * (PI / (at * PI).sin()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusiveGrid {
    pub xi: Vec<f64>,
    /// Quadrature weights with the folding factor 2 included.
    pub weight: Vec<f64>,
    pub mu: Vec<f64>,
    pub alpha_tilde: f64,
    /// λ band the grid was certified on.
    pub band: [f64; 2],
    /// Worst relative error seen during certification.
    pub certified_error: f64,
}

/// A quadrature value together with whether λ lies inside the certified band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    pub certified: bool,
}

impl DiffusiveGrid {
    pub fn n_modes(&self) -> usize {
        self.xi.len()
    }

    pub fn covers(&self, lambda: Complex64) -> bool {
        let m = lambda.norm();
        m >= self.band[0] * (1.0 - 1e-12) && m <= self.band[1] * (1.0 + 1e-12)
    }

    /// Columns xi, weight, mu with a leading comment line.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &str) -> std::io::Result<()> {
        writeln!(out, "# {header}")?;
        writeln!(out, "xi,weight,mu")?;
        for j in 0..self.n_modes() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", self.xi[j], self.weight[j], self.mu[j])?;
        }
        Ok(())
    }

    /// Reads a grid written by [`DiffusiveGrid::write_csv`]; the band and
    /// certification data are not stored in the file and must be supplied.
    pub fn read_csv<R: BufRead>(input: R, alpha_tilde: f64, band: [f64; 2]) -> Result<Self, DiffusiveError> {
        let (mut xi, mut weight, mut mu) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| DiffusiveError::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("xi") {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            match vals {
                Ok(v) if v.len() == 3 => {
                    xi.push(v[0]);
                    weight.push(v[1]);
                    mu.push(v[2]);
                }
                _ => return Err(DiffusiveError::Io(format!("line {}: expected three numbers", lineno + 1))),
            }
        }
        let mut grid = Self { xi, weight, mu, alpha_tilde, band, certified_error: f64::NAN };
        grid.certified_error = certification_error(&grid, &dummy_params(alpha_tilde, 0.0), band).1;
        Ok(grid)
    }
}

fn dummy_params(alpha_tilde: f64, eta: f64) -> ModelParams {
    ModelParams { alpha: 0.5, alpha_tilde, eta, rho: 1.0 }
}

fn certification_points(band: [f64; 2]) -> Vec<Complex64> {
    let (lo, hi) = (band[0].ln(), band[1].ln());
    let real = (0..CERT_REAL).map(|i| Complex64::new((lo + (hi - lo) * i as f64 / (CERT_REAL - 1) as f64).exp(), 0.0));
    let imag = (0..CERT_IMAG).map(|i| Complex64::new(0.0, (lo + (hi - lo) * i as f64 / (CERT_IMAG - 1) as f64).exp()));
    real.chain(imag).collect()
}

fn certification_error(grid: &DiffusiveGrid, params: &ModelParams, band: [f64; 2]) -> (Complex64, f64) {
    let mut worst = (Complex64::new(band[0], 0.0), 0.0);
    for lambda in certification_points(band) {
        let e = match kernel_integral_closed(lambda, params) {
            Ok(exact) => (quadrature_sum(grid, lambda, params.eta) - exact).norm() / exact.norm(),
            Err(_) => f64::INFINITY,
        };
        if !(e <= worst.1) {
            worst = (lambda, e);
        }
    }
    worst
}

/// Builds and certifies a grid for λ in `lambda_band` (real and imaginary
/// λ of modulus inside the band are both certified).
///
/// Node spacing h and the log-span are balanced so that the discretization
/// error e^{−π²/(2h)} of the midpoint rule matches the truncation error at
/// both ends of the grid.
pub fn build_xi_grid(params: &ModelParams, n_modes: usize, lambda_band: [f64; 2]) -> Result<DiffusiveGrid, DiffusiveError> {
    build_xi_grid_with_tol(params, n_modes, lambda_band, CERT_TOL)
}

pub fn build_xi_grid_with_tol(
    params: &ModelParams,
    n_modes: usize,
    lambda_band: [f64; 2],
    tol: f64,
) -> Result<DiffusiveGrid, DiffusiveError> {
    let at = params.alpha_tilde;
    if params.direct_damping() {
        return Err(DiffusiveError::InvalidRequest("alpha_tilde = 1 uses direct damping, no diffusive grid".into()));
    }
    if n_modes < 8 {
        return Err(DiffusiveError::InvalidRequest(format!("n_modes = {n_modes} < 8")));
    }
    let [lmin, lmax] = lambda_band;
    if !(lmin > 0.0 && lmax > lmin && lmax.is_finite()) {
        return Err(DiffusiveError::InvalidRequest(format!("band [{lmin}, {lmax}] is not 0 < min < max")));
    }
    let c_min = lmin.hypot(params.eta);
    let c_max = lmax + params.eta;
    let span = 0.5 * (c_max / c_min).ln();
    let interior = (n_modes - 1) as f64;
    let a = 1.0 / (2.0 * at) + 0.25;
    let big_e = (-span + (span * span + 2.0 * a * interior * PI * PI).sqrt()) / (2.0 * a);
    let h = PI * PI / (2.0 * big_e);
    let s_low = 0.5 * c_min.ln() - big_e / (2.0 * at);

    let mut xi = Vec::with_capacity(n_modes);
    let mut weight = Vec::with_capacity(n_modes);
    for j in 0..n_modes - 1 {
        let x = (s_low + (j as f64 + 0.5) * h).exp();
        xi.push(x);
        weight.push(2.0 * h * x);
    }
    // Lumped tail node. Beyond the cut Ξ the integrand behaves like
    // ξ^{2α̃−3} − c ξ^{2α̃−5}; the node reproduces what the midpoint rule
    // would collect from both terms if the grid were continued to infinity,
    // which removes the O(h²) endpoint error of a plain truncation.
    let cut = (s_low + interior * h).exp();
    let kappa = 2.0 - 2.0 * at;
    let geometric = |rate: f64| h / (2.0 * (0.5 * rate * h).sinh()) * cut.powf(-rate);
    let (m1, m2) = (geometric(kappa), geometric(kappa + 2.0));
    let tail_xi = (m1 / m2).sqrt();
    xi.push(tail_xi);
    weight.push(2.0 * m1 / tail_xi.powf(2.0 * at - 3.0));

    let mu = xi.iter().map(|&x| x.powf(at - 0.5)).collect();
    let mut grid = DiffusiveGrid { xi, weight, mu, alpha_tilde: at, band: lambda_band, certified_error: 0.0 };
    let (worst_lambda, error) = certification_error(&grid, params, lambda_band);
    grid.certified_error = error;
    if !(error <= tol) {
        return Err(DiffusiveError::Certification { worst_lambda, error, tol });
    }
    Ok(grid)
}

fn quadrature_sum(grid: &DiffusiveGrid, lambda: Complex64, eta: f64) -> Complex64 {
    let c = lambda + eta;
    grid.xi
        .iter()
        .zip(&grid.weight)
        .zip(&grid.mu)
        .map(|((&x, &w), &m)| w * m * m / (c + x * x))
        .sum()
}

/// Σ_j w_j μ_j²/(λ+η+ξ_j²), flagged uncertified when |λ| leaves the band.
pub fn quadrature_kernel_integral(grid: &DiffusiveGrid, lambda: Complex64, params: &ModelParams) -> KernelValue {
    KernelValue { value: quadrature_sum(grid, lambda, params.eta), certified: grid.covers(lambda) }
}

/// Exact update of every mode over one step with the input held at `input_u`.
pub fn step_phi(grid: &DiffusiveGrid, phi: &[Complex64], input_u: Complex64, dt: f64, params: &ModelParams) -> Vec<Complex64> {
    phi.iter()
        .zip(&grid.xi)
        .zip(&grid.mu)
        .map(|((&p, &x), &m)| {
            let kappa = x * x + params.eta;
            if kappa < 1e-12 {
                p + input_u * m * dt
            } else {
                p * (-kappa * dt).exp() + input_u * m * (-(-kappa * dt).exp_m1() / kappa)
            }
        })
        .collect()
}

/// O = (sin α̃π/π) Σ_j w_j μ_j φ_j.
pub fn diffusive_output(grid: &DiffusiveGrid, phi: &[Complex64], params: &ModelParams) -> Complex64 {
    let s: Complex64 = phi.iter().zip(&grid.weight).zip(&grid.mu).map(|((&p, &w), &m)| p * (w * m)).sum();
    s * ((params.alpha_tilde * PI).sin() / PI)
}

/// Runs the φ-system from rest, returning the output after every step.
pub fn diffusive_pipeline(grid: &DiffusiveGrid, samples: &[Complex64], dt: f64, params: &ModelParams) -> Vec<Complex64> {
    let mut phi = vec![Complex64::new(0.0, 0.0); grid.n_modes()];
    let mut out = Vec::with_capacity(samples.len() + 1);
    out.push(Complex64::new(0.0, 0.0));
    for &u in samples {
        phi = step_phi(grid, &phi, u, dt, params);
        out.push(diffusive_output(grid, &phi, params));
    }
    out
}

/// ∫ over [k dt, (k+1) dt] of s^{β−1} e^{−ηs}/Γ(β), k = 0..n.
fn kernel_cell_weights(beta: f64, eta: f64, dt: f64, n: usize) -> Vec<f64> {
    let (gx, gw) = gauss_legendre(12);
    let rg = recip_gamma(beta);
    (0..n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                let mut sum = 0.0;
                let mut pw = 1.0;
                for m in 0..60 {
                    let t = pw / (m as f64 + beta);
                    sum += t;
                    if t.abs() < 1e-18 * sum.abs() {
                        break;
                    }
                    pw *= -eta * dt / (m as f64 + 1.0);
                }
                rg * dt.powf(beta) * sum
            } else {
                let c = (k as f64 + 0.5) * dt;
                let h = 0.5 * dt;
                gx.iter()
                    .zip(&gw)
                    .map(|(&x, &w)| {
                        let s = c + h * x;
                        w * s.powf(beta - 1.0) * (-eta * s).exp()
                    })
                    .sum::<f64>()
                    * h
                    * rg
            }
        })
        .collect()
}

/// Product-integration evaluation of I^{1−α̃,η}U for piecewise-constant
/// data: `samples[j]` is the value of U on [j dt, (j+1) dt]. The result has
/// one entry per grid time t_n = n dt, n = 0..=samples.len().
pub fn fractional_integral_direct(samples: &[Complex64], dt: f64, params: &ModelParams) -> Vec<Complex64> {
    fractional_integral_strided(samples, dt, params, 1)
}

/// As [`fractional_integral_direct`] but only at every `stride`-th time.
pub fn fractional_integral_strided(samples: &[Complex64], dt: f64, params: &ModelParams, stride: usize) -> Vec<Complex64> {
    let n = samples.len();
    let stride = stride.max(1);
    if params.direct_damping() {
        // order zero: the operator is the identity on the data
        return (0..=n)
            .step_by(stride)
            .map(|i| samples.get(i.saturating_sub(1)).copied().unwrap_or_default())
            .collect();
    }
    let w = kernel_cell_weights(1.0 - params.alpha_tilde, params.eta, dt, n);
    let times: Vec<usize> = (0..=n).step_by(stride).collect();
    times
        .into_par_iter()
        .map(|i| (0..i).map(|j| samples[j] * w[i - 1 - j]).sum())
        .collect()
}
