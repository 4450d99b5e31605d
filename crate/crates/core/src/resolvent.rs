//! Resolvent of the discrete generator along the imaginary axis.

use crate::fit::{linear_fit, LinearFit};
use crate::linalg::{ArrowLu, LinalgError};
use crate::params::ModelParams;
use crate::pde::Generator;
use crate::spectrum::{asymptotic_lambda, classify, compute_spectrum, CaseTag, SpectrumError};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

pub const NORM_ITERATIONS: usize = 20;
pub const NORM_REL_TOL: f64 = 1e-6;
pub const SOLVE_REL_TOL: f64 = 1e-10;
/// A point closer than this to the spectrum, relative to |β|, is treated as
/// an eigenvalue: eigenvalues themselves are only known to about 1e−13.
pub const SINGULAR_REL_GAP: f64 = 1e-9;

fn is_pole(norm: f64, beta: f64) -> bool {
    !norm.is_finite() || norm * beta.abs().max(1.0) * SINGULAR_REL_GAP > 1.0
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResolventError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("i*{beta} is numerically an eigenvalue (relative residual {residual:e})")]
    NearSingular { beta: f64, residual: f64 },
    #[error("right-hand side has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("only {found} resolvent peaks in the fit band, at least 5 are needed")]
    TooFewPeaks { found: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventSample {
    /// Frequency β of the point iβ.
    pub lambda: f64,
    pub norm_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// (iβ − A) and its conjugate transpose, both factored.
struct Factored {
    beta: f64,
    lu: ArrowLu,
    lu_adj: ArrowLu,
    gram: Vec<f64>,
}

impl Factored {
    fn new(gen: &Generator, beta: f64) -> Result<Self, ResolventError> {
        let op = gen.matrix.shifted(Complex64::new(0.0, beta), Complex64::new(1.0, 0.0));
        Ok(Self { beta, lu: op.factor()?, lu_adj: op.conj_transpose().factor()?, gram: gen.gram() })
    }

    fn norm(&self, u: &[Complex64]) -> f64 {
        u.iter().zip(&self.gram).map(|(z, g)| g * z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn apply(&self, u: &[Complex64]) -> Result<Vec<Complex64>, ResolventError> {
        Ok(self.lu.solve(u)?)
    }

    /// Adjoint of the resolvent in the weighted product: G⁻¹ R^H G.
    fn apply_adjoint(&self, u: &[Complex64]) -> Result<Vec<Complex64>, ResolventError> {
        let gu: Vec<Complex64> = u.iter().zip(&self.gram).map(|(z, g)| z * g).collect();
        let y = self.lu_adj.solve(&gu)?;
        Ok(y.iter().zip(&self.gram).map(|(z, g)| z / g).collect())
    }
}

/// Solves (iβ − A)V = F and checks the residual in the weighted norm.
pub fn solve_resolvent(gen: &Generator, beta: f64, f: &[Complex64]) -> Result<Vec<Complex64>, ResolventError> {
    if f.len() != gen.dim() {
        return Err(ResolventError::Dimension { expected: gen.dim(), got: f.len() });
    }
    let fac = Factored::new(gen, beta)?;
    let v = fac.apply(f)?;
    let fnorm = fac.norm(f);
    if fnorm == 0.0 {
        return Ok(v);
    }
    let av = gen.apply(&v);
    let r: Vec<Complex64> = (0..f.len()).map(|i| Complex64::new(0.0, beta) * v[i] - av[i] - f[i]).collect();
    let residual = fac.norm(&r) / fnorm;
    if !(residual <= SOLVE_REL_TOL) {
        return Err(ResolventError::NearSingular { beta, residual });
    }
    Ok(v)
}

fn start_vector(n: usize) -> Vec<Complex64> {
    // fixed and rich in every component so results are reproducible
    (0..n).map(|i| Complex64::new(1.0 + 0.3 * (1.7 * i as f64).sin(), 0.2 * (0.9 * i as f64).cos())).collect()
}

/// ‖(iβ − A)⁻¹‖ in the weighted norm, by power iteration on R♯R.
pub fn resolvent_norm(gen: &Generator, beta: f64) -> ResolventSample {
    let fail = |iterations| ResolventSample { lambda: beta, norm_estimate: f64::INFINITY, iterations, converged: false };
    let fac = match Factored::new(gen, beta) {
        Ok(f) => f,
        Err(_) => return fail(0),
    };
    let mut x = start_vector(gen.dim());
    let mut est = 0.0;
    for it in 1..=NORM_ITERATIONS {
        let nx = fac.norm(&x);
        x.iter_mut().for_each(|z| *z /= nx);
        let y = match fac.apply(&x) {
            Ok(y) => y,
            Err(_) => return fail(it),
        };
        let next = fac.norm(&y);
        if is_pole(next, beta) {
            return ResolventSample { lambda: beta, norm_estimate: next, iterations: it, converged: false };
        }
        let change = (next - est).abs() / next;
        est = next;
        if change < NORM_REL_TOL {
            return ResolventSample { lambda: beta, norm_estimate: est, iterations: it, converged: true };
        }
        x = match fac.apply_adjoint(&y) {
            Ok(z) => z,
            Err(_) => return fail(it),
        };
    }
    ResolventSample { lambda: fac.beta, norm_estimate: est, iterations: NORM_ITERATIONS, converged: false }
}

/// Eigenvalue of the discrete generator nearest iβ.
pub fn nearest_discrete_eigenvalue(gen: &Generator, beta: f64) -> Result<Complex64, ResolventError> {
    let (lambda, _, _) = gen.matrix.nearest_eigenpair(Complex64::new(0.0, beta), 1e-12, 40)?;
    Ok(lambda)
}

/// Peak of the scan, moved onto the frequency of the nearby discrete eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub scan_beta: f64,
    pub eigenvalue: Complex64,
    pub sample: ResolventSample,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub samples: Vec<ResolventSample>,
    /// Indices into `samples` of the local maxima.
    pub peak_index: Vec<usize>,
    pub peaks: Vec<Peak>,
    pub fit: Option<LinearFit>,
}

impl ScanResult {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn is_peak(&self, i: usize) -> bool {
        self.peak_index.binary_search(&i).is_ok()
    }
}

/// Log-spaced frequencies on `band` merged with Im λ_k of the continuous
/// spectrum that fall inside it.
pub fn scan_frequencies(params: &ModelParams, band: [f64; 2], n_log: usize) -> Result<Vec<f64>, ResolventError> {
    if !(band[0] > 0.0 && band[1] > band[0]) || n_log < 2 {
        return Err(ResolventError::Invalid(format!("band [{}, {}] with {n_log} points", band[0], band[1])));
    }
    let (l0, l1) = (band[0].ln(), band[1].ln());
    let mut betas: Vec<f64> = (0..n_log).map(|i| (l0 + (l1 - l0) * i as f64 / (n_log - 1) as f64).exp()).collect();
    // Im λ_k ≈ C0²(kπ)²
    let c0 = (2.0 - params.alpha) / 2.0;
    let k_max = ((band[1] / (c0 * c0)).sqrt() / std::f64::consts::PI).ceil() as i64 + 2;
    let run = compute_spectrum(params, 0, k_max.min(500))?;
    betas.extend(run.records.iter().map(|r| r.lambda.im).filter(|b| *b >= band[0] && *b <= band[1]));
    betas.sort_by(f64::total_cmp);
    betas.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    Ok(betas)
}

/// Scans the resolvent norm over `betas`, snaps each local maximum to the
/// nearby discrete eigenvalue, and fits the log-log slope of the peak
/// envelope over `fit_band`.
pub fn scan_and_fit(gen: &Generator, betas: &[f64], fit_band: [f64; 2]) -> Result<ScanResult, ResolventError> {
    let samples: Vec<ResolventSample> = betas.par_iter().map(|&b| resolvent_norm(gen, b)).collect();
    let n = samples.len();
    let peak_index: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = samples[i].norm_estimate;
            (i == 0 || v > samples[i - 1].norm_estimate) && (i + 1 == n || v >= samples[i + 1].norm_estimate)
        })
        .collect();
    let snapped: Vec<Result<Peak, ResolventError>> = peak_index
        .par_iter()
        .map(|&i| {
            let b = samples[i].lambda;
            let ev = nearest_discrete_eigenvalue(gen, b)?;
            // keep the raw sample if the nearest eigenvalue is not this peak's
            let sample = if (ev.im - b).abs() < 0.5 * b.abs().max(1.0) {
                let s = resolvent_norm(gen, ev.im);
                if s.norm_estimate >= samples[i].norm_estimate { s } else { samples[i] }
            } else {
                samples[i]
            };
            Ok(Peak { scan_beta: b, eigenvalue: ev, sample })
        })
        .collect();
    let mut peaks: Vec<Peak> = snapped.into_iter().collect::<Result<_, _>>()?;
    peaks.dedup_by(|a, b| (a.eigenvalue - b.eigenvalue).norm() <= 1e-9 * b.eigenvalue.norm().max(1.0));
    let in_band: Vec<&Peak> = peaks
        .iter()
        .filter(|p| p.sample.lambda >= fit_band[0] && p.sample.lambda <= fit_band[1] && p.sample.norm_estimate.is_finite())
        .collect();
    let fit = if in_band.len() >= 5 {
        let x: Vec<f64> = in_band.iter().map(|p| p.sample.lambda.ln()).collect();
        let y: Vec<f64> = in_band.iter().map(|p| p.sample.norm_estimate.ln()).collect();
        linear_fit(&x, &y)
    } else {
        return Err(ResolventError::TooFewPeaks { found: in_band.len() });
    };
    Ok(ScanResult { samples, peak_index, peaks, fit })
}

/// Frequency of the probe point λ_k⁰: the imaginary part of the large-k
/// eigenvalue expansion. Only meaningful below the threshold.
pub fn probe_frequency(params: &ModelParams, k: i64) -> Option<f64> {
    match classify(params).0 {
        CaseTag::MiddleBand | CaseTag::BelowNu => Some(asymptotic_lambda(params, k).0.im),
        _ => None,
    }
}
