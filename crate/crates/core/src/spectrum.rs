//! Eigenvalues from the Bessel characteristic equation and their
//! large-index asymptotics.

use crate::bessel::{bessel_j, leading_coefficient, BesselError, BesselOrder};
use crate::params::ModelParams;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error(transparent)]
    Bessel(#[from] BesselError),
    #[error("degenerate row {row} in the characteristic matrix")]
    DegenerateRow { row: usize },
    #[error("gamma = 0 is excluded")]
    ZeroGamma,
    #[error("root lost for k = {k}: {reason}; iterates {trace:?}")]
    RootLost { k: i64, reason: String, trace: Vec<Complex64> },
    #[error("invalid index range [{k_min}, {k_max}]")]
    InvalidRange { k_min: i64, k_max: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    AlphaTildeOne,
    AboveThreshold,
    MiddleBand,
    BelowNu,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::AlphaTildeOne => "alpha_tilde_one",
            CaseTag::AboveThreshold => "above_threshold",
            CaseTag::MiddleBand => "middle_band",
            CaseTag::BelowNu => "below_nu",
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenRecord {
    pub k: i64,
    pub gamma: Complex64,
    pub lambda: Complex64,
    /// |char_fn| at the accepted root.
    pub residual: f64,
    pub lambda_asym: Complex64,
    pub case_tag: CaseTag,
    /// α̃ sits exactly on a regime boundary.
    pub boundary: bool,
    pub iterations: usize,
}

impl EigenRecord {
    pub fn rel_gap(&self) -> f64 {
        (self.lambda - self.lambda_asym).norm() / self.lambda.norm()
    }
}

/// Constants of the large-index expansions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// The phase factor written (−i)^{3α̃}, taken as ((−i)³)^{α̃} = e^{iπα̃/2}.
    pub phase: Complex64,
}

pub type Matrix2 = [[Complex64; 2]; 2];

fn bessel_arg(params: &ModelParams, gamma: Complex64) -> Complex64 {
    I * gamma * (2.0 / (2.0 - params.alpha))
}

/// The 2×2 boundary matrix whose determinant vanishes at eigenvalues λ = −iγ².
pub fn char_matrix(params: &ModelParams, gamma: Complex64) -> Result<Matrix2, SpectrumError> {
    if gamma.norm() == 0.0 {
        return Err(SpectrumError::ZeroGamma);
    }
    let nu = params.nu();
    let order = BesselOrder::new(nu);
    let z = bessel_arg(params, gamma);
    let lambda = -I * gamma * gamma;
    let d_plus = z.powf(nu) * leading_coefficient(nu, 1.0);
    let d_minus = z.powf(-nu) * leading_coefficient(nu, -1.0);
    let feedback = if params.direct_damping() {
        Complex64::new(1.0, 0.0)
    } else {
        (lambda + params.eta).powf(params.alpha_tilde - 1.0)
    };
    let a = 1.0 - params.alpha;
    Ok([
        [d_plus * a, -I * params.rho * feedback * d_minus],
        [
            bessel_j(order, z)? * a - I * gamma * bessel_j(order.shift(1), z)?,
            -I * gamma * bessel_j(order.negate().shift(1), z)?,
        ],
    ])
}

fn det(m: &Matrix2) -> Complex64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn row_scales(m: &Matrix2) -> Result<[f64; 2], SpectrumError> {
    let mut s = [0.0; 2];
    for (r, row) in m.iter().enumerate() {
        s[r] = row[0].norm().max(row[1].norm());
        if s[r] < 1e-300 {
            return Err(SpectrumError::DegenerateRow { row: r });
        }
    }
    Ok(s)
}

/// Unscaled determinant of [`char_matrix`].
pub fn raw_det(params: &ModelParams, gamma: Complex64) -> Result<Complex64, SpectrumError> {
    Ok(det(&char_matrix(params, gamma)?))
}

/// Determinant after dividing each row by its largest entry modulus.
pub fn char_fn(params: &ModelParams, gamma: Complex64) -> Result<Complex64, SpectrumError> {
    let m = char_matrix(params, gamma)?;
    let s = row_scales(&m)?;
    Ok(det(&m) / (s[0] * s[1]))
}

/// γ_k⁰ = −((2−α)/2) i (k − ν/2 + 5/4) π; index 0 is the lowest mode.
pub fn seed_root(params: &ModelParams, k: i64) -> Complex64 {
    let c = -(2.0 - params.alpha) / 2.0 * (k as f64 - params.nu() / 2.0 + 1.25) * PI;
    Complex64::new(0.0, c)
}

/// Radius 1/k^ν of the localization ball around γ_k⁰ (1 for k = 0).
pub fn seed_radius(params: &ModelParams, k: i64) -> f64 {
    if k == 0 {
        1.0
    } else {
        (k.unsigned_abs() as f64).powf(-params.nu())
    }
}

/// Newton iteration on [`char_fn`] from `seed`. The row scales are frozen at
/// each iterate so the differenced function stays analytic.
pub fn refine_root(params: &ModelParams, seed: Complex64, k: i64) -> Result<EigenRecord, SpectrumError> {
    let radius = seed_radius(params, k);
    let mut gamma = seed;
    let mut trace = vec![seed];
    let lost = |reason: String, trace: &[Complex64]| SpectrumError::RootLost { k, reason, trace: trace.to_vec() };
    for it in 1..=NEWTON_MAX_ITER {
        let m = char_matrix(params, gamma)?;
        let s = row_scales(&m)?;
        let scale = s[0] * s[1];
        let f = det(&m) / scale;
        let h = 1e-6 * gamma.norm().max(1.0);
        let fp = (raw_det(params, gamma + h)? - raw_det(params, gamma - h)?) / (2.0 * h * scale);
        if !(fp.norm() > 0.0) {
            return Err(lost("vanishing derivative".into(), &trace));
        }
        let step = f / fp;
        gamma -= step;
        trace.push(gamma);
        if !gamma.re.is_finite() || !gamma.im.is_finite() {
            return Err(lost("non-finite iterate".into(), &trace));
        }
        if (gamma - seed).norm() > 2.0 * radius {
            return Err(lost(format!("left the ball of radius {:.3e}", 2.0 * radius), &trace));
        }
        let residual = char_fn(params, gamma)?.norm();
        if step.norm() < 1e-12 * gamma.norm() || residual < 1e-10 {
            // one extra step once the tolerance is met polishes the root cheaply
            let polished = {
                let fp = (raw_det(params, gamma + h)? - raw_det(params, gamma - h)?) / (2.0 * h);
                gamma - raw_det(params, gamma)? / fp
            };
            let pres = char_fn(params, polished)?.norm();
            let (gamma, residual) = if pres <= residual { (polished, pres) } else { (gamma, residual) };
            let (lambda_asym, case_tag, boundary) = asymptotic_lambda(params, k.max(1));
            return Ok(EigenRecord {
                k,
                gamma,
                lambda: -I * gamma * gamma,
                residual,
                lambda_asym,
                case_tag,
                boundary,
                iterations: it,
            });
        }
    }
    Err(lost(format!("no convergence in {NEWTON_MAX_ITER} iterations"), &trace))
}

pub fn case_constants(params: &ModelParams) -> CaseConstants {
    let nu = params.nu();
    let a = params.alpha;
    let c0 = -(2.0 - a) / 2.0;
    let c1 = c0 * (-nu / 2.0 + 1.25);
    let ratio = leading_coefficient(nu, -1.0) / leading_coefficient(nu, 1.0);
    let gain = params.rho * (2.0 - a) / (2.0 * (1.0 - a)) * ratio;
    let fractional_gain = gain * (2.0 / (2.0 - a)).powf(2.0 - 2.0 * params.alpha_tilde);
    let mcmahon = (2.0 - a) / 4.0 * (0.5 - nu) * (1.5 - nu);
    let phase = Complex64::from_polar(1.0, PI * params.alpha_tilde / 2.0);
    match classify(params).0 {
        CaseTag::AlphaTildeOne => CaseConstants { c0, c1, c2: gain, c3: mcmahon, c4: 0.0, phase },
        CaseTag::AboveThreshold | CaseTag::MiddleBand => {
            CaseConstants { c0, c1, c2: fractional_gain, c3: mcmahon, c4: 0.0, phase }
        }
        // the below-ν expansion relabels its constants and its C3 coincides with C1
        CaseTag::BelowNu => CaseConstants { c0, c1, c2: mcmahon, c3: c1, c4: fractional_gain, phase },
    }
}

/// Regime of α̃ relative to ν_α and the threshold (4−3α)/(2(2−α)).
pub fn classify(params: &ModelParams) -> (CaseTag, bool) {
    let at = params.alpha_tilde;
    let nu = params.nu();
    let thr = params.threshold();
    if params.direct_damping() {
        (CaseTag::AlphaTildeOne, false)
    } else if at > thr {
        (CaseTag::AboveThreshold, false)
    } else if at > nu {
        (CaseTag::MiddleBand, at == thr)
    } else if at < nu {
        (CaseTag::BelowNu, false)
    } else {
        (CaseTag::MiddleBand, true)
    }
}

/// Leading-order large-k eigenvalue for the regime of `params`.
pub fn asymptotic_lambda(params: &ModelParams, k: i64) -> (Complex64, CaseTag, bool) {
    let (tag, boundary) = classify(params);
    let c = case_constants(params);
    let nu = params.nu();
    let at = params.alpha_tilde;
    let kf = k as f64;
    let kp = kf * PI;
    let sn = (nu * PI).sin();
    let base = c.c0 * c.c0 * kp * kp + 2.0 * c.c0 * c.c1 * kf * PI * PI;
    let damped = |gain: f64| -2.0 * I * c.c0 * gain * c.phase * sn / kp.powf(2.0 * nu - 2.0 * at + 1.0);
    let lambda = match tag {
        CaseTag::AlphaTildeOne => I * base + 2.0 * c.c0 * c.c2 * sn / kp.powf(2.0 * nu - 1.0),
        CaseTag::AboveThreshold => I * base + damped(c.c2),
        CaseTag::MiddleBand => I * (base + c.c1 * c.c1 * PI * PI + 2.0 * c.c0 * c.c3) + damped(c.c2),
        CaseTag::BelowNu => {
            // no 1/k term: the Bessel zero expansion has none, and the exact
            // roots confirm it to four digits
            let im = base + c.c1 * c.c1 * PI * PI + 2.0 * c.c0 * c.c2;
            I * im + damped(c.c4)
        }
    };
    (lambda, tag, boundary)
}

/// Outcome of a batch run; failed indices are reported next to the roots found.
#[derive(Debug, Clone, Default)]
pub struct SpectrumRun {
    pub records: Vec<EigenRecord>,
    pub lost: Vec<SpectrumError>,
    /// Index pairs whose roots are closer than half a ball radius.
    pub collisions: Vec<(i64, i64)>,
}

pub fn compute_spectrum(params: &ModelParams, k_min: i64, k_max: i64) -> Result<SpectrumRun, SpectrumError> {
    if k_min < 0 || k_max < k_min || k_max > 500 {
        return Err(SpectrumError::InvalidRange { k_min, k_max });
    }
    let results: Vec<Result<EigenRecord, SpectrumError>> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| refine_root(params, seed_root(params, k), k))
        .collect();
    let mut run = SpectrumRun::default();
    for r in results {
        match r {
            Ok(rec) => run.records.push(rec),
            Err(e) => run.lost.push(e),
        }
    }
    for w in run.records.windows(2) {
        let half = 0.5 * seed_radius(params, w[0].k).min(seed_radius(params, w[1].k));
        if (w[0].gamma - w[1].gamma).norm() <= half {
            run.collisions.push((w[0].k, w[1].k));
        }
    }
    Ok(run)
}

/// Local minima of |raw det| along γ = −it for t in [t_min, t_max], each
/// refined by golden-section search. Returns (t, |D(t)|) pairs.
pub fn det_lower_envelope(params: &ModelParams, t_min: f64, t_max: f64) -> Result<Vec<(f64, f64)>, SpectrumError> {
    let g = |t: f64| raw_det(params, Complex64::new(0.0, -t)).map(|d| d.norm());
    // zeros of the Bessel factors are π(2−α)/2 apart in t
    let period = PI * (2.0 - params.alpha) / 2.0;
    let n = ((t_max - t_min) / period * 64.0).ceil() as usize + 1;
    let ts: Vec<f64> = (0..n).map(|i| t_min + (t_max - t_min) * i as f64 / (n - 1) as f64).collect();
    let vals: Result<Vec<f64>, _> = ts.par_iter().map(|&t| g(t)).collect();
    let vals = vals?;
    let mut out = Vec::new();
    for i in 1..n - 1 {
        if vals[i] < vals[i - 1] && vals[i] <= vals[i + 1] {
            let (mut a, mut b) = (ts[i - 1], ts[i + 1]);
            let r = (5f64.sqrt() - 1.0) / 2.0;
            let mut c = b - r * (b - a);
            let mut d = a + r * (b - a);
            let (mut fc, mut fd) = (g(c)?, g(d)?);
            for _ in 0..60 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - r * (b - a);
                    fc = g(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + r * (b - a);
                    fd = g(d)?;
                }
                if b - a < 1e-12 * b {
                    break;
                }
            }
            let t = 0.5 * (a + b);
            out.push((t, g(t)?));
        }
    }
    Ok(out)
}
