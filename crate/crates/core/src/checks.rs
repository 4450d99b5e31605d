//! Invariant suites shared by the `verify` command and the test harness.
//! Each check returns a measured quantity next to the bound it must meet.

use crate::bessel::{bessel_j, nu_alpha, BesselError, BesselOrder};
use crate::diffusive::{
    build_xi_grid_with_tol, diffusive_pipeline, fractional_integral_strided, DiffusiveError, CERT_TOL,
};
use crate::fit::loglog_fit;
use crate::params::ModelParams;
use crate::pde::{assemble_generator, build_spatial_grid, embedding_check, initial_profile, simulate, PdeError, Profile, SimulationResult};
use crate::quadrature::integrate;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Bessel(#[from] BesselError),
    #[error(transparent)]
    Diffusive(#[from] DiffusiveError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Param(#[from] crate::params::ParamError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub key: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn below(key: &'static str, measured: f64, bound: f64, detail: String) -> Self {
        Self { key, passed: measured <= bound, measured, bound, detail }
    }

    /// Outcome for a check that could not run at all.
    pub fn errored(key: &'static str, err: &dyn std::error::Error) -> Self {
        Self { key, passed: false, measured: f64::NAN, bound: f64::NAN, detail: format!("error: {err}") }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{}: {verdict} (measured {:.3e}, bound {:.3e}", self.key, self.measured, self.bound)?;
        if !self.detail.is_empty() {
            write!(f, "; {}", self.detail)?;
        }
        write!(f, ")")
    }
}

/// Settings of the full suite. `n_modes` drives the kernel-grid check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub n_modes: usize,
    pub seed: u64,
    pub embedding_trials: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { n_modes: 200, seed: 0, embedding_trials: 1000 }
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Orders ν_α for α = 0.1, ..., 0.9.
fn identity_orders() -> Vec<f64> {
    (1..=9).map(|i| nu_alpha(0.1 * i as f64)).collect()
}

/// 20 log-spaced points on [0.5, 100].
fn identity_points() -> Vec<f64> {
    (0..20).map(|i| 0.5 * 200f64.powf(i as f64 / 19.0)).collect()
}

fn j(nu: f64, z: f64) -> Result<Complex64, BesselError> {
    bessel_j(BesselOrder::new(nu), c(z))
}

/// Five-point central difference at h = 1e−5|z|. The three-point rule with
/// that step has truncation error ~1e−6 at |z| = 100.
fn derivative(nu: f64, z: f64) -> Result<Complex64, BesselError> {
    let h = 1e-5 * z;
    let f = |s: f64| j(nu, z + s * h);
    Ok((f(-2.0)? - f(2.0)? + (f(1.0)? - f(-1.0)?) * 8.0) / (12.0 * h))
}

/// |z J' − (ν J − z J_{ν+1})| / (1 + |J|) with J' by finite differences.
pub fn bessel_derivative_identity() -> Result<CheckOutcome, CheckError> {
    let mut worst = (0.0, 0.0, 0.0);
    for nu in identity_orders() {
        for z in identity_points() {
            let jv = j(nu, z)?;
            let lhs = derivative(nu, z)? * z;
            let rhs = jv * nu - j(nu + 1.0, z)? * z;
            let e = (lhs - rhs).norm() / (1.0 + jv.norm());
            if e > worst.0 {
                worst = (e, nu, z);
            }
        }
    }
    Ok(CheckOutcome::below("bessel-derivative-identity", worst.0, 1e-8, format!("worst at nu={:.4}, z={:.3}", worst.1, worst.2)))
}

/// J_{ν−1} + J_{ν+1} = (2ν/z) J_ν, relative to the largest of the three terms.
pub fn bessel_recurrence() -> Result<CheckOutcome, CheckError> {
    let mut worst = (0.0, 0.0, 0.0);
    for nu in identity_orders() {
        let o = BesselOrder::new(nu);
        for z in identity_points() {
            let a = bessel_j(o.shift(-1), c(z))?;
            let b = bessel_j(o.shift(1), c(z))?;
            let m = bessel_j(o, c(z))? * (2.0 * nu / z);
            let e = (a + b - m).norm() / a.norm().max(b.norm()).max(m.norm());
            if e > worst.0 {
                worst = (e, nu, z);
            }
        }
    }
    Ok(CheckOutcome::below("bessel-recurrence", worst.0, 1e-8, format!("worst at nu={:.4}, z={:.3}", worst.1, worst.2)))
}

/// J_ν J'_{−ν} − J'_ν J_{−ν} = −2 sin(νπ)/(πz), derivatives from the
/// identity z J'_μ = μ J_μ − z J_{μ+1}.
pub fn bessel_wronskian() -> Result<CheckOutcome, CheckError> {
    let mut worst = (0.0, 0.0, 0.0);
    for nu in identity_orders() {
        let o = BesselOrder::new(nu);
        let m = o.negate();
        for z in identity_points() {
            let zc = c(z);
            let (jp, jm) = (bessel_j(o, zc)?, bessel_j(m, zc)?);
            let dp = (jp * nu - bessel_j(o.shift(1), zc)? * z) / z;
            let dm = (jm * (-nu) - bessel_j(m.shift(1), zc)? * z) / z;
            let w = jp * dm - dp * jm;
            let exact = -2.0 * (nu * PI).sin() / (PI * z);
            let e = (w - exact).norm() / exact.abs();
            if e > worst.0 {
                worst = (e, nu, z);
            }
        }
    }
    Ok(CheckOutcome::below("bessel-wronskian", worst.0, 1e-7, format!("worst at nu={:.4}, z={:.3}", worst.1, worst.2)))
}

/// J_{±1/2} and J_{3/2} against their elementary forms, scaled by the
/// envelope √(2/(πz)).
pub fn bessel_half_integer() -> Result<CheckOutcome, CheckError> {
    let mut worst = 0.0f64;
    let points: Vec<f64> = (0..40).map(|i| 0.1 + 2.5 * i as f64).chain([PI / 2.0, PI, 13.99, 14.01]).collect();
    for z in points {
        let env = (2.0 / (PI * z)).sqrt();
        let cases = [
            (0.5, env * z.sin()),
            (-0.5, env * z.cos()),
            (1.5, env * (z.sin() / z - z.cos())),
        ];
        for (nu, exact) in cases {
            worst = worst.max((j(nu, z)? - exact).norm() / env);
        }
    }
    Ok(CheckOutcome::below("bessel-half-integer", worst, 1e-12, String::new()))
}

/// 2a² ∫₀ˣ t J_ν(at)² dt = (a²x² − ν²) J_ν(ax)² + (x d/dx J_ν(ax))² at
/// x = 1, a ∈ {1, 5}, ν = ν_α(0.5).
pub fn bessel_integral_identity() -> Result<CheckOutcome, CheckError> {
    let nu = nu_alpha(0.5);
    let o = BesselOrder::new(nu);
    let mut worst = 0.0f64;
    for a in [1.0, 5.0] {
        let x = 1.0;
        let q = integrate(|t| bessel_j(o, c(a * t)).map(|v| v * v * t).unwrap_or(c(f64::NAN)), 0.0, x, 1e-15, 1e-13);
        let lhs = q.value * (2.0 * a * a);
        let jx = bessel_j(o, c(a * x))?;
        // x d/dx J_ν(ax) = ν J_ν(ax) − ax J_{ν+1}(ax)
        let xd = jx * nu - bessel_j(o.shift(1), c(a * x))? * (a * x);
        let rhs = jx * jx * (a * a * x * x - nu * nu) + xd * xd;
        worst = worst.max((lhs - rhs).norm() / rhs.norm());
    }
    Ok(CheckOutcome::below("bessel-integral-identity", worst, 1e-6, String::new()))
}

/// ‖θ₊‖_{L²(0,1)} with θ₊(x) = x^{(1−α)/2} J_ν(2μ x^{(2−α)/2}/(2−α)).
pub fn theta_plus_norm(alpha: f64, mu: f64) -> f64 {
    let nu = nu_alpha(alpha);
    let o = BesselOrder::new(nu);
    let k = 2.0 * mu / (2.0 - alpha);
    // sub-intervals of about one oscillation keep the quadrature cheap
    let pieces = (k / PI).ceil().max(1.0) as usize;
    let mut total = 0.0;
    for i in 0..pieces {
        let (a, b) = (i as f64 / pieces as f64, (i + 1) as f64 / pieces as f64);
        let q = integrate(
            |x| {
                let v = bessel_j(o, c(k * x.powf((2.0 - alpha) / 2.0))).unwrap_or(c(f64::NAN));
                c(x.powf(1.0 - alpha) * v.norm_sqr())
            },
            a,
            b,
            1e-14,
            1e-10,
        );
        total += q.value.re;
    }
    total.sqrt()
}

/// Log-log slope of ‖θ₊‖ over μ ∈ [10, 200], expected near −1/2.
pub fn theta_norm_scaling(alpha: f64) -> CheckOutcome {
    let mus: Vec<f64> = (0..12).map(|i| 10.0 * 20f64.powf(i as f64 / 11.0)).collect();
    let norms: Vec<f64> = mus.iter().map(|&m| theta_plus_norm(alpha, m)).collect();
    match loglog_fit(&mus, &norms) {
        Some(f) => CheckOutcome {
            key: "theta-norm-scaling",
            passed: (-0.6..=-0.4).contains(&f.slope),
            measured: f.slope,
            bound: -0.5,
            detail: "slope must lie in [-0.6, -0.4]".into(),
        },
        None => CheckOutcome {
            key: "theta-norm-scaling",
            passed: false,
            measured: f64::NAN,
            bound: -0.5,
            detail: "fit failed".into(),
        },
    }
}

/// Certification of the ξ-grid on 20 real and 10 imaginary λ in
/// [0.1, 100] for α̃ ∈ {0.25, 0.5, 0.75}, η ∈ {0.5, 1}.
pub fn kernel_integral_grid(n_modes: usize) -> Result<CheckOutcome, CheckError> {
    let mut worst = (0.0, 0.0, 0.0);
    for at in [0.25, 0.5, 0.75] {
        for eta in [0.5, 1.0] {
            let p = ModelParams::new(0.5, at, eta, 1.0)?;
            let g = build_xi_grid_with_tol(&p, n_modes, [0.1, 100.0], f64::INFINITY)?;
            if g.certified_error > worst.0 {
                worst = (g.certified_error, at, eta);
            }
        }
    }
    Ok(CheckOutcome::below(
        "kernel-integral-grid",
        worst.0,
        CERT_TOL,
        format!("{n_modes} nodes, worst at alpha_tilde={}, eta={}", worst.1, worst.2),
    ))
}

/// Sup-norm gap between the diffusive pipeline and a product-integration
/// evaluation of the fractional integral of sin t on [0, 10], the latter on
/// an 8× finer time grid.
pub fn realization_gap(params: &ModelParams, n_modes: usize, dt: f64, t_end: f64) -> Result<f64, CheckError> {
    let n = (t_end / dt).round() as usize;
    let grid = build_xi_grid_with_tol(params, n_modes, [1e-2, 100.0 / dt], CERT_TOL)?;
    let samples: Vec<Complex64> = (0..n).map(|j| c(((j as f64 + 0.5) * dt).sin())).collect();
    let out = diffusive_pipeline(&grid, &samples, dt, params);
    let fine = 8;
    let fdt = dt / fine as f64;
    let fsamples: Vec<Complex64> = (0..n * fine).map(|j| c(((j as f64 + 0.5) * fdt).sin())).collect();
    let oracle = fractional_integral_strided(&fsamples, fdt, params, fine);
    Ok(out.iter().zip(&oracle).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

/// Gap below 1e−3 at (400 modes, dt = 1e−3), at least halved at (800, 5e−4).
pub fn diffusive_realization() -> Result<CheckOutcome, CheckError> {
    let p = ModelParams::new(0.5, 0.5, 1.0, 1.0)?;
    let coarse = realization_gap(&p, 400, 1e-3, 10.0)?;
    let fine = realization_gap(&p, 800, 5e-4, 10.0)?;
    let ratio = coarse / fine;
    Ok(CheckOutcome {
        key: "diffusive-realization",
        passed: coarse < 1e-3 && ratio >= 2.0,
        measured: coarse,
        bound: 1e-3,
        detail: format!("refined gap {fine:.3e}, ratio {ratio:.2} (needs >= 2)"),
    })
}

fn energy_run(rho: f64) -> Result<SimulationResult, CheckError> {
    let p = ModelParams::new(0.5, 0.5, 1.0, rho)?;
    let grid = build_spatial_grid(0.5, 200)?;
    let dgrid = build_xi_grid_with_tol(&p, 96, [1e-2, 1e7], CERT_TOL)?;
    let gen = assemble_generator(&grid, Some(&dgrid), &p)?;
    let v0 = initial_profile(&grid, Profile::Gaussian { center: 0.3, width: 0.1 })?;
    Ok(simulate(&gen, &v0, 1.0, 1e-3, 10)?)
}

/// Per-step |ΔE − dt·D̄| over E₀ on a damped run of 1000 steps.
pub fn energy_balance() -> Result<CheckOutcome, CheckError> {
    let r = energy_run(1.0)?;
    Ok(CheckOutcome::below(
        "energy-balance",
        r.trace.max_balance_residual,
        1e-8,
        format!("largest step increase {:.1e}", r.trace.max_increase),
    ))
}

/// Relative energy drift over 1000 undamped steps.
pub fn energy_conservation() -> Result<CheckOutcome, CheckError> {
    let r = energy_run(0.0)?;
    let e0 = r.trace.samples[0].energy;
    let drift = r.trace.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max) / e0;
    Ok(CheckOutcome::below("energy-conservation", drift, 1e-10, String::new()))
}

fn random_profile(rng: &mut ChaCha8Rng, x: &[f64], alpha: f64) -> Vec<Complex64> {
    match rng.gen_range(0..4) {
        // smooth trigonometric sums
        0 => {
            let terms = rng.gen_range(1..12);
            let coef: Vec<(f64, f64, f64)> =
                (0..terms).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))).collect();
            x.iter()
                .map(|&s| {
                    coef.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (k, &(a, b, ph))| {
                        let arg = (k as f64 + 1.0) * PI * s + ph;
                        acc + Complex64::new(a * arg.cos(), b * arg.sin())
                    })
                })
                .collect()
        }
        // profiles steepening at the degenerate end, where the bound is tight
        1 => {
            let p = rng.gen_range(1.0 - alpha + 1e-3..2.0);
            let s0 = rng.gen_range(0.0..1.0);
            x.iter().map(|&s| Complex64::new((1.0 - s.powf(p)).max(0.0) + s0, 0.0)).collect()
        }
        // tents of random width and position
        2 => {
            let (m, w) = (rng.gen_range(0.0..1.0), rng.gen_range(1e-3..1.0));
            x.iter().map(|&s| Complex64::new((1.0 - (s - m).abs() / w).max(0.0), 0.0)).collect()
        }
        // raw nodal noise
        _ => x.iter().map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
    }
}

/// sup|v| ≤ (1/√(1−α) + √2)‖v‖_{H¹_α} on random discrete profiles, for
/// α ∈ {0.25, 0.5, 0.75}. Measured is the largest sup|v| / bound.
pub fn embedding_constant(trials: usize, seed: u64) -> Result<CheckOutcome, CheckError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for alpha in [0.25, 0.5, 0.75] {
        let grid = build_spatial_grid(alpha, 256)?;
        let cst = 1.0 / (1.0 - alpha).sqrt() + 2f64.sqrt();
        for _ in 0..trials {
            let v = random_profile(&mut rng, &grid.x, alpha);
            let bound = cst * grid.h1_norm_sq(&v).sqrt();
            if bound > 0.0 {
                let excess = embedding_check(&grid, &v);
                worst = worst.max((excess + bound) / bound);
            }
        }
    }
    Ok(CheckOutcome::below("embedding-constant", worst, 1.0, format!("{trials} trials per alpha")))
}

/// Every suite in a fixed order. A suite that errors is reported as failed.
pub fn run_all(cfg: &SuiteConfig) -> Vec<CheckOutcome> {
    let wrap = |key: &'static str, r: Result<CheckOutcome, CheckError>| r.unwrap_or_else(|e| CheckOutcome::errored(key, &e));
    vec![
        wrap("bessel-derivative-identity", bessel_derivative_identity()),
        wrap("bessel-recurrence", bessel_recurrence()),
        wrap("bessel-wronskian", bessel_wronskian()),
        wrap("bessel-half-integer", bessel_half_integer()),
        wrap("bessel-integral-identity", bessel_integral_identity()),
        theta_norm_scaling(0.5),
        wrap("kernel-integral-grid", kernel_integral_grid(cfg.n_modes)),
        wrap("diffusive-realization", diffusive_realization()),
        wrap("energy-balance", energy_balance()),
        wrap("energy-conservation", energy_conservation()),
        wrap("embedding-constant", embedding_constant(cfg.embedding_trials, cfg.seed)),
    ]
}
