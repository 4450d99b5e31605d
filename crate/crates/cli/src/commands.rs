use crate::config::RunConfig;
use num_complex::Complex64;
use schrolab::checks::{run_all, SuiteConfig};
use schrolab::diffusive::{build_xi_grid, DiffusiveGrid};
use schrolab::pde::{
    assemble_generator, build_spatial_grid, fit_decay, initial_profile, remove_mode_near, simulate, transient_excluded_window,
    DecayFit, DecayModel, Generator,
};
use schrolab::resolvent::{scan_and_fit, scan_frequencies};
use schrolab::spectrum::compute_spectrum;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest per-step relative energy increase still counted as monotone.
const MONOTONE_TOL: f64 = 1e-12;

pub enum Outcome {
    Success,
    NumericalFailure(String),
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("{0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CommandError {
    fn num(e: impl std::fmt::Display) -> Self {
        CommandError::Numerical(e.to_string())
    }
}

fn header(cmd: &str, cfg: &RunConfig) -> String {
    format!("# schrolab {VERSION} {cmd} {}", cfg.param_line())
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), CommandError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| CommandError::Io { path, source })
}

#[derive(Serialize)]
struct ParamsJson {
    alpha: f64,
    alpha_tilde: f64,
    eta: f64,
    rho: f64,
}

fn params_json(cfg: &RunConfig) -> ParamsJson {
    let p = cfg.params;
    ParamsJson { alpha: p.alpha, alpha_tilde: p.alpha_tilde, eta: p.eta, rho: p.rho }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes") + "\n"
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<Outcome, CommandError> {
    let run = compute_spectrum(&cfg.params, cfg.k_min, cfg.k_max).map_err(CommandError::num)?;
    let mut s = header("spectrum", cfg) + "\n";
    s += "k,gamma_re,gamma_im,lambda_re,lambda_im,residual,iterations,case\n";
    let mut g = header("asym_gap", cfg) + "\n";
    g += "k,lambda_re,lambda_im,asym_re,asym_im,rel_gap,case,at_boundary\n";
    for r in &run.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.k,
            num(r.gamma.re),
            num(r.gamma.im),
            num(r.lambda.re),
            num(r.lambda.im),
            num(r.residual),
            r.iterations,
            r.case_tag
        );
        let _ = writeln!(
            g,
            "{},{},{},{},{},{},{},{}",
            r.k,
            num(r.lambda.re),
            num(r.lambda.im),
            num(r.lambda_asym.re),
            num(r.lambda_asym.im),
            num(r.rel_gap()),
            r.case_tag,
            r.boundary
        );
    }
    write_file(out, "spectrum.csv", &s)?;
    write_file(out, "asym_gap.csv", &g)?;
    if run.lost.is_empty() && run.collisions.is_empty() {
        Ok(Outcome::Success)
    } else {
        let mut msg = String::new();
        for e in &run.lost {
            let _ = writeln!(msg, "lost root: {e}");
        }
        for (a, b) in &run.collisions {
            let _ = writeln!(msg, "roots {a} and {b} collide");
        }
        Ok(Outcome::NumericalFailure(msg.trim_end().to_string()))
    }
}

/// Diffusive grid for a generator whose kernel is sampled up to |λ| ≈ `lambda_max`.
fn memory_grid(cfg: &RunConfig, lambda_max: f64) -> Result<Option<DiffusiveGrid>, CommandError> {
    let p = &cfg.params;
    if p.direct_damping() || p.zeta() == 0.0 {
        return Ok(None);
    }
    build_xi_grid(p, cfg.n_modes, [1e-2, lambda_max.max(1e3)]).map(Some).map_err(CommandError::num)
}

fn generator(cfg: &RunConfig, lambda_max: f64) -> Result<Generator, CommandError> {
    let grid = build_spatial_grid(cfg.params.alpha, cfg.n_cells).map_err(CommandError::num)?;
    let dgrid = memory_grid(cfg, lambda_max)?;
    assemble_generator(&grid, dgrid.as_ref(), &cfg.params).map_err(CommandError::num)
}

#[derive(Serialize)]
struct FitJson {
    model: &'static str,
    exponent: f64,
    r2: f64,
    window: [f64; 2],
    samples: usize,
}

impl From<DecayFit> for FitJson {
    fn from(f: DecayFit) -> Self {
        let model = match f.model {
            DecayModel::Polynomial => "polynomial",
            DecayModel::Exponential => "exponential",
        };
        FitJson { model, exponent: f.rate, r2: f.r2, window: [f.window.0, f.window.1], samples: f.samples }
    }
}

#[derive(Serialize)]
struct SimulateJson {
    version: &'static str,
    params: ParamsJson,
    n_cells: usize,
    n_modes: usize,
    dt: f64,
    t_end: f64,
    conserved: bool,
    slow_mode_removed: Option<[f64; 2]>,
    max_balance_residual: f64,
    max_increase: f64,
    /// The better of the two fits by R², if any fit was made.
    preferred: Option<&'static str>,
    polynomial: Option<FitJson>,
    exponential: Option<FitJson>,
    note: Option<String>,
}

pub fn simulate_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome, CommandError> {
    let gen = generator(cfg, 100.0 / cfg.dt)?;
    let mut v0 = initial_profile(&gen.grid, cfg.profile).map_err(CommandError::num)?;
    let mut slow = None;
    if cfg.remove_slow_mode {
        let (lambda, v) = remove_mode_near(&gen, &v0, Complex64::new(0.0, 0.0)).map_err(CommandError::num)?;
        slow = Some([lambda.re, lambda.im]);
        v0 = v;
    }
    let res = simulate(&gen, &v0, cfg.t_end, cfg.dt, cfg.stride).map_err(CommandError::num)?;
    let trace = &res.trace;
    let conserved = cfg.params.rho == 0.0;
    let window = cfg.window.unwrap_or_else(|| transient_excluded_window(trace));
    let (mut poly, mut expo, mut note) = (None, None, None);
    if conserved {
        note = Some("rho = 0: energy is conserved, no decay fit".to_string());
    } else {
        match (fit_decay(trace, DecayModel::Polynomial, window), fit_decay(trace, DecayModel::Exponential, window)) {
            (Ok(p), Ok(e)) => {
                poly = Some(p);
                expo = Some(e);
            }
            (Err(e), _) | (_, Err(e)) => note = Some(format!("fit declined: {e}")),
        }
    }
    let preferred = match (poly, expo) {
        (Some(p), Some(e)) => Some(if p.r2 >= e.r2 { "polynomial" } else { "exponential" }),
        _ => None,
    };
    let best = match preferred {
        Some("polynomial") => poly,
        Some(_) => expo,
        None => None,
    };

    let mut s = header("simulate", cfg) + "\n";
    s += "t,E,D,E_fit_residual\n";
    for smp in &trace.samples {
        let resid = match best {
            Some(f) if smp.t >= f.window.0 && smp.t <= f.window.1 && smp.t > 0.0 && smp.energy > 0.0 => {
                num(smp.energy.ln() - (f.intercept + f.rate * f.model.abscissa(smp.t)))
            }
            _ => "nan".to_string(),
        };
        let _ = writeln!(s, "{},{},{},{}", num(smp.t), num(smp.energy), num(smp.dissipation), resid);
    }
    write_file(out, "trace.csv", &s)?;
    let json = SimulateJson {
        version: VERSION,
        params: params_json(cfg),
        n_cells: cfg.n_cells,
        n_modes: gen.matrix.n_modes(),
        dt: cfg.dt,
        t_end: cfg.t_end,
        conserved,
        slow_mode_removed: slow,
        max_balance_residual: trace.max_balance_residual,
        max_increase: trace.max_increase,
        preferred,
        polynomial: poly.map(FitJson::from),
        exponential: expo.map(FitJson::from),
        note,
    };
    write_file(out, "fit.json", &to_json(&json))?;
    if !trace.monotone(MONOTONE_TOL) {
        return Ok(Outcome::NumericalFailure(format!("energy increased by {:.3e} of E0 in one step", trace.max_increase)));
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct PeakJson {
    beta: f64,
    eigenvalue: [f64; 2],
    norm: f64,
    converged: bool,
}

#[derive(Serialize)]
struct SlopeJson {
    version: &'static str,
    params: ParamsJson,
    n_cells: usize,
    n_modes: usize,
    band: [f64; 2],
    slope: Option<f64>,
    r2: Option<f64>,
    /// max(ν_α − α̃ + 1/2, 0).
    expected: f64,
    nonconverged: usize,
    peaks: Vec<PeakJson>,
}

pub fn resolvent_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome, CommandError> {
    let band = cfg.beta_band;
    let gen = generator(cfg, 100.0 * band[1])?;
    let betas = scan_frequencies(&cfg.params, band, cfg.n_beta).map_err(CommandError::num)?;
    let scan = scan_and_fit(&gen, &betas, band).map_err(CommandError::num)?;
    let mut s = header("resolvent", cfg) + "\n";
    s += "beta,norm,converged,is_peak\n";
    for (i, smp) in scan.samples.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", num(smp.lambda), num(smp.norm_estimate), smp.converged as u8, scan.is_peak(i) as u8);
    }
    write_file(out, "scan.csv", &s)?;
    let json = SlopeJson {
        version: VERSION,
        params: params_json(cfg),
        n_cells: cfg.n_cells,
        n_modes: gen.matrix.n_modes(),
        band,
        slope: scan.slope(),
        r2: scan.fit.map(|f| f.r2),
        expected: cfg.params.resolvent_exponent().max(0.0),
        nonconverged: scan.samples.iter().filter(|s| !s.converged).count(),
        peaks: scan
            .peaks
            .iter()
            .map(|p| PeakJson {
                beta: p.sample.lambda,
                eigenvalue: [p.eigenvalue.re, p.eigenvalue.im],
                norm: p.sample.norm_estimate,
                converged: p.sample.converged,
            })
            .collect(),
    };
    write_file(out, "slope.json", &to_json(&json))?;
    Ok(Outcome::Success)
}

pub fn verify(cfg: &RunConfig) -> (bool, String) {
    let suite = SuiteConfig { n_modes: if cfg.raw.contains_key("n_modes") { cfg.n_modes } else { 200 }, seed: cfg.seed, embedding_trials: cfg.embedding_trials };
    let results = run_all(&suite);
    let mut table = String::new();
    for r in &results {
        let _ = writeln!(table, "{r}");
    }
    (results.iter().all(|r| r.passed), table)
}
