//! Finite-volume discretization of the damped degenerate Schrödinger system
//! and its Crank-Nicolson time integration.

use crate::bessel::{bessel_j, BesselOrder};
use crate::diffusive::DiffusiveGrid;
use crate::fit::linear_fit;
use crate::linalg::{ArrowLu, ArrowMatrix, LinalgError, Tridiagonal};
use crate::params::ModelParams;
use crate::spectrum::{refine_root, seed_root};
use num_complex::Complex64;
use thiserror::Error;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("fit window holds {0} samples, at least 10 are needed")]
    ShortWindow(usize),
}

/// Graded vertex mesh with lumped masses and face coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub alpha: f64,
    pub x: Vec<f64>,
    /// Lumped mass of each vertex; they sum to 1.
    pub mass: Vec<f64>,
    /// x^α at face midpoints.
    pub face_coef: Vec<f64>,
    /// Face lengths x_{i+1} − x_i.
    pub face_len: Vec<f64>,
}

impl SpatialGrid {
    pub fn n_nodes(&self) -> usize {
        self.x.len()
    }

    pub fn norm_sq(&self, v: &[Complex64]) -> f64 {
        v.iter().zip(&self.mass).map(|(z, m)| m * z.norm_sqr()).sum()
    }

    /// ‖v‖² + Σ a |Δv|²/h, the discrete weighted H¹ norm squared.
    pub fn h1_norm_sq(&self, v: &[Complex64]) -> f64 {
        let grad: f64 = (0..self.face_len.len())
            .map(|i| self.face_coef[i] * (v[i + 1] - v[i]).norm_sqr() / self.face_len[i])
            .sum();
        self.norm_sq(v) + grad
    }
}

/// Nodes x_i = (i/N)^{2/(2−α)}.
pub fn build_spatial_grid(alpha: f64, n_cells: usize) -> Result<SpatialGrid, PdeError> {
    if n_cells < 16 {
        return Err(PdeError::Invalid(format!("n_cells = {n_cells} < 16")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PdeError::Invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    let p = 2.0 / (2.0 - alpha);
    let x: Vec<f64> = (0..=n_cells).map(|i| (i as f64 / n_cells as f64).powf(p)).collect();
    let face_len: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let face_coef: Vec<f64> = x.windows(2).map(|w| (0.5 * (w[0] + w[1])).powf(alpha)).collect();
    let mut mass = vec![0.0; n_cells + 1];
    for (i, h) in face_len.iter().enumerate() {
        mass[i] += 0.5 * h;
        mass[i + 1] += 0.5 * h;
    }
    Ok(SpatialGrid { alpha, x, mass, face_coef, face_len })
}

/// Point of the orbit: v on the mesh and φ on the diffusive grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub v: Vec<Complex64>,
    pub phi: Vec<Complex64>,
    pub t: f64,
}

impl SystemState {
    pub fn flatten(&self) -> Vec<Complex64> {
        self.v.iter().chain(&self.phi).copied().collect()
    }

    pub fn from_flat(u: &[Complex64], n_space: usize, t: f64) -> Self {
        Self { v: u[..n_space].to_vec(), phi: u[n_space..].to_vec(), t }
    }
}

/// The discrete generator together with what is needed for its inner product.
#[derive(Debug, Clone)]
pub struct Generator {
    pub matrix: ArrowMatrix,
    pub grid: SpatialGrid,
    /// Modes actually coupled; empty in the direct damping mode or for ρ = 0.
    pub dgrid: Option<DiffusiveGrid>,
    pub params: ModelParams,
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Diagonal of the Gram matrix of ⟨·,·⟩_H: masses, then ζ w_j.
    pub fn gram(&self) -> Vec<f64> {
        let mut g = self.grid.mass.clone();
        if let Some(d) = &self.dgrid {
            let z = self.params.zeta();
            g.extend(d.weight.iter().map(|w| z * w));
        }
        g
    }

    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        self.gram().iter().zip(a.iter().zip(b)).map(|(g, (x, y))| x * y.conj() * *g).sum()
    }

    pub fn norm(&self, a: &[Complex64]) -> f64 {
        self.inner(a, a).re.max(0.0).sqrt()
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.matrix.apply(u)
    }

    /// The adjoint with respect to ⟨·,·⟩_H: G⁻¹ Aᴴ G.
    pub fn apply_adjoint(&self, u: &[Complex64]) -> Vec<Complex64> {
        let g = self.gram();
        let gu: Vec<Complex64> = u.iter().zip(&g).map(|(z, w)| z * w).collect();
        let y = self.matrix.conj_transpose().apply(&gu);
        y.iter().zip(&g).map(|(z, w)| z / w).collect()
    }

    pub fn zero_state(&self) -> SystemState {
        SystemState { v: vec![ZERO; self.grid.n_nodes()], phi: vec![ZERO; self.matrix.n_modes()], t: 0.0 }
    }
}

/// Assembles A on (v, φ): −i times the flux-form degenerate operator on v,
/// −(ξ²+η)φ + μ v(0) on the modes, with the boundary flux at x = 0 given by
/// the feedback and zero flux at x = 1.
pub fn assemble_generator(grid: &SpatialGrid, dgrid: Option<&DiffusiveGrid>, params: &ModelParams) -> Result<Generator, PdeError> {
    if (grid.alpha - params.alpha).abs() > 0.0 {
        return Err(PdeError::Dimension(format!("grid alpha {} differs from params alpha {}", grid.alpha, params.alpha)));
    }
    let n = grid.n_nodes();
    let mut lower = vec![ZERO; n - 1];
    let mut diag = vec![ZERO; n];
    let mut upper = vec![ZERO; n - 1];
    for f in 0..n - 1 {
        let k = grid.face_coef[f] / grid.face_len[f];
        // flux F = k (v_{f+1} − v_f) leaves node f and enters node f+1
        diag[f] += -I * (-k) / grid.mass[f];
        upper[f] += -I * k / grid.mass[f];
        diag[f + 1] += -I * (-k) / grid.mass[f + 1];
        lower[f] += -I * k / grid.mass[f + 1];
    }
    let zeta = params.zeta();
    let coupled = if params.direct_damping() || zeta == 0.0 { None } else { dgrid };
    if !params.direct_damping() && zeta > 0.0 && dgrid.is_none() {
        return Err(PdeError::Dimension("fractional damping needs a diffusive grid".into()));
    }
    let (mut row0, mut col0, mut modes) = (Vec::new(), Vec::new(), Vec::new());
    if params.direct_damping() {
        // boundary flux iρ v(0) enters node 0 with the sign of −F
        diag[0] += -params.rho / grid.mass[0];
    } else if let Some(d) = coupled {
        for j in 0..d.n_modes() {
            row0.push(Complex64::new(-zeta * d.weight[j] * d.mu[j] / grid.mass[0], 0.0));
            col0.push(Complex64::new(d.mu[j], 0.0));
            modes.push(Complex64::new(-(d.xi[j] * d.xi[j] + params.eta), 0.0));
        }
    }
    Ok(Generator {
        matrix: ArrowMatrix { tri: Tridiagonal { lower, diag, upper }, row0, col0, modes },
        grid: grid.clone(),
        dgrid: coupled.cloned(),
        params: *params,
    })
}

/// E = ½‖v‖² + (ζ/2) Σ w_j |φ_j|².
pub fn energy(gen: &Generator, state: &SystemState) -> f64 {
    let mut e = 0.5 * gen.grid.norm_sq(&state.v);
    if let Some(d) = &gen.dgrid {
        let z = gen.params.zeta();
        e += 0.5 * z * state.phi.iter().zip(&d.weight).map(|(p, w)| w * p.norm_sqr()).sum::<f64>();
    }
    e
}

/// dE/dt of the continuous-in-time semi-discrete system at `state`.
pub fn dissipation_rate(gen: &Generator, state: &SystemState) -> f64 {
    let p = &gen.params;
    if p.direct_damping() {
        return -p.rho * state.v[0].norm_sqr();
    }
    match &gen.dgrid {
        Some(d) => {
            -p.zeta()
                * (0..d.n_modes()).map(|j| d.weight[j] * (d.xi[j] * d.xi[j] + p.eta) * state.phi[j].norm_sqr()).sum::<f64>()
        }
        None => 0.0,
    }
}

/// Crank-Nicolson propagator with its factorization cached.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    pub dt: f64,
    lu: ArrowLu,
    explicit: ArrowMatrix,
}

impl CrankNicolson {
    pub fn new(gen: &Generator, dt: f64) -> Result<Self, PdeError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PdeError::Invalid(format!("dt = {dt} must be positive")));
        }
        let one = Complex64::new(1.0, 0.0);
        let h = Complex64::new(0.5 * dt, 0.0);
        Ok(Self { dt, lu: gen.matrix.shifted(one, h).factor()?, explicit: gen.matrix.shifted(one, -h) })
    }

    pub fn step(&self, state: &SystemState) -> Result<SystemState, PdeError> {
        let u = state.flatten();
        let rhs = self.explicit.apply(&u);
        let next = self.lu.solve(&rhs)?;
        Ok(SystemState::from_flat(&next, state.v.len(), state.t + self.dt))
    }
}

pub fn step(state: &SystemState, cn: &CrankNicolson) -> Result<SystemState, PdeError> {
    cn.step(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EnergyTrace {
    pub samples: Vec<TraceSample>,
    /// Largest |E_{n+1} − E_n − dt·D(u_{n+1/2})| seen, over E_0.
    pub max_balance_residual: f64,
    /// Largest relative energy increase over one step, over E_0.
    pub max_increase: f64,
}

impl EnergyTrace {
    pub fn monotone(&self, tol: f64) -> bool {
        self.max_increase <= tol
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub trace: EnergyTrace,
    pub final_state: SystemState,
}

/// Runs from (v0, φ = 0) to time `t_end`, sampling every `stride` steps.
pub fn simulate(gen: &Generator, v0: &[Complex64], t_end: f64, dt: f64, stride: usize) -> Result<SimulationResult, PdeError> {
    if v0.len() != gen.grid.n_nodes() {
        return Err(PdeError::Dimension(format!("v0 has {} entries, mesh has {}", v0.len(), gen.grid.n_nodes())));
    }
    if !(t_end > 0.0) {
        return Err(PdeError::Invalid(format!("final time {t_end} must be positive")));
    }
    let stride = stride.max(1);
    let cn = CrankNicolson::new(gen, dt)?;
    let mut state = gen.zero_state();
    state.v = v0.to_vec();
    let steps = (t_end / dt).round() as usize;
    let e0 = energy(gen, &state);
    let mut trace = EnergyTrace::default();
    trace.samples.push(TraceSample { t: 0.0, energy: e0, dissipation: dissipation_rate(gen, &state) });
    let mut e_prev = e0;
    for n in 1..=steps {
        let mut next = cn.step(&state)?;
        next.t = n as f64 * dt;
        if next.v.iter().chain(&next.phi).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PdeError::NonFinite { step: n });
        }
        let e = energy(gen, &next);
        let mid = SystemState {
            v: state.v.iter().zip(&next.v).map(|(a, b)| (a + b) * 0.5).collect(),
            phi: state.phi.iter().zip(&next.phi).map(|(a, b)| (a + b) * 0.5).collect(),
            t: state.t + 0.5 * dt,
        };
        if e0 > 0.0 {
            let balance = (e - e_prev - dt * dissipation_rate(gen, &mid)).abs() / e0;
            trace.max_balance_residual = trace.max_balance_residual.max(balance);
            trace.max_increase = trace.max_increase.max((e - e_prev) / e0);
        }
        e_prev = e;
        state = next;
        if n % stride == 0 || n == steps {
            trace.samples.push(TraceSample { t: state.t, energy: e, dissipation: dissipation_rate(gen, &state) });
        }
    }
    Ok(SimulationResult { trace, final_state: state })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    Polynomial,
    Exponential,
}

impl DecayModel {
    /// Abscissa of the fit: log t or t.
    pub fn abscissa(self, t: f64) -> f64 {
        match self {
            DecayModel::Polynomial => t.ln(),
            DecayModel::Exponential => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    /// Slope of log E against log t (polynomial) or against t (exponential).
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares decay fit over samples with t in `window`.
pub fn fit_decay(trace: &EnergyTrace, model: DecayModel, window: (f64, f64)) -> Result<DecayFit, PdeError> {
    let pts: Vec<&TraceSample> =
        trace.samples.iter().filter(|s| s.t >= window.0 && s.t <= window.1 && s.t > 0.0 && s.energy > 0.0).collect();
    if pts.len() < 10 {
        return Err(PdeError::ShortWindow(pts.len()));
    }
    let x: Vec<f64> = pts
        .iter()
        .map(|s| model.abscissa(s.t))
        .collect();
    let y: Vec<f64> = pts.iter().map(|s| s.energy.ln()).collect();
    let f = linear_fit(&x, &y).ok_or(PdeError::ShortWindow(pts.len()))?;
    Ok(DecayFit { model, rate: f.slope, intercept: f.intercept, r2: f.r2, window, samples: pts.len() })
}

/// Window starting once E has dropped tenfold and ending at the last sample.
pub fn transient_excluded_window(trace: &EnergyTrace) -> (f64, f64) {
    let e0 = trace.samples.first().map(|s| s.energy).unwrap_or(0.0);
    let start = trace.samples.iter().find(|s| s.energy <= 0.1 * e0).map(|s| s.t).unwrap_or(f64::INFINITY);
    (start, trace.samples.last().map(|s| s.t).unwrap_or(0.0))
}

/// Removes from (v0, 0) its component along the eigenvector of A whose
/// eigenvalue is nearest `shift`, by subtracting a multiple of the constant
/// profile. φ stays zero. Returns that eigenvalue and the new data.
pub fn remove_mode_near(gen: &Generator, v0: &[Complex64], shift: Complex64) -> Result<(Complex64, Vec<Complex64>), PdeError> {
    let n = gen.grid.n_nodes();
    if v0.len() != n {
        return Err(PdeError::Dimension(format!("v0 has {} entries, mesh has {n}", v0.len())));
    }
    let (lambda, _, res) = gen.matrix.nearest_eigenpair(shift, 1e-12, 200)?;
    // left eigenvector: y^H A = λ y^H
    let (_, y, res_left) = gen.matrix.conj_transpose().nearest_eigenpair(lambda.conj(), 1e-12, 200)?;
    if res.max(res_left) > 1e-8 {
        return Err(PdeError::Invalid(format!("eigenpair near {shift} did not converge (residual {:.1e})", res.max(res_left))));
    }
    let yu: Complex64 = (0..n).map(|i| y[i].conj() * v0[i]).sum();
    let ye: Complex64 = (0..n).map(|i| y[i].conj()).sum();
    if ye.norm() < 1e-12 {
        return Err(PdeError::Invalid("constant profile is orthogonal to the left eigenvector".into()));
    }
    let c = yu / ye;
    Ok((lambda, v0.iter().map(|z| z - c).collect()))
}

/// max|v_i| − (1/√(1−α) + √2) ‖v‖_{H¹_α}; non-positive when the embedding holds.
pub fn embedding_check(grid: &SpatialGrid, v: &[Complex64]) -> f64 {
    let sup = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let c = 1.0 / (1.0 - grid.alpha).sqrt() + 2f64.sqrt();
    sup - c * grid.h1_norm_sq(v).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Gaussian { center: f64, width: f64 },
    LowestMode,
    Polynomial,
}

/// Samples a built-in initial profile, normalized to unit discrete L² norm.
pub fn initial_profile(grid: &SpatialGrid, profile: Profile) -> Result<Vec<Complex64>, PdeError> {
    let v: Vec<Complex64> = match profile {
        Profile::Gaussian { center, width } => {
            grid.x.iter().map(|&x| Complex64::new((-((x - center) / width).powi(2)).exp(), 0.0)).collect()
        }
        Profile::Polynomial => grid.x.iter().map(|&x| Complex64::new(x * (1.0 - x), 0.0)).collect(),
        Profile::LowestMode => lowest_undamped_mode(grid)?,
    };
    let n = grid.norm_sq(&v).sqrt();
    if !(n > 0.0) {
        return Err(PdeError::Invalid("initial profile vanishes on the mesh".into()));
    }
    Ok(v.iter().map(|z| z / n).collect())
}

/// x^{(1−α)/2} J_{−ν}(z x^{(2−α)/2}) with z the first positive zero of J_{1−ν}:
/// the lowest non-constant mode of the undamped problem.
pub fn lowest_undamped_mode(grid: &SpatialGrid) -> Result<Vec<Complex64>, PdeError> {
    let alpha = grid.alpha;
    let p = ModelParams { alpha, alpha_tilde: 1.0, eta: 0.0, rho: 0.0 };
    let rec = refine_root(&p, seed_root(&p, 0), 0).map_err(|e| PdeError::Invalid(e.to_string()))?;
    let z = (I * rec.gamma * (2.0 / (2.0 - alpha))).re;
    let order = BesselOrder::new(-p.nu());
    grid.x
        .iter()
        .map(|&x| {
            if x == 0.0 {
                // limit of x^{(1−α)/2} J_{−ν}(z x^{(2−α)/2})
                let c = crate::bessel::leading_coefficient(p.nu(), -1.0) * z.powf(-p.nu());
                return Ok(Complex64::new(c, 0.0));
            }
            let arg = Complex64::new(z * x.powf((2.0 - alpha) / 2.0), 0.0);
            bessel_j(order, arg)
                .map(|j| j * x.powf((1.0 - alpha) / 2.0))
                .map_err(|e| PdeError::Invalid(e.to_string()))
        })
        .collect()
}

/// Piecewise-linear resampling of (x, value) data onto the mesh.
pub fn resample_profile(grid: &SpatialGrid, data: &[(f64, Complex64)]) -> Result<Vec<Complex64>, PdeError> {
    if data.len() < 2 {
        return Err(PdeError::Invalid("profile needs at least two points".into()));
    }
    if data.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(PdeError::Invalid("profile abscissae must increase strictly".into()));
    }
    Ok(grid
        .x
        .iter()
        .map(|&x| {
            let j = data.partition_point(|d| d.0 <= x).clamp(1, data.len() - 1);
            let (x0, v0) = data[j - 1];
            let (x1, v1) = data[j];
            let s = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
            v0 + (v1 - v0) * s
        })
        .collect())
}
