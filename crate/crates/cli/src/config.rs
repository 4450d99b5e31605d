//! Flat `key = value` run configuration with `#` comments.

use schrolab::pde::Profile;
use schrolab::ModelParams;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}` given twice")]
    Duplicate { key: String },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("cannot read config: {0}")]
    Io(String),
}

const KEYS: &[&str] = &[
    "alpha",
    "alpha_tilde",
    "eta",
    "rho",
    "n_cells",
    "n_modes",
    "t_end",
    "dt",
    "stride",
    "profile",
    "remove_slow_mode",
    "window_start",
    "window_end",
    "k_min",
    "k_max",
    "beta_min",
    "beta_max",
    "n_beta",
    "out",
    "seed",
    "embedding_trials",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n_cells: usize,
    pub n_modes: usize,
    pub t_end: f64,
    pub dt: f64,
    pub stride: usize,
    pub profile: Profile,
    pub remove_slow_mode: bool,
    /// Fit window; `None` means from the tenfold energy drop to the end.
    pub window: Option<(f64, f64)>,
    pub k_min: i64,
    pub k_max: i64,
    pub beta_band: [f64; 2],
    pub n_beta: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub embedding_trials: usize,
    /// Keys as given, for output headers.
    pub raw: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams { alpha: 0.5, alpha_tilde: 0.5, eta: 1.0, rho: 1.0 },
            n_cells: 400,
            n_modes: 96,
            t_end: 10.0,
            dt: 1e-3,
            stride: 10,
            profile: Profile::Polynomial,
            remove_slow_mode: false,
            window: None,
            k_min: 0,
            k_max: 50,
            beta_band: [1e2, 1e4],
            n_beta: 300,
            out: None,
            seed: 0,
            embedding_trials: 1000,
            raw: BTreeMap::new(),
        }
    }
}

fn parse<T: FromStr>(key: &'static str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| ConfigError::Invalid { key, reason: format!("`{v}`: {e}") })
}

fn positive(key: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::Invalid { key, reason: format!("must be positive and finite, got {v}") })
    }
}

fn parse_bool(key: &'static str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Invalid { key, reason: format!("expected true or false, got `{v}`") }),
    }
}

fn parse_profile(v: &str) -> Result<Profile, ConfigError> {
    match v {
        "polynomial" => Ok(Profile::Polynomial),
        "lowest_mode" => Ok(Profile::LowestMode),
        _ => {
            // gaussian or gaussian:center:width
            let parts: Vec<&str> = v.split(':').collect();
            if parts[0] != "gaussian" || !(parts.len() == 1 || parts.len() == 3) {
                return Err(ConfigError::Invalid {
                    key: "profile",
                    reason: format!("expected polynomial, lowest_mode or gaussian[:center:width], got `{v}`"),
                });
            }
            if parts.len() == 1 {
                return Ok(Profile::Gaussian { center: 0.5, width: 0.1 });
            }
            let center: f64 = parse("profile", parts[1])?;
            let width = positive("profile", parse("profile", parts[2])?)?;
            Ok(Profile::Gaussian { center, width })
        }
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut raw = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: line.to_string() })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1, text: line.to_string() });
            }
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey(k.to_string()));
            }
            if raw.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Duplicate { key: k.to_string() });
            }
        }
        Self::from_map(raw)
    }

    pub fn from_map(raw: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        let get = |k: &str| raw.get(k).map(String::as_str);
        let mut p = c.params;
        if let Some(v) = get("alpha") {
            p.alpha = parse("alpha", v)?;
        }
        if let Some(v) = get("alpha_tilde") {
            p.alpha_tilde = parse("alpha_tilde", v)?;
        }
        if let Some(v) = get("eta") {
            p.eta = parse("eta", v)?;
        }
        if let Some(v) = get("rho") {
            p.rho = parse("rho", v)?;
        }
        c.params = ModelParams::new(p.alpha, p.alpha_tilde, p.eta, p.rho).map_err(|e| {
            let key = match e {
                schrolab::ParamError::Alpha(_) => "alpha",
                schrolab::ParamError::AlphaTilde(_) => "alpha_tilde",
                schrolab::ParamError::Eta(_) => "eta",
                schrolab::ParamError::Rho(_) => "rho",
            };
            ConfigError::Invalid { key, reason: e.to_string() }
        })?;
        if let Some(v) = get("n_cells") {
            c.n_cells = parse("n_cells", v)?;
            if c.n_cells < 16 {
                return Err(ConfigError::Invalid { key: "n_cells", reason: format!("must be at least 16, got {}", c.n_cells) });
            }
        }
        if let Some(v) = get("n_modes") {
            c.n_modes = parse("n_modes", v)?;
            if c.n_modes < 8 {
                return Err(ConfigError::Invalid { key: "n_modes", reason: format!("must be at least 8, got {}", c.n_modes) });
            }
        }
        if let Some(v) = get("t_end") {
            c.t_end = positive("t_end", parse("t_end", v)?)?;
        }
        if let Some(v) = get("dt") {
            c.dt = positive("dt", parse("dt", v)?)?;
        }
        if c.dt > c.t_end {
            return Err(ConfigError::Invalid { key: "dt", reason: format!("{} exceeds t_end = {}", c.dt, c.t_end) });
        }
        if let Some(v) = get("stride") {
            c.stride = parse("stride", v)?;
            if c.stride == 0 {
                return Err(ConfigError::Invalid { key: "stride", reason: "must be at least 1".into() });
            }
        }
        if let Some(v) = get("profile") {
            c.profile = parse_profile(v)?;
        }
        if let Some(v) = get("remove_slow_mode") {
            c.remove_slow_mode = parse_bool("remove_slow_mode", v)?;
        }
        match (get("window_start"), get("window_end")) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                let (a, b): (f64, f64) = (parse("window_start", a)?, parse("window_end", b)?);
                if !(a >= 0.0 && b > a) {
                    return Err(ConfigError::Invalid { key: "window_end", reason: format!("window [{a}, {b}] is empty") });
                }
                c.window = Some((a, b));
            }
            (None, Some(_)) => {
                return Err(ConfigError::Invalid { key: "window_start", reason: "missing while window_end is set".into() })
            }
            (Some(_), None) => {
                return Err(ConfigError::Invalid { key: "window_end", reason: "missing while window_start is set".into() })
            }
        }
        if let Some(v) = get("k_min") {
            c.k_min = parse("k_min", v)?;
            if c.k_min < 0 {
                return Err(ConfigError::Invalid { key: "k_min", reason: format!("must be non-negative, got {}", c.k_min) });
            }
        }
        if let Some(v) = get("k_max") {
            c.k_max = parse("k_max", v)?;
        }
        if c.k_max < 1 || c.k_max > 500 {
            return Err(ConfigError::Invalid { key: "k_max", reason: format!("must lie in [1, 500], got {}", c.k_max) });
        }
        if c.k_min > c.k_max {
            return Err(ConfigError::Invalid { key: "k_min", reason: format!("{} exceeds k_max = {}", c.k_min, c.k_max) });
        }
        if let Some(v) = get("beta_min") {
            c.beta_band[0] = positive("beta_min", parse("beta_min", v)?)?;
        }
        if let Some(v) = get("beta_max") {
            c.beta_band[1] = positive("beta_max", parse("beta_max", v)?)?;
        }
        if c.beta_band[1] <= c.beta_band[0] {
            return Err(ConfigError::Invalid {
                key: "beta_max",
                reason: format!("{} must exceed beta_min = {}", c.beta_band[1], c.beta_band[0]),
            });
        }
        if let Some(v) = get("n_beta") {
            c.n_beta = parse("n_beta", v)?;
            if c.n_beta < 2 {
                return Err(ConfigError::Invalid { key: "n_beta", reason: "must be at least 2".into() });
            }
        }
        if let Some(v) = get("out") {
            c.out = Some(PathBuf::from(v));
        }
        if let Some(v) = get("seed") {
            c.seed = parse("seed", v)?;
        }
        if let Some(v) = get("embedding_trials") {
            c.embedding_trials = parse("embedding_trials", v)?;
        }
        c.raw = raw;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// One-line description of the model parameters for output headers.
    pub fn param_line(&self) -> String {
        let p = &self.params;
        format!("alpha={} alpha_tilde={} eta={} rho={}", p.alpha, p.alpha_tilde, p.eta, p.rho)
    }
}
