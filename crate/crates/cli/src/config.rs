use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::PathBuf;

use becsim_core::meanfield::{DriveKind, DriveSpec};
use becsim_core::response::SurfaceDrive;
use becsim_core::series::linspace;
use becsim_core::ModelParams;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Largest particle number accepted by the master-equation mode.
pub const MASTER_N_MAX: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Meanfield,
    Steady,
    NonlinearSteady,
    Response,
    Mcwf,
    Master,
    Fixedpoints,
    Scan,
    Preset,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Meanfield => "meanfield",
            Mode::Steady => "steady",
            Mode::NonlinearSteady => "nonlinear-steady",
            Mode::Response => "response",
            Mode::Mcwf => "mcwf",
            Mode::Master => "master",
            Mode::Fixedpoints => "fixedpoints",
            Mode::Scan => "scan",
            Mode::Preset => "preset",
        }
    }

    fn axes(self) -> &'static [&'static str] {
        const PARAMS: &[&str] = &["J", "epsilon", "gamma_p", "gamma_a1", "gamma_a2", "T1_inv", "f_a"];
        const WITH_UN: &[&str] = &["J", "U", "epsilon", "gamma_p", "gamma_a1", "gamma_a2", "T1_inv", "f_a", "Un"];
        const NONLINEAR: &[&str] = &["J", "epsilon", "gamma_p", "gamma_a1", "gamma_a2", "T1_inv", "f_a", "Un"];
        match self {
            Mode::Steady => PARAMS,
            Mode::NonlinearSteady => NONLINEAR,
            Mode::Scan => WITH_UN,
            Mode::Response => &["J0", "T1_inv"],
            _ => &[],
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Model parameters as written in a config: the loss either per well
/// (`gamma_a1`, `gamma_a2`) or as total rate and asymmetry (`T1_inv`, `f_a`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "U", default)]
    pub u: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub gamma_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_a2: Option<f64>,
    #[serde(rename = "T1_inv", default, skip_serializing_if = "Option::is_none")]
    pub t1_inv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_a: Option<f64>,
}

impl ParamSpec {
    pub fn loss(j: f64, u: f64, epsilon: f64, gamma_p: f64, t1_inv: f64, f_a: f64) -> Self {
        ParamSpec { j, u, epsilon, gamma_p, gamma_a1: None, gamma_a2: None, t1_inv: Some(t1_inv), f_a: Some(f_a) }
    }

    fn resolve(&self, errors: &mut Vec<Violation>) -> Option<ModelParams> {
        let per_well = self.gamma_a1.is_some() || self.gamma_a2.is_some();
        let total = self.t1_inv.is_some() || self.f_a.is_some();
        let result = match (per_well, total) {
            (true, true) => {
                errors.push(Violation::new("params", "give either gamma_a1/gamma_a2 or T1_inv/f_a, not both"));
                return None;
            }
            (false, true) => match (self.t1_inv, self.f_a) {
                (Some(t1), Some(fa)) => ModelParams::from_loss(self.j, self.u, self.epsilon, self.gamma_p, t1, fa),
                (None, _) => {
                    errors.push(Violation::new("params.T1_inv", "required together with f_a"));
                    return None;
                }
                (_, None) => {
                    errors.push(Violation::new("params.f_a", "required together with T1_inv"));
                    return None;
                }
            },
            _ => ModelParams::new(
                self.j,
                self.u,
                self.epsilon,
                self.gamma_p,
                self.gamma_a1.unwrap_or(0.0),
                self.gamma_a2.unwrap_or(0.0),
            ),
        };
        result.map_err(|e| errors.push(Violation::new("params", e.to_string()))).ok()
    }
}

/// Coherent initial state with `n0` atoms at polar angle `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default = "default_n0")]
    pub n0: usize,
}

fn default_theta() -> f64 {
    FRAC_PI_2
}

fn default_n0() -> usize {
    100
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState { theta: default_theta(), phi: 0.0, n0: default_n0() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_end: f64,
    pub points: usize,
}

/// One scan axis: either `min`/`max`/`points` (optionally geometric) or an
/// explicit list of `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanAxis {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub log: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl ScanAxis {
    pub fn range(name: &str, min: f64, max: f64, points: usize, log: bool) -> Self {
        ScanAxis { name: name.into(), min: Some(min), max: Some(max), points: Some(points), log, values: None }
    }

    pub fn list(name: &str, values: &[f64]) -> Self {
        ScanAxis { name: name.into(), min: None, max: None, points: None, log: false, values: Some(values.to_vec()) }
    }

    fn grid(&self, field: &str, errors: &mut Vec<Violation>) -> Vec<f64> {
        if let Some(v) = &self.values {
            if self.min.is_some() || self.max.is_some() || self.points.is_some() || self.log {
                errors.push(Violation::new(field, "values excludes min/max/points/log"));
            }
            if v.is_empty() {
                errors.push(Violation::new(field, "empty scan axis"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                errors.push(Violation::new(field, "non-finite value"));
            }
            return v.clone();
        }
        let (Some(lo), Some(hi), Some(points)) = (self.min, self.max, self.points) else {
            errors.push(Violation::new(field, "needs min, max and points, or values"));
            return Vec::new();
        };
        let before = errors.len();
        if points == 0 {
            errors.push(Violation::new(field, "empty scan axis (points = 0)"));
        }
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            errors.push(Violation::new(field, format!("invalid range [{lo}, {hi}]")));
        }
        if self.log && lo <= 0.0 {
            errors.push(Violation::new(field, "logarithmic axis needs min > 0"));
        }
        if errors.len() > before {
            return Vec::new();
        }
        if points == 1 {
            return vec![lo];
        }
        if self.log {
            let r = (hi / lo).ln();
            (0..points).map(|i| lo * (r * i as f64 / (points - 1) as f64).exp()).collect()
        } else {
            linspace(lo, hi, points)
        }
    }
}

fn default_trajectories() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Prefix of the output files; defaults to the mode name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub params: ParamSpec,
    #[serde(default)]
    pub drive: DriveSpec,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scan: Vec<ScanAxis>,
    /// Output times of a `scan`; defaults to the end of `time`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_times: Vec<f64>,
    /// Drive of a `response` surface; defaults to a tunneling drive with
    /// `J1/J0 = 0.1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<SurfaceDrive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(mode: Mode, params: ParamSpec) -> Self {
        RunConfig {
            mode: Some(mode),
            label: None,
            params,
            drive: DriveSpec::none(),
            initial: InitialState::default(),
            time: None,
            scan: Vec::new(),
            sample_times: Vec::new(),
            response: None,
            seed: None,
            trajectories: default_trajectories(),
            preset: None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { field: field.into(), message: message.into() }
    }
}

/// Every violated field of a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid config ({} problem{}):", self.violations.len(), if self.violations.len() == 1 { "" } else { "s" })?;
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub mode: Mode,
    pub label: String,
    pub params: ModelParams,
    pub drive: DriveSpec,
    pub initial: InitialState,
    /// Output grid `0..=t_end`, empty when the mode has no time axis.
    pub grid: Vec<f64>,
    pub axes: Vec<Axis>,
    pub sample_times: Vec<f64>,
    pub surface: SurfaceDrive,
    pub seed: Option<u64>,
    pub trajectories: usize,
    /// Normalized config the hash is computed from.
    pub config: RunConfig,
    pub hash: String,
}

impl Resolved {
    pub fn t_end(&self) -> f64 {
        self.grid.last().copied().unwrap_or(0.0)
    }
}

/// SHA-256 of the compact JSON form, as lowercase hex.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    format!("{:x}", Sha256::digest(bytes))
}

/// Check a config for `mode` and resolve defaults. All problems are
/// collected before returning.
pub fn validate(config: &RunConfig, mode: Mode) -> Result<Resolved, ConfigError> {
    let mut errors = Vec::new();
    if mode == Mode::Preset {
        errors.push(Violation::new("mode", "preset configs expand into concrete runs before validation"));
    }
    if let Some(m) = config.mode {
        if m != mode {
            errors.push(Violation::new("mode", format!("config says {m} but {mode} was requested")));
        }
    }
    let params = config.params.resolve(&mut errors);
    if let Err(e) = config.drive.validate() {
        errors.push(Violation::new("drive", e.to_string()));
    }
    let init = config.initial;
    if !init.theta.is_finite() || !init.phi.is_finite() {
        errors.push(Violation::new("initial", "theta and phi must be finite"));
    }
    if init.n0 == 0 {
        errors.push(Violation::new("initial.n0", "must be at least 1"));
    }

    let needs_time = matches!(mode, Mode::Meanfield | Mode::Master | Mode::Mcwf);
    let mut grid = Vec::new();
    match config.time {
        Some(t) => {
            if !(t.t_end.is_finite() && t.t_end > 0.0) {
                errors.push(Violation::new("time.t_end", "must be positive"));
            }
            if t.points == 0 {
                errors.push(Violation::new("time.points", "empty time grid"));
            }
            if t.t_end.is_finite() && t.t_end > 0.0 && t.points > 0 {
                grid = if t.points == 1 { vec![t.t_end] } else { linspace(0.0, t.t_end, t.points) };
            }
        }
        None if needs_time => errors.push(Violation::new("time", format!("required by mode {mode}"))),
        None => {}
    }

    let mut sample_times = config.sample_times.clone();
    if mode == Mode::Scan {
        if sample_times.is_empty() {
            match config.time {
                Some(t) => sample_times.push(t.t_end),
                None => errors.push(Violation::new("sample_times", "scan needs sample_times or time")),
            }
        }
        if sample_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            errors.push(Violation::new("sample_times", "times must be finite and non-negative"));
        }
        if sample_times.windows(2).any(|w| w[1] <= w[0]) {
            errors.push(Violation::new("sample_times", "times must be strictly increasing"));
        }
        if config.scan.is_empty() {
            errors.push(Violation::new("scan", "scan mode needs at least one axis"));
        }
    } else if !sample_times.is_empty() {
        errors.push(Violation::new("sample_times", format!("not used by mode {mode}")));
    }

    let allowed = mode.axes();
    let mut axes = Vec::new();
    for (i, axis) in config.scan.iter().enumerate() {
        let field = format!("scan[{i}] ({})", axis.name);
        if allowed.is_empty() {
            errors.push(Violation::new(field.clone(), format!("mode {mode} takes no scan axes")));
        } else if !allowed.contains(&axis.name.as_str()) {
            errors.push(Violation::new(
                field.clone(),
                format!("unknown axis for mode {mode}; expected one of {}", allowed.join(", ")),
            ));
        }
        if config.scan[..i].iter().any(|a| a.name == axis.name) {
            errors.push(Violation::new(field.clone(), "duplicate axis"));
        }
        let values = axis.grid(&field, &mut errors);
        axes.push(Axis { name: axis.name.clone(), values });
    }

    if mode == Mode::Mcwf {
        if config.seed.is_none() {
            errors.push(Violation::new("seed", "required by mode mcwf"));
        }
        if config.trajectories == 0 {
            errors.push(Violation::new("trajectories", "must be at least 1"));
        }
    }
    if mode == Mode::Master && init.n0 > MASTER_N_MAX {
        errors.push(Violation::new(
            "initial.n0",
            format!("master equation is limited to {MASTER_N_MAX} particles, got {}", init.n0),
        ));
    }
    let surface = config.response.unwrap_or(SurfaceDrive::Tunneling { ratio: 0.1 });
    if mode == Mode::Response {
        let (name, v) = match surface {
            SurfaceDrive::Tunneling { ratio } => ("response.ratio", ratio),
            SurfaceDrive::Bias { eps1 } => ("response.eps1", eps1),
        };
        if !(v.is_finite() && v > 0.0) {
            errors.push(Violation::new(name, "drive amplitude must be positive"));
        }
    } else if config.response.is_some() {
        errors.push(Violation::new("response", format!("not used by mode {mode}")));
    }
    if mode == Mode::Response || mode == Mode::Steady || mode == Mode::NonlinearSteady || mode == Mode::Fixedpoints {
        if config.drive.kind != DriveKind::None {
            errors.push(Violation::new("drive", format!("mode {mode} takes no time-dependent drive")));
        }
    }

    if !errors.is_empty() {
        return Err(ConfigError { violations: errors });
    }
    let mut normalized = config.clone();
    normalized.mode = Some(mode);
    normalized.out = None;
    normalized.preset = None;
    let hash = config_hash(&normalized);
    Ok(Resolved {
        mode,
        label: config.label.clone().unwrap_or_else(|| mode.name().to_string()),
        params: params.expect("no violations"),
        drive: config.drive,
        initial: init,
        grid,
        axes,
        sample_times,
        surface,
        seed: config.seed,
        trajectories: config.trajectories,
        config: normalized,
        hash,
    })
}

/// Parameters of one scan cell. Axes are applied in a fixed order so that
/// `T1_inv` keeps the asymmetry `f_a` and `Un` is converted with `n0`.
pub fn apply_axes(base: &ModelParams, cell: &[(&str, f64)], n0: usize) -> ModelParams {
    let mut p = *base;
    let get = |name: &str| cell.iter().find(|(n, _)| *n == name).map(|(_, v)| *v);
    if let Some(v) = get("J").or_else(|| get("J0")) {
        p.j = v;
    }
    if let Some(v) = get("U") {
        p.u = v;
    }
    if let Some(v) = get("epsilon") {
        p.epsilon = v;
    }
    if let Some(v) = get("gamma_p") {
        p.gamma_p = v;
    }
    if let Some(v) = get("gamma_a1") {
        p.gamma_a1 = v;
    }
    if let Some(v) = get("gamma_a2") {
        p.gamma_a2 = v;
    }
    if get("f_a").is_some() || get("T1_inv").is_some() {
        let rates = p.rates();
        let t1 = get("T1_inv").unwrap_or(rates.t1_inv);
        let fa = get("f_a").unwrap_or(rates.f_a);
        p.gamma_a1 = t1 * (1.0 - fa);
        p.gamma_a2 = t1 * (1.0 + fa);
    }
    if let Some(un) = get("Un") {
        p.u = un / n0 as f64;
    }
    p
}
