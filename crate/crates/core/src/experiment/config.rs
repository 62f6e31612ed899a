use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, OrderMode};
use crate::error::{Error, Result};
use crate::learn::TrainConfig;
use crate::plant::{BoxSet, CstrParams, NoiseConfig};
use crate::qpsolve::QpSettings;
use crate::trajkit::Retention;

/// One experiment case: plant, data protocol, training, controller and
/// closed-loop evaluation, all in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Case label used in output paths and the summary grid.
    pub name: String,
    pub plant: PlantConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub training: TrainConfig,
    pub controller: ControllerSection,
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantConfig {
    Cstr(CstrPlantConfig),
    Lti(LtiPlantConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CstrPlantConfig {
    pub params: CstrParams,
    /// Sampling period, h.
    pub dt: f64,
    pub substeps: usize,
    /// `[C_A1, T_1, C_A2, T_2]`.
    pub initial_state: [f64; 4],
    pub input_bounds: BoxSet,
    /// Process disturbances; absent means a noise-free plant.
    pub noise: Option<NoiseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtiPlantConfig {
    pub system: LtiSystemSpec,
    pub x0: Vec<f64>,
    pub input_bounds: BoxSet,
    /// Stage cost `Σ w_i (y_i − r_i)²`.
    pub cost_weights: Vec<f64>,
    pub cost_target: Vec<f64>,
    #[serde(default = "one")]
    pub dt: f64,
}

/// Explicit `A, B, C` rows (with `D = 0`), or a seeded random controllable
/// system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LtiSystemSpec {
    Explicit { a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, c: Vec<Vec<f64>> },
    Random { n_x: usize, n_u: usize, n_y: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Samples in the Hankel trajectory.
    pub t_hankel: usize,
    /// Samples cut into training windows after the Hankel trajectory.
    pub n_window_samples: usize,
    /// Window length; defaults to `T_ini + N_p`.
    pub window_len: Option<usize>,
    /// Train/validation/test ratio such as `"7:2:1"`.
    #[serde(default = "default_split")]
    pub split_ratio: String,
    #[serde(default)]
    pub excitation_seed: u64,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub t_ini: usize,
    pub n_p: usize,
    /// Diagonal of the input-rate weight in normalized input units; ones
    /// when absent.
    pub r_diag: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "default_lambda_g")]
    pub lambda_g: f64,
    /// Retention for the reduced-order mode: `"auto"`, a rank, or
    /// `"tol:<x>"` relative to the largest singular value.
    #[serde(default)]
    pub reduced_rank: RankSpec,
    /// Box on the reconstructed outputs, physical units.
    pub output_bounds: Option<BoxSet>,
    #[serde(default = "default_slack")]
    pub slack_weight: f64,
    #[serde(default)]
    pub qp: QpSettings,
    /// Needed only by the tracking mode.
    pub tracking: Option<TrackingSection>,
}

/// Set-point tracking DeePC on the raw Hankel data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingSection {
    pub q_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
    pub y_ref: Vec<f64>,
    /// Defaults to the midpoint of the input box.
    pub u_ref: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Econ,
    EconReduced,
    Constant,
    Tracking,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Econ, Mode::EconReduced, Mode::Constant, Mode::Tracking];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Econ => "econ",
            Mode::EconReduced => "econ-reduced",
            Mode::Constant => "constant",
            Mode::Tracking => "tracking",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    /// Whether the mode needs a trained lifting model.
    pub fn needs_model(self) -> bool {
        matches!(self, Mode::Econ | Mode::EconReduced)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Recorded closed-loop steps per run, after the `T_ini` warmup.
    pub steps: usize,
    /// Number of repeated runs; run `i` seeds its disturbances with
    /// `seed_base + i`.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    /// Input of the constant baseline and of the warmup; the input-box
    /// midpoint when absent.
    pub baseline_input: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

fn default_split() -> String {
    "7:2:1".into()
}

fn default_lambda_g() -> f64 {
    1e-4
}

fn default_slack() -> f64 {
    1e4
}

fn default_seeds() -> usize {
    20
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Econ, Mode::EconReduced, Mode::Constant]
}

/// Serialized form of a [`Retention`]: `"auto"`, an integer rank, or
/// `"tol:<x>"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "RankRepr", into = "RankRepr")]
pub struct RankSpec(pub Retention);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RankRepr {
    Rank(usize),
    Text(String),
}

impl TryFrom<RankRepr> for RankSpec {
    type Error = String;

    fn try_from(r: RankRepr) -> std::result::Result<Self, String> {
        match r {
            RankRepr::Rank(0) => Err("reduced rank must be positive".into()),
            RankRepr::Rank(n) => Ok(RankSpec(Retention::Rank(n))),
            RankRepr::Text(s) => parse_retention(&s).map(RankSpec).map_err(|e| e.to_string()),
        }
    }
}

impl From<RankSpec> for RankRepr {
    fn from(r: RankSpec) -> Self {
        match r.0 {
            Retention::Auto => RankRepr::Text("auto".into()),
            Retention::Rank(n) => RankRepr::Rank(n),
            Retention::Relative(t) => RankRepr::Text(format!("tol:{t}")),
        }
    }
}

/// Parses `"auto"`, `"<n>"` or `"tol:<x>"`.
pub fn parse_retention(s: &str) -> Result<Retention> {
    let s = s.trim();
    let bad = || Error::Config(format!("reduced rank '{s}' is not 'auto', a positive integer or 'tol:<x>'"));
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Retention::Auto);
    }
    if let Some(t) = s.strip_prefix("tol:") {
        let t: f64 = t.trim().parse().map_err(|_| bad())?;
        return if t > 0.0 && t < 1.0 { Ok(Retention::Relative(t)) } else { Err(bad()) };
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(Retention::Rank(n)),
        _ => Err(bad()),
    }
}

/// Parses a colon-separated train/validation/test ratio such as `"7:2:1"`.
pub fn parse_split_ratio(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let bad = || Error::Config(format!("split ratio '{s}' must look like 'train:val:test', e.g. '7:2:1'"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut r = [0.0f64; 3];
    for (dst, p) in r.iter_mut().zip(parts) {
        *dst = p.parse().map_err(|_| bad())?;
        if !(dst.is_finite() && *dst >= 0.0) {
            return Err(bad());
        }
    }
    if r[0] <= 0.0 || r[1] <= 0.0 {
        return Err(Error::Config(format!("split ratio '{s}' needs non-empty train and validation shares")));
    }
    Ok(r)
}

fn rows_to_matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let n_c = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || n_c == 0 || rows.iter().any(|r| r.len() != n_c) {
        return Err(Error::Config(format!("matrix {name} must have equally long, non-empty rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), n_c, |i, j| rows[i][j]))
}

impl LtiSystemSpec {
    /// `(A, B, C)` for the explicit form; `None` for the random form.
    pub fn explicit_matrices(&self) -> Result<Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>> {
        match self {
            LtiSystemSpec::Explicit { a, b, c } => Ok(Some((rows_to_matrix(a, "A")?, rows_to_matrix(b, "B")?, rows_to_matrix(c, "C")?))),
            LtiSystemSpec::Random { .. } => Ok(None),
        }
    }

    pub fn dims(&self) -> Result<(usize, usize, usize)> {
        match self {
            LtiSystemSpec::Random { n_x, n_u, n_y, .. } => Ok((*n_x, *n_u, *n_y)),
            LtiSystemSpec::Explicit { .. } => {
                let (a, b, c) = self.explicit_matrices()?.expect("explicit form");
                Ok((a.nrows(), b.ncols(), c.nrows()))
            }
        }
    }
}

impl PlantConfig {
    pub fn input_bounds(&self) -> &BoxSet {
        match self {
            PlantConfig::Cstr(c) => &c.input_bounds,
            PlantConfig::Lti(l) => &l.input_bounds,
        }
    }

    pub fn n_u(&self) -> usize {
        self.input_bounds().dim()
    }

    pub fn n_y(&self) -> Result<usize> {
        match self {
            PlantConfig::Cstr(_) => Ok(4),
            PlantConfig::Lti(l) => Ok(l.system.dims()?.2),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PlantConfig::Cstr(_) => "cstr",
            PlantConfig::Lti(_) => "lti",
        }
    }

    fn validate(&self) -> Result<()> {
        let bounds = self.input_bounds();
        bounds.validate()?;
        if bounds.lo.iter().chain(&bounds.hi).any(|v| !v.is_finite()) {
            return Err(Error::Config("plant input box must be bounded".into()));
        }
        match self {
            PlantConfig::Cstr(c) => {
                c.params.validate()?;
                if !(c.dt > 0.0 && c.dt.is_finite()) || c.substeps == 0 {
                    return Err(Error::Config("CSTR needs dt > 0 and at least one substep".into()));
                }
                if bounds.dim() != 4 {
                    return Err(Error::Config(format!("CSTR input box has {} channels, expected 4", bounds.dim())));
                }
                if let Some(n) = &c.noise {
                    n.validate()?;
                }
            }
            PlantConfig::Lti(l) => {
                let (n_x, n_u, n_y) = l.system.dims()?;
                if let Some((a, b, c)) = l.system.explicit_matrices()? {
                    if a.ncols() != n_x || b.nrows() != n_x || c.ncols() != n_x {
                        return Err(Error::Config("LTI matrices A, B, C have inconsistent shapes".into()));
                    }
                }
                if n_x == 0 || n_u == 0 || n_y == 0 {
                    return Err(Error::Config("LTI dimensions must be positive".into()));
                }
                if l.x0.len() != n_x || bounds.dim() != n_u || l.cost_weights.len() != n_y || l.cost_target.len() != n_y {
                    return Err(Error::Config("LTI x0, input box, cost weights or target do not match the system".into()));
                }
                if !(l.dt > 0.0 && l.dt.is_finite()) {
                    return Err(Error::Config("LTI dt must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1) as u64);
            Error::parse(path, line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config serialization: {e}")))
    }

    pub fn window_len(&self) -> usize {
        self.data.window_len.unwrap_or(self.controller.t_ini + self.controller.n_p)
    }

    pub fn split_ratio(&self) -> Result<[f64; 3]> {
        parse_split_ratio(&self.data.split_ratio)
    }

    /// Total open-loop samples: Hankel trajectory plus training windows.
    pub fn n_samples(&self) -> usize {
        self.data.t_hankel + self.data.n_window_samples
    }

    pub fn baseline_input(&self) -> DVector<f64> {
        let bounds = self.plant.input_bounds();
        match &self.evaluation.baseline_input {
            Some(u) => bounds.clamp(&DVector::from_column_slice(u)),
            None => bounds.midpoint(),
        }
    }

    /// Controller settings for the given order.
    pub fn controller_config(&self, order: OrderMode) -> Result<ControllerConfig> {
        let c = &self.controller;
        let mut cfg = ControllerConfig::new(c.t_ini, c.n_p, self.plant.input_bounds().clone(), self.training.sense);
        if let Some(r) = &c.r_diag {
            cfg.r = DMatrix::from_diagonal(&DVector::from_column_slice(r));
        }
        cfg.beta = c.beta;
        cfg.lambda_g = c.lambda_g;
        cfg.output_bounds = c.output_bounds.clone();
        cfg.slack_weight = c.slack_weight;
        cfg.qp = c.qp.clone();
        cfg.order = order;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("case name '{}' must be non-empty and contain no path separators", self.name)));
        }
        self.plant.validate()?;
        self.training.validate()?;
        let n_u = self.plant.n_u();
        let n_y = self.plant.n_y()?;
        let c = &self.controller;
        let depth = c.t_ini + c.n_p;
        if self.window_len() != depth {
            return Err(Error::Config(format!(
                "window length {} must equal T_ini + N_p = {depth}",
                self.window_len()
            )));
        }
        self.split_ratio()?;
        let d = &self.data;
        if d.t_hankel < depth || d.n_window_samples < depth {
            return Err(Error::Config(format!("data sizes must each cover at least one window of {depth} samples")));
        }
        if let Some(r) = &c.r_diag {
            if r.len() != n_u || r.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("r_diag needs {n_u} positive entries")));
            }
        }
        if let Some(ob) = &c.output_bounds {
            let n_c = self.training.recon_channels.as_ref().map_or(n_y, Vec::len);
            if ob.dim() != n_c {
                return Err(Error::Config(format!("output bounds have {} channels, the reconstruction has {n_c}", ob.dim())));
            }
        }
        if let Some(ch) = &self.training.recon_channels {
            if ch.iter().any(|&i| i >= n_y) {
                return Err(Error::Config(format!("reconstruction channel out of range for {n_y} outputs")));
            }
        }
        self.controller_config(OrderMode::Full)?;
        let e = &self.evaluation;
        if e.steps == 0 || e.seeds == 0 || e.modes.is_empty() {
            return Err(Error::Config("evaluation needs positive steps and seeds and at least one mode".into()));
        }
        if let Some(u) = &e.baseline_input {
            if u.len() != n_u || u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("baseline input needs {n_u} finite entries")));
            }
        }
        if e.modes.contains(&Mode::Tracking) {
            let t = c
                .tracking
                .as_ref()
                .ok_or_else(|| Error::Config("tracking mode needs a [controller.tracking] section".into()))?;
            t.validate(n_u, n_y)?;
        }
        Ok(())
    }
}

impl TrackingSection {
    fn validate(&self, n_u: usize, n_y: usize) -> Result<()> {
        let pos = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if self.q_diag.len() != n_y || self.y_ref.len() != n_y || !pos(&self.q_diag) {
            return Err(Error::Config(format!("tracking q_diag and y_ref need {n_y} entries, q positive")));
        }
        if self.r_diag.len() != n_u || !pos(&self.r_diag) || self.u_ref.as_ref().is_some_and(|u| u.len() != n_u) {
            return Err(Error::Config(format!("tracking r_diag and u_ref need {n_u} entries, r positive")));
        }
        if !(self.lambda_g >= 0.0 && self.lambda_g.is_finite()) {
            return Err(Error::Config("tracking lambda_g must be non-negative".into()));
        }
        Ok(())
    }
}
