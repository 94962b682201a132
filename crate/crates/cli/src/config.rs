//! Experiment configuration: JSON in, validated, defaults resolved.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Rejected configuration, with the dotted path of the offending key.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config at `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub packet: PacketConfig,
    #[serde(default)]
    pub cone: ConeConfig,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    /// worker threads; `None` uses the available parallelism
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub jk: JkConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Free,
    Point { gamma: f64 },
    Potential(PotentialConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub family: Family,
    #[serde(default = "one")]
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Bargmann { b: f64 },
    GaussianWell { depth: f64, width: f64 },
    /// two columns `r V(r)`, whitespace or comma separated, `#` comments
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub shell_offset: f64,
    #[serde(default)]
    pub boost: [f64; 3],
}

impl Default for PacketConfig {
    fn default() -> Self {
        PacketConfig { sigma: 1.0, shell_offset: 0.0, boost: [0.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeConfig {
    #[serde(default = "z_axis")]
    pub axis: [f64; 3],
    #[serde(default = "pi")]
    pub theta: f64,
}

impl Default for ConeConfig {
    fn default() -> Self {
        ConeConfig { axis: z_axis(), theta: PI }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default)]
    pub t1: f64,
    /// fixed upper time; when absent `T2 = t2_factor * R^2`
    #[serde(default)]
    pub t2: Option<f64>,
    #[serde(default = "quarter")]
    pub t2_factor: f64,
    /// samples per flux series file
    #[serde(default = "series_points")]
    pub series_points: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { t1: 0.0, t2: None, t2_factor: quarter(), series_points: series_points() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    /// momentum cutoff: `|g|^2 K` below this
    #[serde(default = "tail_tol")]
    pub tail_tol: f64,
    /// Chebyshev degree per momentum panel
    #[serde(default = "degree")]
    pub degree: usize,
    #[serde(default = "fit_tol")]
    pub fit_tol: f64,
    #[serde(default = "time_abs_tol")]
    pub time_abs_tol: f64,
    #[serde(default = "time_rel_tol")]
    pub time_rel_tol: f64,
    #[serde(default = "max_intervals")]
    pub max_intervals: usize,
    /// RK4 step of the radial solver
    #[serde(default = "potential_step")]
    pub potential_step: f64,
    /// samples of the momentum spectrum file
    #[serde(default = "spectrum_points")]
    pub spectrum_points: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            tail_tol: tail_tol(),
            degree: degree(),
            fit_tol: fit_tol(),
            time_abs_tol: time_abs_tol(),
            time_rel_tol: time_rel_tol(),
            max_intervals: max_intervals(),
            potential_step: potential_step(),
            spectrum_points: spectrum_points(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Gnuplot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "results_dir")]
    pub directory: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: results_dir(), formats: all_formats() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "lambda_step")]
    pub lambda_step: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { lambda_min: lambda_min(), lambda_max: lambda_max(), lambda_step: lambda_step() }
    }
}

impl ScanConfig {
    pub fn lambdas(&self) -> Vec<f64> {
        let n = ((self.lambda_max - self.lambda_min) / self.lambda_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.lambda_min + i as f64 * self.lambda_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    #[serde(default = "orders")]
    pub orders: Vec<u32>,
    /// upper end of the fitted momentum window `[k_hi / 100, k_hi]`
    #[serde(default = "k_hi")]
    pub k_hi: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig { orders: orders(), k_hi: k_hi() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JkConfig {
    #[serde(default = "jk_momenta")]
    pub momenta: Vec<f64>,
    #[serde(default = "jk_radii")]
    pub radii: Vec<f64>,
}

impl Default for JkConfig {
    fn default() -> Self {
        JkConfig { momenta: jk_momenta(), radii: jk_radii() }
    }
}

fn one() -> f64 {
    1.0
}
fn pi() -> f64 {
    PI
}
fn quarter() -> f64 {
    0.25
}
fn z_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}
fn default_radii() -> Vec<f64> {
    vec![20.0, 40.0, 80.0]
}
fn series_points() -> usize {
    400
}
fn tail_tol() -> f64 {
    1e-10
}
fn degree() -> usize {
    24
}
fn fit_tol() -> f64 {
    1e-13
}
fn time_abs_tol() -> f64 {
    1e-8
}
fn time_rel_tol() -> f64 {
    1e-6
}
fn max_intervals() -> usize {
    20000
}
fn potential_step() -> f64 {
    5e-4
}
fn spectrum_points() -> usize {
    200
}
fn results_dir() -> PathBuf {
    PathBuf::from("results")
}
fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv, Format::Gnuplot]
}
fn lambda_min() -> f64 {
    0.8
}
fn lambda_max() -> f64 {
    1.2
}
fn lambda_step() -> f64 {
    0.01
}
fn orders() -> Vec<u32> {
    vec![0, 1, 2]
}
fn k_hi() -> f64 {
    400.0
}
fn jk_momenta() -> Vec<f64> {
    vec![1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3]
}
fn jk_radii() -> Vec<f64> {
    vec![0.5, 1.0, 3.0, 8.0]
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

fn finite3(key: &str, v: [f64; 3]) -> Result<(), ConfigError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(bad(key, "components must be finite"))
    }
}

/// Parse and validate a config file. Relative table paths are resolved
/// against the config file's directory.
pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad("<file>", format!("{}: {e}", path.display())))?;
    let mut cfg = parse(&text)?;
    if let ModelConfig::Potential(PotentialConfig { family: Family::Table { path: table }, .. }) = &mut cfg.model {
        if table.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            *table = base.join(&*table);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parse JSON text without validation.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        ConfigError { key: if key == "." { "<root>".into() } else { key }, message: e.into_inner().to_string() }
    })
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.model {
            ModelConfig::Free => {}
            ModelConfig::Point { gamma } => {
                if !gamma.is_finite() {
                    return Err(bad("model.point.gamma", "must be finite"));
                }
            }
            ModelConfig::Potential(p) => {
                positive("model.potential.lambda", p.lambda)?;
                match &p.family {
                    Family::Bargmann { b } => positive("model.potential.family.bargmann.b", *b)?,
                    Family::GaussianWell { depth, width } => {
                        positive("model.potential.family.gaussian_well.depth", *depth)?;
                        positive("model.potential.family.gaussian_well.width", *width)?;
                    }
                    Family::Table { path } => {
                        if !path.is_file() {
                            return Err(bad("model.potential.family.table.path", format!("{} does not exist", path.display())));
                        }
                    }
                }
            }
        }
        let p = &self.packet;
        positive("packet.sigma", p.sigma)?;
        if !(p.shell_offset >= 0.0 && p.shell_offset.is_finite()) {
            return Err(bad("packet.shell_offset", "must be non-negative and finite"));
        }
        finite3("packet.boost", p.boost)?;
        if p.shell_offset > 0.0 && p.boost.iter().any(|&b| b != 0.0) {
            return Err(bad("packet.boost", "a shell packet cannot be boosted"));
        }
        if matches!(self.model, ModelConfig::Potential(_)) && p.boost.iter().any(|&b| b != 0.0) {
            return Err(bad("packet.boost", "potential models take radial packets only"));
        }
        finite3("cone.axis", self.cone.axis)?;
        if self.cone.axis.iter().all(|&a| a == 0.0) {
            return Err(bad("cone.axis", "must be nonzero"));
        }
        if !(self.cone.theta > 0.0 && self.cone.theta <= PI) {
            return Err(bad("cone.theta", format!("must lie in (0, pi], got {}", self.cone.theta)));
        }
        for (i, r) in self.radii.iter().enumerate() {
            positive(&format!("radii[{i}]"), *r)?;
        }
        let t = &self.time;
        if !(t.t1 >= 0.0 && t.t1.is_finite()) {
            return Err(bad("time.t1", "must be non-negative; negative times are not supported"));
        }
        if let Some(t2) = t.t2 {
            if !(t2 > t.t1 && t2.is_finite()) {
                return Err(bad("time.t2", "must exceed time.t1"));
            }
        }
        positive("time.t2_factor", t.t2_factor)?;
        if t.series_points < 2 {
            return Err(bad("time.series_points", "need at least 2"));
        }
        let n = &self.numerics;
        positive("numerics.tail_tol", n.tail_tol)?;
        positive("numerics.fit_tol", n.fit_tol)?;
        positive("numerics.time_abs_tol", n.time_abs_tol)?;
        positive("numerics.time_rel_tol", n.time_rel_tol)?;
        positive("numerics.potential_step", n.potential_step)?;
        if !(4..=64).contains(&n.degree) {
            return Err(bad("numerics.degree", "must lie in 4..=64"));
        }
        if n.max_intervals < 16 {
            return Err(bad("numerics.max_intervals", "must be at least 16"));
        }
        if n.spectrum_points < 2 {
            return Err(bad("numerics.spectrum_points", "need at least 2"));
        }
        if self.workers == Some(0) {
            return Err(bad("workers", "must be at least 1"));
        }
        let s = &self.scan;
        positive("scan.lambda_min", s.lambda_min)?;
        positive("scan.lambda_step", s.lambda_step)?;
        if !(s.lambda_max >= s.lambda_min && s.lambda_max.is_finite()) {
            return Err(bad("scan.lambda_max", "must not be below scan.lambda_min"));
        }
        if (s.lambda_max - s.lambda_min) / s.lambda_step > 1e4 {
            return Err(bad("scan.lambda_step", "more than 10000 couplings"));
        }
        if self.decay.orders.is_empty() || self.decay.orders.iter().any(|&m| m > 5) {
            return Err(bad("decay.orders", "orders must be a non-empty subset of 0..=5"));
        }
        positive("decay.k_hi", self.decay.k_hi)?;
        if self.jk.momenta.len() < 3 {
            return Err(bad("jk.momenta", "need at least three momenta"));
        }
        for (i, k) in self.jk.momenta.iter().enumerate() {
            positive(&format!("jk.momenta[{i}]"), *k)?;
        }
        if self.jk.radii.is_empty() {
            return Err(bad("jk.radii", "need at least one radius"));
        }
        for (i, r) in self.jk.radii.iter().enumerate() {
            positive(&format!("jk.radii[{i}]"), *r)?;
        }
        Ok(())
    }
}
