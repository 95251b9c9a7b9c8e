//! Experiment configuration: a TOML document whose every value can be
//! overridden from the command line.

use std::fmt;
use std::path::PathBuf;

use harnack_core::harnack::HarnackInputs;
use harnack_core::{Point, StableParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError { field: field.to_string(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}: {}", self.field, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    One,
    GreenCapped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Process {
    pub d: usize,
    pub alpha: f64,
}

impl Default for Process {
    fn default() -> Self {
        Process { d: 2, alpha: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// Base point; empty means the origin.
    pub center: Vec<f64>,
    pub radius: f64,
    /// Shrink ratio used by the condition checks.
    pub theta: f64,
    /// KS obstacle radii as fractions of `θr`.
    pub obstacle_fractions: Vec<f64>,
    /// `|y - x| / r` for the hitting-probability check; walks are truncated
    /// from `4r` on.
    pub distance_ratios: Vec<f64>,
    /// Radii for the scale-invariance checks.
    pub radii: Vec<f64>,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            center: vec![],
            radius: 1.0,
            theta: 0.25,
            obstacle_fractions: vec![0.25, 0.125, 0.0625],
            distance_ratios: vec![1.01, 1.5, 3.0],
            radii: vec![0.5, 1.0, 10.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative quadrature tolerance for every check; unset means each
    /// check's own default.
    pub quad_rel_tol: Option<f64>,
    pub mc_paths: u64,
    pub ci_level: f64,
    /// Walks per truncation radius in the hitting-probability check.
    pub hitting_paths: u64,
    /// Random samples for the sampled inequality checks.
    pub trials: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { quad_rel_tol: None, mc_paths: 1_000_000, hitting_paths: 100_000, ci_level: 0.99, trials: 100_000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub a1: Option<f64>,
    pub eta: Option<f64>,
    pub c: Option<f64>,
    pub c0: Option<f64>,
    pub c_j: Option<f64>,
}

impl Constants {
    pub fn any_set(&self) -> bool {
        [self.theta1, self.theta2, self.a1, self.eta, self.c, self.c0, self.c_j].iter().any(Option::is_some)
    }

    pub fn inputs(&self) -> Result<HarnackInputs, ConfigError> {
        let get =
            |v: Option<f64>, name: &str| v.ok_or_else(|| ConfigError::new(&format!("constants.{name}"), "missing"));
        Ok(HarnackInputs {
            theta1: get(self.theta1, "theta1")?,
            theta2: get(self.theta2, "theta2")?,
            a1: get(self.a1, "a1")?,
            eta: get(self.eta, "eta")?,
            c: get(self.c, "c")?,
            c0: get(self.c0, "c0")?,
            c_j: get(self.c_j, "c_j")?,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityCfg {
    /// Lattice spacings relative to the radius, coarse to fine; empty picks
    /// a default for the dimension.
    pub spacings: Vec<f64>,
}

impl CapacityCfg {
    pub fn spacings_for(&self, d: usize) -> Vec<f64> {
        if !self.spacings.is_empty() {
            return self.spacings.clone();
        }
        match d {
            1 => vec![0.05, 0.02, 0.01],
            2 => vec![0.2, 0.1, 0.07],
            _ => vec![0.5, 0.35, 0.25],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnackCfg {
    /// Grid points per axis on `U(x0, θR)`.
    pub grid: usize,
    pub chain_terms: usize,
    /// Number of `δ` values in the Hölder fit.
    pub deltas: usize,
}

impl Default for HarnackCfg {
    fn default() -> Self {
        HarnackCfg { grid: 7, chain_terms: 50, deltas: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntrinsicCfg {
    pub points: usize,
    pub weight: WeightKind,
    /// Half side of the sampling box around the base point.
    pub half_width: f64,
}

impl Default for IntrinsicCfg {
    fn default() -> Self {
        IntrinsicCfg { points: 200, weight: WeightKind::GreenCapped, half_width: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxiomsCfg {
    pub configs: usize,
}

impl Default for AxiomsCfg {
    fn default() -> Self {
        AxiomsCfg { configs: 20 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineCfg {
    /// Checks run by `pipeline`; empty means all.
    pub checks: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
    pub plain: bool,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: PathBuf::from("harnack-out"), format: Format::Both, plain: false, jobs: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub process: Process,
    pub geometry: Geometry,
    pub tolerances: Tolerances,
    pub constants: Constants,
    pub capacity: CapacityCfg,
    pub harnack: HarnackCfg,
    pub intrinsic: IntrinsicCfg,
    pub axioms: AxiomsCfg,
    pub pipeline: PipelineCfg,
    pub output: Output,
}

pub const ALL_CHECKS: [&str; 17] = [
    "verify-axioms",
    "verify-iw",
    "kkz",
    "profile",
    "hj",
    "j0",
    "lambda-g",
    "ggb",
    "g3",
    "ks",
    "capacity",
    "constants",
    "chain",
    "harnack",
    "holder",
    "truncation",
    "metrize",
];

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be a positive finite number, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("config", e.message().to_string()))
    }

    pub fn params(&self) -> Result<StableParams, ConfigError> {
        StableParams::new(self.process.d, self.process.alpha).map_err(|e| {
            let field = if (1..=3).contains(&self.process.d) { "process.alpha" } else { "process.d" };
            ConfigError::new(field, e.to_string())
        })
    }

    pub fn center(&self) -> Point {
        if self.geometry.center.is_empty() {
            Point::ORIGIN
        } else {
            Point::new(&self.geometry.center)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()?;
        let d = self.process.d;
        let g = &self.geometry;
        if !g.center.is_empty() && g.center.len() != d {
            return Err(ConfigError::new("geometry.center", format!("needs {d} coordinates, got {}", g.center.len())));
        }
        if g.center.iter().any(|c| !c.is_finite()) {
            return Err(ConfigError::new("geometry.center", "coordinates must be finite"));
        }
        positive("geometry.radius", g.radius)?;
        if !(g.theta > 0.0 && g.theta < 1.0 / 3.0) {
            return Err(ConfigError::new("geometry.theta", format!("must lie in (0, 1/3), got {}", g.theta)));
        }
        for f in &g.obstacle_fractions {
            if !(*f > 0.0 && *f < 0.5) {
                return Err(ConfigError::new(
                    "geometry.obstacle_fractions",
                    format!("each must lie in (0, 1/2), got {f}"),
                ));
            }
        }
        for r in &g.distance_ratios {
            if !(*r > 1.0 && *r < 4.0) {
                return Err(ConfigError::new("geometry.distance_ratios", format!("each must lie in (1, 4), got {r}")));
            }
        }
        for r in &g.radii {
            positive("geometry.radii", *r)?;
        }
        let t = &self.tolerances;
        if let Some(q) = t.quad_rel_tol {
            if !(q > 0.0 && q < 1.0) {
                return Err(ConfigError::new("tolerances.quad_rel_tol", format!("must lie in (0, 1), got {q}")));
            }
        }
        if t.mc_paths == 0 {
            return Err(ConfigError::new("tolerances.mc_paths", "must be positive"));
        }
        if !(t.ci_level > 0.0 && t.ci_level < 1.0) {
            return Err(ConfigError::new("tolerances.ci_level", format!("must lie in (0, 1), got {}", t.ci_level)));
        }
        if t.hitting_paths == 0 {
            return Err(ConfigError::new("tolerances.hitting_paths", "must be positive"));
        }
        if t.trials == 0 {
            return Err(ConfigError::new("tolerances.trials", "must be positive"));
        }
        if self.constants.any_set() {
            let inp = self.constants.inputs()?;
            inp.validate().map_err(|e| ConfigError::new("constants", e.to_string()))?;
        }
        for h in &self.capacity.spacings {
            if !(*h > 0.0 && *h <= 1.0) {
                return Err(ConfigError::new("capacity.spacings", format!("each must lie in (0, 1], got {h}")));
            }
        }
        if self.harnack.grid < 2 {
            return Err(ConfigError::new("harnack.grid", "need at least 2 points per axis"));
        }
        if self.harnack.chain_terms == 0 {
            return Err(ConfigError::new("harnack.chain_terms", "must be positive"));
        }
        if self.harnack.deltas < 2 {
            return Err(ConfigError::new("harnack.deltas", "need at least 2 scales for a fit"));
        }
        if !(3..=harnack_core::intrinsic::MAX_CLOUD).contains(&self.intrinsic.points) {
            return Err(ConfigError::new(
                "intrinsic.points",
                format!("must lie in 3..={}", harnack_core::intrinsic::MAX_CLOUD),
            ));
        }
        positive("intrinsic.half_width", self.intrinsic.half_width)?;
        if self.axioms.configs == 0 {
            return Err(ConfigError::new("axioms.configs", "must be positive"));
        }
        for c in &self.pipeline.checks {
            if !ALL_CHECKS.contains(&c.as_str()) {
                return Err(ConfigError::new("pipeline.checks", format!("unknown check `{c}`")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the configuration without its output section, which does
    /// not influence results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = Output::default();
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = ExperimentConfig::default();
        c.process.alpha = 2.5;
        assert_eq!(c.validate().unwrap_err().field, "process.alpha");
        let c = ExperimentConfig::from_toml("[process]\nalpah = 1.0\n").unwrap_err();
        assert!(c.message.contains("alpah"));
        let mut c = ExperimentConfig::default();
        c.constants.eta = Some(0.25);
        assert_eq!(c.validate().unwrap_err().field, "constants.theta1");
    }

    #[test]
    fn hash_ignores_output() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 3;
        assert_ne!(a.hash(), b.hash());
    }
}
