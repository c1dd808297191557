//! Experiment configuration: a TOML file with a versioned schema.
//!
//! ```toml
//! schema_version = 1
//! seed = 42
//! suite = "duality"          # duality | inverse-flow | ruin | stationary | monotonicity | all
//! n_paths = 10000
//! grid_dt = 0.01
//! horizon = 30.0             # truncation horizon of the stationary and ruin suites
//! workers = 4
//! output_dir = "out"
//!
//! [probes]
//! ts = [0.5, 1.0, 2.0]
//! xs = [-1.0, 0.0, 1.0]
//! ys = [0.0, 1.0, 2.0]
//! levels = [0.5, 1.0, 2.0]
//!
//! [[models]]
//! preset = "drift-ou"
//!
//! [[models]]
//! name = "custom"
//! drift = [-1.0, 0.2]
//! jump_intensity = 2.0
//! jump_law = { kind = "point_mass", atoms = [{ du = 0.5, dl = 1.0, p = 1.0 }] }
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use gou_core::{preset, GaussianCov, JumpLaw2, Model, ModelSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Duality,
    InverseFlow,
    Ruin,
    Stationary,
    Monotonicity,
    All,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Duality,
        Suite::InverseFlow,
        Suite::Ruin,
        Suite::Stationary,
        Suite::Monotonicity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Duality => "duality",
            Suite::InverseFlow => "inverse-flow",
            Suite::Ruin => "ruin",
            Suite::Stationary => "stationary",
            Suite::Monotonicity => "monotonicity",
            Suite::All => "all",
        }
    }

    pub fn expand(self) -> Vec<Suite> {
        if self == Suite::All { Suite::ALL.to_vec() } else { vec![self] }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probes {
    #[serde(default = "default_ts")]
    pub ts: Vec<f64>,
    #[serde(default = "default_xs")]
    pub xs: Vec<f64>,
    #[serde(default = "default_ys")]
    pub ys: Vec<f64>,
    /// Start levels of the ruin suite.
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
}

fn default_ts() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_xs() -> Vec<f64> {
    vec![-1.0, 0.0, 1.0]
}

fn default_ys() -> Vec<f64> {
    vec![0.0, 1.0, 2.0]
}

fn default_levels() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

impl Default for Probes {
    fn default() -> Self {
        Self {
            ts: default_ts(),
            xs: default_xs(),
            ys: default_ys(),
            levels: default_levels(),
        }
    }
}

/// A preset reference or an inline model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<GaussianCov<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_intensity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_law: Option<JumpLaw2<f64>>,
}

impl ModelEntry {
    pub fn from_preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            name: None,
            drift: None,
            cov: None,
            jump_intensity: None,
            jump_law: None,
        }
    }

    fn has_inline_fields(&self) -> bool {
        self.drift.is_some() || self.cov.is_some() || self.jump_intensity.is_some() || self.jump_law.is_some()
    }

    pub fn label(&self) -> String {
        self.name.clone().or_else(|| self.preset.clone()).unwrap_or_else(|| "model".into())
    }
}

/// A model ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedModel {
    pub label: String,
    pub preset: Option<String>,
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default = "default_suite")]
    pub suite: Suite,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_grid_dt")]
    pub grid_dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub probes: Probes,
    pub models: Vec<ModelEntry>,
}

fn default_suite() -> Suite {
    Suite::All
}

fn default_n_paths() -> usize {
    10_000
}

fn default_grid_dt() -> f64 {
    1e-2
}

fn default_horizon() -> f64 {
    30.0
}

/// A configuration problem, anchored to a line of the source when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// First line assigning `key`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn line_of_model(text: &str, index: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim() == "[[models]]")
        .nth(index)
        .map(|(i, _)| i + 1)
}

impl ExperimentConfig {
    /// A config for one preset with its grid step and defaults everywhere else.
    pub fn for_preset(name: &str, seed: u64) -> Self {
        let grid_dt = preset(name).map_or(default_grid_dt(), |p| p.grid_dt);
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            suite: default_suite(),
            n_paths: default_n_paths(),
            grid_dt,
            horizon: default_horizon(),
            workers: None,
            output_dir: None,
            probes: Probes::default(),
            models: vec![ModelEntry::from_preset(name)],
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate_with(Some(text))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with(None)
    }

    fn validate_with(&self, text: Option<&str>) -> Result<(), ConfigError> {
        let at = |key: &str, message: String| ConfigError {
            line: text.and_then(|t| line_of_key(t, key)),
            message,
        };
        if self.schema_version != SCHEMA_VERSION {
            return Err(at(
                "schema_version",
                format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.n_paths == 0 {
            return Err(at("n_paths", "n_paths must be positive".into()));
        }
        if !(self.grid_dt > 0.0 && self.grid_dt.is_finite()) {
            return Err(at("grid_dt", format!("grid_dt must be positive, got {}", self.grid_dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(at("horizon", format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.workers == Some(0) {
            return Err(at("workers", "workers must be positive".into()));
        }
        let p = &self.probes;
        for (key, values) in [("ts", &p.ts), ("xs", &p.xs), ("ys", &p.ys), ("levels", &p.levels)] {
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(at(key, format!("probes.{key} must be a nonempty list of finite numbers")));
            }
        }
        if p.ts.iter().any(|t| *t <= 0.0) {
            return Err(at("ts", "probe times must be positive".into()));
        }
        if p.levels.iter().any(|t| *t < 0.0) {
            return Err(at("levels", "ruin levels must be nonnegative".into()));
        }
        if self.models.is_empty() {
            return Err(ConfigError {
                line: None,
                message: "at least one [[models]] entry is required".into(),
            });
        }
        for (i, m) in self.models.iter().enumerate() {
            m.resolve().map_err(|message| ConfigError {
                line: text.and_then(|t| line_of_model(t, i)),
                message: format!("models[{i}]: {message}"),
            })?;
        }
        let mut labels: Vec<String> = self.models.iter().map(|m| m.label()).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConfigError {
                line: None,
                message: format!("model name `{}` is used twice", w[0]),
            });
        }
        Ok(())
    }

    pub fn resolved_models(&self) -> Result<Vec<ResolvedModel>, ConfigError> {
        self.models
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.resolve().map_err(|message| ConfigError {
                    line: None,
                    message: format!("models[{i}]: {message}"),
                })
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON form, without the worker count and the
    /// output directory.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut canonical = self.clone();
        canonical.workers = None;
        canonical.output_dir = None;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

impl ModelEntry {
    fn resolve(&self) -> Result<ResolvedModel, String> {
        match &self.preset {
            Some(name) => {
                if self.has_inline_fields() {
                    return Err("a preset entry cannot also set model fields".into());
                }
                let p = preset(name).map_err(|e| e.to_string())?;
                Ok(ResolvedModel {
                    label: self.label(),
                    preset: Some(name.clone()),
                    model: p.model,
                })
            }
            None => {
                let name = self.name.clone().ok_or("an inline model needs a `name`")?;
                let spec = ModelSpec {
                    drift: self.drift.ok_or("an inline model needs a `drift`")?,
                    cov: self.cov.clone().unwrap_or_else(GaussianCov::zero),
                    jump_intensity: self.jump_intensity.unwrap_or(0.0),
                    jump_law: self.jump_law.clone(),
                };
                Ok(ResolvedModel {
                    label: name,
                    preset: None,
                    model: spec.build().map_err(|e| e.to_string())?,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
schema_version = 1
seed = 7
suite = "duality"
n_paths = 100

[[models]]
preset = "zero"

[[models]]
name = "custom"
drift = [-1.0, 0.2]
jump_intensity = 2.0
jump_law = { kind = "point_mass", atoms = [{ du = 0.5, dl = 1.0, p = 1.0 }] }
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ExperimentConfig::parse(GOOD).unwrap();
        assert_eq!(cfg.suite, Suite::Duality);
        assert_eq!(cfg.probes, Probes::default());
        let models = cfg.resolved_models().unwrap();
        assert_eq!(models[1].label, "custom");
        assert_eq!(*models[1].model.jump_intensity(), 2.0);
    }

    #[test]
    fn seed_is_required() {
        let err = ExperimentConfig::parse("schema_version = 1\n[[models]]\npreset = \"zero\"\n").unwrap_err();
        assert!(err.message.contains("seed"), "{err}");
    }

    #[test]
    fn errors_point_at_lines() {
        let text = GOOD.replace("n_paths = 100", "n_paths = 0");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.line, Some(5));
        let text = GOOD.replace("suite = \"duality\"", "suite = \"nope\"");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.line, Some(4));
        let text = GOOD.replace("preset = \"zero\"", "preset = \"nope\"");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.line, Some(7));
        assert!(err.message.contains("unknown preset"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = GOOD.replace("n_paths = 100", "n_path = 100");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.line, Some(5));
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let a = ExperimentConfig::parse(GOOD).unwrap();
        let mut b = a.clone();
        b.workers = Some(8);
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL.into_iter().chain([Suite::All]) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
    }
}
