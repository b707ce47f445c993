//! Experiment configuration: a JSON file, overridable field by field from
//! the command line.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Coalesce,
    Cftp,
    GapExact,
    TvExact,
    Schedule,
    Monitor,
    Fluctuations,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Coalesce => "coalesce",
            Experiment::Cftp => "cftp",
            Experiment::GapExact => "gap-exact",
            Experiment::TvExact => "tv-exact",
            Experiment::Schedule => "schedule",
            Experiment::Monitor => "monitor",
            Experiment::Fluctuations => "fluctuations",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Sos,
    Surface,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sos => "sos",
            ModelKind::Surface => "surface",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Default,
    Scaled,
}

/// Everything an experiment reads. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ModelKind,
    /// linear size: SOS length, or side of the square surface region
    #[serde(rename = "L")]
    pub l: usize,
    /// extra sizes for sweeps; `L` alone when empty
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub h: i64,
    /// SOS height window `[-M, M+h]`; the bounded model `[-L, L+h]` when absent
    #[serde(default)]
    pub window: Option<i64>,
    /// SOS floor at the wall profile
    #[serde(default)]
    pub walls: bool,
    /// surface slope direction, normalised on use
    #[serde(default = "default_slope")]
    pub slope: [f64; 3],
    /// constant of the good-planar condition and of the cap base offset
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub replicas: usize,
    pub seed: u64,
    /// time horizon; experiment specific default when absent
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default = "default_alpha1")]
    pub alpha1: f64,
    /// fluctuation exponent for the generic schedule
    #[serde(default)]
    pub gamma: Option<f64>,
    /// fluctuation thresholds, in units of `sqrt(L)` (SOS) or `(ln L)^{1+eps}` (surface)
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_slope() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

fn default_c() -> f64 {
    1.0
}

fn default_profile() -> Profile {
    Profile::Scaled
}

fn default_alpha1() -> f64 {
    17.0
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), message: message.into() }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, model: ModelKind, l: usize, seed: u64) -> Self {
        Self {
            experiment,
            model,
            l,
            sizes: Vec::new(),
            h: 0,
            window: None,
            walls: false,
            slope: default_slope(),
            c: default_c(),
            replicas: 0,
            seed,
            horizon: None,
            profile: default_profile(),
            alpha1: default_alpha1(),
            gamma: None,
            thresholds: Vec::new(),
            out: default_out(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Sizes of a sweep: `sizes`, or `[L]`.
    pub fn size_list(&self) -> Vec<usize> {
        if self.sizes.is_empty() {
            vec![self.l]
        } else {
            self.sizes.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (i, &l) in self.size_list().iter().enumerate() {
            let path = if self.sizes.is_empty() { "L".to_string() } else { format!("sizes[{i}]") };
            if l == 0 {
                return Err(invalid(&path, "must be positive"));
            }
            if self.model == ModelKind::Sos && self.window.is_none() && !(0..=l as i64).contains(&self.h) {
                return Err(invalid("h", format!("need 0 <= h <= L = {l}")));
            }
            if matches!(self.experiment, Experiment::Schedule | Experiment::Monitor) && l < 8 {
                return Err(invalid(&path, "schedules need L >= 8"));
            }
        }
        if self.h < 0 {
            return Err(invalid("h", "must be nonnegative"));
        }
        if let Some(m) = self.window {
            if m < 0 {
                return Err(invalid("window", "must be nonnegative"));
            }
        }
        if self.slope.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(invalid("slope", "components must be positive and finite"));
        }
        if !(self.c > 0.0) {
            return Err(invalid("c", "must be positive"));
        }
        if let Some(t) = self.horizon {
            if !(t > 0.0) || !t.is_finite() {
                return Err(invalid("horizon", "must be positive and finite"));
            }
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(invalid("gamma", "must lie in [0, 1)"));
            }
        }
        if self.walls && self.model != ModelKind::Sos {
            return Err(invalid("walls", "only the SOS model has a wall"));
        }
        for (i, &a) in self.thresholds.iter().enumerate() {
            if !(a > 0.0) {
                return Err(invalid(&format!("thresholds[{i}]"), "must be positive"));
            }
        }
        Ok(())
    }

    /// Canonical JSON of the configuration.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
