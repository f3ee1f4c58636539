//! TOML experiment configuration.
//!
//! ```toml
//! alpha = 0.39            # defaults to the first sensor's q
//! algorithm = "fast"      # oracle | fast | memoryless
//! stages = 200
//! trials = 100000
//! seed = 7
//! normalize = false       # flip counterproductive sensors instead of rejecting
//!
//! [[sensors]]
//! p = 0.61
//! q = 0.39
//!
//! # or, instead of [[sensors]]:
//! [model]
//! amplitude = 2.0
//! sigma2 = 5.0            # or snr_db = -4.0
//! y_star = 1.0
//! count = 4
//! ```

use std::path::Path;

use npfusion::sim::GaussianSensorModel;
use npfusion::{Alpha, Fleet, SensorProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Oracle,
    Fast,
    Memoryless,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Oracle => "oracle",
            Algorithm::Fast => "fast",
            Algorithm::Memoryless => "memoryless",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProfile {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub amplitude: f64,
    pub sigma2: Option<f64>,
    pub snr_db: Option<f64>,
    pub y_star: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub sensors: Option<Vec<RawProfile>>,
    pub model: Option<ModelSection>,
    pub alpha: Option<f64>,
    pub algorithm: Option<Algorithm>,
    pub stages: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub normalize: bool,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub fleet: Fleet,
    pub alpha: Alpha,
    /// Indices of sensors whose outputs were flipped during normalization.
    pub flipped: Vec<usize>,
    pub model: Option<GaussianSensorModel>,
    /// Hex SHA-256 of the configuration file bytes.
    pub hash: String,
}

pub const DEFAULT_STAGES: usize = 200;
pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_raw(raw, sha256_hex(text.as_bytes()))
    }

    pub fn from_raw(raw: RawConfig, hash: String) -> Result<Self, CliError> {
        let (profiles, model) = match (&raw.sensors, &raw.model) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either [[sensors]] or [model], not both".into())),
            (None, None) => return Err(CliError::Config("missing [[sensors]] or [model]".into())),
            (Some(list), None) => {
                let profiles = list.iter().map(|s| SensorProfile::new(s.p, s.q)).collect::<Result<Vec<_>, _>>()?;
                (profiles, None)
            }
            (None, Some(m)) => {
                let model = match (m.sigma2, m.snr_db) {
                    (Some(s2), None) => GaussianSensorModel::new(m.amplitude, s2, m.y_star)?,
                    (None, Some(db)) => GaussianSensorModel::from_snr(m.amplitude, db, m.y_star)?,
                    _ => return Err(CliError::Config("[model] needs exactly one of sigma2 or snr_db".into())),
                };
                if m.count == 0 {
                    return Err(CliError::Config("[model] count must be at least 1".into()));
                }
                (vec![model.profile()?; m.count], Some(model))
            }
        };
        if profiles.is_empty() {
            return Err(CliError::Config("sensor list is empty".into()));
        }
        let (fleet, flipped) = if raw.normalize {
            let (fleet, flags) = Fleet::normalized(profiles)?;
            (fleet, flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect())
        } else {
            (Fleet::new(profiles)?, Vec::new())
        };
        let alpha = Alpha::new(raw.alpha.unwrap_or(fleet.sensors()[0].q()))?;
        if raw.stages == Some(0) {
            return Err(CliError::Config("stages must be at least 1".into()));
        }
        if raw.trials == Some(0) {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        Ok(Self { raw, fleet, alpha, flipped, model, hash })
    }

    pub fn stages(&self) -> usize {
        self.raw.stages.unwrap_or(DEFAULT_STAGES)
    }

    pub fn trials(&self) -> u64 {
        self.raw.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn seed(&self) -> u64 {
        self.raw.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.raw.algorithm.unwrap_or(Algorithm::Fast)
    }
}
