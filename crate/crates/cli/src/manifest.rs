//! Provenance record written next to (or inside) every output.

use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig, RawConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub config_sha256: Option<String>,
    pub config: Option<RawConfig>,
    pub alpha: Option<f64>,
    pub normalized_sensors: Vec<usize>,
    pub algorithm: Option<Algorithm>,
    pub stages: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: Some(cfg.hash.clone()),
            config: Some(cfg.raw.clone()),
            alpha: Some(cfg.alpha.value()),
            normalized_sensors: cfg.flipped.clone(),
            algorithm: None,
            stages: None,
            trials: None,
            seed: None,
        }
    }

    pub fn without_config(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: None,
            config: None,
            alpha: None,
            normalized_sensors: Vec::new(),
            algorithm: None,
            stages: None,
            trials: None,
            seed: None,
        }
    }

    pub fn with_run(mut self, algo: Algorithm, stages: usize, trials: u64, seed: u64) -> Self {
        self.algorithm = Some(algo);
        self.stages = Some(stages);
        self.trials = Some(trials);
        self.seed = Some(seed);
        self
    }

    pub fn to_json_line(&self) -> Result<String, CliError> {
        serde_json::to_string(self).map_err(|e| CliError::Serialize(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Serialize(e.to_string()))
    }
}
