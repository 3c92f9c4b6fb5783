//! Solver configuration files: a JSON object with the optimizer keys
//! `learning_rate`, `iterations`, `beta1`, `beta2`, `eps`. Missing keys
//! fall back to the engine defaults.

use std::fs;
use std::path::Path;

use dexfit_core::solver::SolveConfig;
use serde::{Deserialize, Serialize};

use super::{invalid, to_json_bytes, FormatError};
use crate::manifest::write_atomic;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigRecord {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_learning_rate() -> f64 {
    SolveConfig::default().learning_rate
}
fn default_iterations() -> usize {
    SolveConfig::default().iterations
}
fn default_beta1() -> f64 {
    SolveConfig::default().beta1
}
fn default_beta2() -> f64 {
    SolveConfig::default().beta2
}
fn default_eps() -> f64 {
    SolveConfig::default().eps
}

impl ConfigRecord {
    pub fn from_config(config: &SolveConfig) -> Self {
        ConfigRecord {
            learning_rate: config.learning_rate,
            iterations: config.iterations,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
        }
    }

    pub fn to_config(&self) -> Result<SolveConfig, FormatError> {
        let config = SolveConfig {
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        };
        config
            .validate()
            .map_err(|e| invalid(format!("config rejected: {e}")))?;
        Ok(config)
    }
}

pub fn save_config(path: &Path, config: &SolveConfig) -> Result<(), FormatError> {
    write_atomic(path, &to_json_bytes(&ConfigRecord::from_config(config))?)?;
    Ok(())
}

pub fn load_config(path: &Path) -> Result<SolveConfig, FormatError> {
    let record: ConfigRecord = serde_json::from_str(&fs::read_to_string(path)?)?;
    record.to_config()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_round_trip_and_default_missing_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let config = SolveConfig {
            learning_rate: 0.02,
            iterations: 17,
            ..SolveConfig::default()
        };
        save_config(&path, &config).unwrap();
        assert_eq!(load_config(&path).unwrap(), config);

        std::fs::write(&path, r#"{"iterations": 5}"#).unwrap();
        let partial = load_config(&path).unwrap();
        assert_eq!(partial.iterations, 5);
        assert_eq!(partial.learning_rate, SolveConfig::default().learning_rate);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"iterations": 0}"#).unwrap();
        assert!(matches!(load_config(&path), Err(FormatError::Invalid(_))));
    }
}
