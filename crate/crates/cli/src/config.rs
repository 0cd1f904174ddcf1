//! JSON configs for each command. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use depcens::copula::ArchimedeanCopula;
use depcens::datagen::{Builtin, SyntheticSpec};
use depcens::experiment::SweepConfig;
use depcens::family::Family;
use depcens::marginals::SurvivalMarginal;
use depcens::training::{ModelSpec, TrainConfig};

use crate::{io_err, CliError, CliResult};

pub(crate) fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Parses a config document, rejecting unknown keys.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T, serde_json::Error> {
    serde_json::from_str(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// Built-in synthetic dataset.
    pub spec: Option<Builtin>,
    /// Fully specified synthetic generator; overrides `spec`.
    pub custom: Option<SyntheticSpec>,
    /// Outcome CSV for semi-synthetic censoring.
    pub input: Option<PathBuf>,
    pub copula: Family,
    pub tau: Option<f64>,
    pub theta: Option<f64>,
    pub n: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            spec: None,
            custom: None,
            input: None,
            copula: Family::Independence,
            tau: None,
            theta: None,
            n: 5000,
            seed: 0,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub data: Option<PathBuf>,
    pub model: ModelSpec,
    pub train: TrainConfig,
    /// Seed for parameter initialisation; defaults to `train.seed`.
    pub init_seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub checkpoint: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Split file from `train`; when given only the test records are scored.
    pub split: Option<PathBuf>,
    pub bins: usize,
    pub grid: usize,
    pub tau_samples: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            data: None,
            truth: None,
            split: None,
            bins: 10,
            grid: depcens::metrics::DEFAULT_L1_GRID,
            tau_samples: 20_000,
            seed: 0,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepCmdConfig {
    pub sweep: SweepConfig,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub checkpoint: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub resolution: usize,
    pub samples: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            truth: None,
            resolution: 50,
            samples: 2000,
            seed: 0,
            out: None,
        }
    }
}

/// Generating model written next to synthetic and semi-synthetic datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthModel {
    pub event: SurvivalMarginal,
    pub censor: SurvivalMarginal,
    pub copula: ArchimedeanCopula,
}

/// Written to every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
}
