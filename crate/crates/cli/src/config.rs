use std::path::{Path, PathBuf};

use gate_core::eval::Method;
use gate_core::model::GateConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "GATE_CONFIG";

/// Simulated corpus and the template distance matrix built from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub node_count: usize,
    pub per_family: usize,
    /// 1 for the linear trait, 2 for the cubic one.
    pub trait_case: u8,
    pub seed: u64,
    /// Edge-frequency threshold of the template backbone.
    pub template_threshold: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            node_count: 68,
            per_family: 100,
            trait_case: 1,
            seed: 0,
            template_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceSection {
    pub seed: u64,
    /// Prior draws for predictive checks.
    pub ppc_draws: usize,
    pub y_grid: Vec<f64>,
    pub band_draws: usize,
    pub quantiles: (f64, f64),
    pub generate_count: usize,
    /// Conditional draws per trait value for mean networks and differences.
    pub mean_draws: usize,
    pub top_k: usize,
    /// Trait quantiles used for the difference when no values are given.
    pub diff_levels: (f64, f64),
}

impl Default for InferenceSection {
    fn default() -> Self {
        Self {
            seed: 0,
            ppc_draws: 1000,
            y_grid: (0..=14).map(|i| -1.5 + 0.25 * i as f64).collect(),
            band_draws: 500,
            quantiles: (0.025, 0.975),
            generate_count: 10,
            mean_draws: 100,
            top_k: 50,
            diff_levels: (0.1, 0.9),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub folds: usize,
    pub cv_seed: u64,
    pub pca_components: usize,
    pub methods: Vec<Method>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            folds: 5,
            cv_seed: 0,
            pca_components: 50,
            methods: Method::ALL.to_vec(),
        }
    }
}

/// Everything a run can be configured with. Every key has a default and
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusSection,
    pub model: GateConfig,
    pub inference: InferenceSection,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Reads `path`, or the file named by `GATE_CONFIG`, or the defaults.
    pub fn load(path: Option<&Path>) -> Result<(Self, Option<PathBuf>), CliError> {
        let path = path
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        match path {
            None => Ok((Self::default(), None)),
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| CliError::Io {
                    path: p.clone(),
                    source: e,
                })?;
                let cfg = Self::from_toml(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Ok((cfg, Some(p)))
            }
        }
    }
}
