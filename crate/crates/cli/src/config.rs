use std::fs;
use std::path::{Path, PathBuf};

use dsb::evalbench::{BenchConfig, BenchVariant, RegressorSpec};
use dsb::irvae::{ArchitectureConfig, TrainConfig};
use dsb::latentgen::GenVariant;
use dsb::synthdata::SynthSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Settings for `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateSettings {
    pub variant: GenVariant,
    /// Defaults to the number of training rows.
    pub m: Option<usize>,
    pub hmult: f64,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        GenerateSettings {
            variant: GenVariant::Dsb,
            m: None,
            hmult: 1.0,
        }
    }
}

/// Settings for `benchmark`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub folds: usize,
    pub variants: Vec<BenchVariant>,
    pub regressors: Vec<RegressorSpec>,
    pub rare_quantile: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        let b = BenchConfig::default();
        EvalSettings {
            folds: b.folds,
            variants: b.variants,
            regressors: b.regressors,
            rare_quantile: b.rare_quantile,
        }
    }
}

/// Everything a run needs. Serialized verbatim into every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV input; when absent the synthetic dataset described by `synth` is used.
    pub data: Option<PathBuf>,
    /// Schema JSON for `data`; required with `data`.
    pub schema: Option<PathBuf>,
    /// Its `rng_seed` is replaced by the global `rng_seed`.
    pub synth: SynthSpec,
    /// Its `rng_seed` is derived from the global `rng_seed`.
    pub train: TrainConfig,
    pub arch: ArchitectureConfig,
    pub generate: GenerateSettings,
    pub eval: EvalSettings,
    pub out: PathBuf,
    pub rng_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            schema: None,
            synth: SynthSpec::default(),
            train: TrainConfig::default(),
            arch: ArchitectureConfig::default(),
            generate: GenerateSettings::default(),
            eval: EvalSettings::default(),
            out: PathBuf::from("out"),
            rng_seed: 0,
        }
    }
}

impl RunConfig {
    /// JSON, or TOML when the file name ends in `.toml`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn bench_config(&self) -> BenchConfig {
        BenchConfig {
            folds: self.eval.folds,
            variants: self.eval.variants.clone(),
            regressors: self.eval.regressors.clone(),
            rare_quantile: self.eval.rare_quantile,
            train: self.train.clone(),
            arch: self.arch.clone(),
            hmult: self.generate.hmult,
            m: self.generate.m,
            rng_seed: self.rng_seed,
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            rng_seed: self.rng_seed,
            ..self.synth.clone()
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
