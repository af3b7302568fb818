//! Experiment configuration files.

use std::path::{Path, PathBuf};

use adact_core::activations::{DEFAULT_LEAKY_SLOPE, DEFAULT_RANGE_MARGIN};
use adact_core::trainers::{ActivationOptimizer, AdamParams, TrainConfig, TrainerKind};
use adact_core::{DatasetKind, Reference};
use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    GenSine,
    GenRosenbrock,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: Source,
    /// Source-specific parameters, checked once the source is known.
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
    /// Z-score inputs with training-split statistics.
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineParams {
    #[serde(default = "sine_train")]
    pub n_train: usize,
    #[serde(default = "sine_test")]
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
}

fn sine_train() -> usize {
    5000
}

fn sine_test() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosenbrockParams {
    #[serde(default = "rosenbrock_train")]
    pub n_train: usize,
    #[serde(default = "rosenbrock_test")]
    pub n_test: usize,
    #[serde(default)]
    pub seed: u64,
}

fn rosenbrock_train() -> usize {
    800
}

fn rosenbrock_test() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvParams {
    pub path: PathBuf,
    pub n_inputs: usize,
    pub n_outputs: usize,
    #[serde(default = "approximation")]
    pub kind: DatasetKind,
    /// Separate test file; otherwise the last `test_fraction` of rows is held out.
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    #[serde(default)]
    pub test_fraction: f64,
}

fn approximation() -> DatasetKind {
    DatasetKind::Approximation
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataParams {
    Sine(SineParams),
    Rosenbrock(RosenbrockParams),
    Csv(CsvParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "N_h")]
    pub hidden: usize,
    #[serde(rename = "H", default = "default_hinges")]
    pub hinges: usize,
    #[serde(default = "sigmoid")]
    pub init_activation: Reference,
    #[serde(default = "leaky_slope")]
    pub leaky_slope: f64,
    #[serde(default = "unit_sigma")]
    pub weight_sigma: f64,
    #[serde(default = "range_margin")]
    pub range_margin: f64,
}

fn default_hinges() -> usize {
    20
}

fn sigmoid() -> Reference {
    Reference::Sigmoid
}

fn leaky_slope() -> f64 {
    DEFAULT_LEAKY_SLOPE
}

fn unit_sigma() -> f64 {
    1.0
}

fn range_margin() -> f64 {
    DEFAULT_RANGE_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "adact")]
    pub trainer: TrainerKind,
    #[serde(rename = "N_it")]
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "olf")]
    pub optimizer_for_acts: ActivationOptimizer,
    #[serde(default)]
    pub adam: AdamParams,
}

fn adact() -> TrainerKind {
    TrainerKind::Adact
}

fn olf() -> ActivationOptimizer {
    ActivationOptimizer::Olf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "ten")]
    pub k_folds: usize,
    /// Seed of the fold shuffle.
    #[serde(default)]
    pub seed: u64,
}

fn ten() -> usize {
    10
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { k_folds: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
}

fn parse_at<T: DeserializeOwned>(value: &serde_json::Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { prefix.to_owned() } else { format!("{prefix}.{path}") };
        anyhow::anyhow!("invalid config at `{at}`: {}", e.inner())
    })
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("invalid config at `{path}`: {}", e.inner())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn data_params(&self) -> Result<DataParams> {
        let p = &self.data.params;
        Ok(match self.data.source {
            Source::GenSine => DataParams::Sine(parse_at(p, "data.params")?),
            Source::GenRosenbrock => DataParams::Rosenbrock(parse_at(p, "data.params")?),
            Source::Csv => DataParams::Csv(parse_at(p, "data.params")?),
        })
    }

    /// Checks every field before any work starts.
    pub fn validate(&self) -> Result<()> {
        match self.data_params()? {
            DataParams::Sine(p) => {
                if p.n_train == 0 {
                    bail!("invalid config at `data.params.n_train`: must be at least 1");
                }
            }
            DataParams::Rosenbrock(p) => {
                if p.n_train == 0 {
                    bail!("invalid config at `data.params.n_train`: must be at least 1");
                }
            }
            DataParams::Csv(p) => {
                if p.n_inputs == 0 || p.n_outputs == 0 {
                    bail!("invalid config at `data.params`: n_inputs and n_outputs must be positive");
                }
                if !(0.0..1.0).contains(&p.test_fraction) {
                    bail!("invalid config at `data.params.test_fraction`: must lie in [0, 1)");
                }
            }
        }
        if self.model.hidden == 0 {
            bail!("invalid config at `model.N_h`: must be at least 1");
        }
        if self.model.hinges < 2 {
            bail!("invalid config at `model.H`: must be at least 2");
        }
        if !(self.model.weight_sigma >= 0.0) {
            bail!("invalid config at `model.weight_sigma`: must be non-negative");
        }
        if !(self.model.range_margin >= 0.0) {
            bail!("invalid config at `model.range_margin`: must be non-negative");
        }
        if self.train.iterations == 0 {
            bail!("invalid config at `train.N_it`: must be at least 1");
        }
        if self.eval.k_folds < 2 {
            bail!("invalid config at `eval.k_folds`: must be at least 2");
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            trainer: self.train.trainer,
            iterations: self.train.iterations,
            hidden: self.model.hidden,
            hinges: self.model.hinges,
            init_activation: self.model.init_activation,
            leaky_slope: self.model.leaky_slope,
            optimizer_for_acts: self.train.optimizer_for_acts,
            adam: self.train.adam,
            seed: self.train.seed,
            weight_sigma: self.model.weight_sigma,
            range_margin: self.model.range_margin,
        }
    }
}
