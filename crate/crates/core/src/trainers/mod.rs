//! Training algorithms and the iteration driver.
//!
//! An AdAct iteration runs, in order: the MOLF input-weight step, the
//! hinge-height step, and the OWO output-weight solve. MOLF runs the same
//! sequence without the hinge-height step on fixed activations. CG and SCG
//! move every weight at once along a conjugate direction.

pub mod adaptive;
pub mod cg;
pub mod molf;
pub mod owo;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::activations::{fit_ranges, ActivationBank, Reference, DEFAULT_LEAKY_SLOPE, DEFAULT_RANGE_MARGIN};
use crate::burden::{burden, Algorithm, BurdenInput};
use crate::data::{Dataset, DatasetKind};
use crate::error::{Error, Result};
use crate::network::{mse, pe, HiddenActivation, MlpNetwork};

pub use adaptive::{
    activation_gradient, activation_olf, update_activations, ActivationGradient, ActivationLearningFactor,
    ActivationUpdate, AdamParams, AdamState,
};
pub use cg::{CgOutcome, CgVariant, ConjugateGradient, LeastSquaresObjective, NetworkObjective};
pub use molf::{input_weight_gradient, molf_step, MolfOutcome};
pub use owo::{owo_step, OwoOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerKind {
    Adact,
    Molf,
    Cg,
    Scg,
}

impl TrainerKind {
    pub fn name(self) -> &'static str {
        match self {
            TrainerKind::Adact => "adact",
            TrainerKind::Molf => "molf",
            TrainerKind::Cg => "cg",
            TrainerKind::Scg => "scg",
        }
    }

    fn algorithm(self) -> Algorithm {
        match self {
            TrainerKind::Adact => Algorithm::Adact,
            TrainerKind::Molf => Algorithm::Molf,
            TrainerKind::Cg => Algorithm::Cg,
            TrainerKind::Scg => Algorithm::Scg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationOptimizer {
    Olf,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub trainer: TrainerKind,
    pub iterations: usize,
    pub hidden: usize,
    pub hinges: usize,
    pub init_activation: Reference,
    pub leaky_slope: f64,
    pub optimizer_for_acts: ActivationOptimizer,
    pub adam: AdamParams,
    pub seed: u64,
    /// Standard deviation of the initial input weights.
    pub weight_sigma: f64,
    /// Fraction of the initial net span added on each side of the hinge range.
    pub range_margin: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            trainer: TrainerKind::Adact,
            iterations: 100,
            hidden: 1,
            hinges: 20,
            init_activation: Reference::Sigmoid,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            optimizer_for_acts: ActivationOptimizer::Olf,
            adam: AdamParams::default(),
            seed: 0,
            weight_sigma: 1.0,
            range_margin: DEFAULT_RANGE_MARGIN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.hidden < 1 {
            return Err(Error::Config("hidden must be at least 1".into()));
        }
        if self.hinges < 2 {
            return Err(Error::InvalidHingeCount(self.hinges));
        }
        if !(self.weight_sigma >= 0.0) || !(self.range_margin >= 0.0) {
            return Err(Error::Config("weight_sigma and range_margin must be non-negative".into()));
        }
        Ok(())
    }
}

/// One row of training history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub val_pe: Option<f64>,
    /// Hinge-height learning factor (AdAct with OLF updates only).
    pub z_act: Option<f64>,
    pub multiplies_cumulative: u128,
    /// Training MSE immediately before and after the OWO solve, when one ran.
    pub owo: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub records: Vec<IterationRecord>,
    pub network: MlpNetwork,
}

impl TrainRun {
    pub fn final_train_mse(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.train_mse)
    }

    /// History as CSV: `iteration,train_mse,val_mse,val_pe,z_act,multiplies_cumulative`.
    pub fn write_history_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "iteration,train_mse,val_mse,val_pe,z_act,multiplies_cumulative")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration,
                r.train_mse,
                opt(r.val_mse),
                opt(r.val_pe),
                opt(r.z_act),
                r.multiplies_cumulative
            )?;
        }
        Ok(())
    }
}

/// Builds the initial network: Gaussian input weights, zero output weights and,
/// for AdAct, a hinge bank fitted to the initial net ranges.
pub fn prime_network(config: &TrainConfig, data: &Dataset) -> Result<MlpNetwork> {
    config.validate()?;
    let fixed = HiddenActivation::Fixed {
        reference: config.init_activation,
        leaky_slope: config.leaky_slope,
    };
    let mut net = MlpNetwork::init(
        data.inputs(),
        config.hidden,
        data.outputs(),
        config.seed,
        config.weight_sigma,
        fixed,
    )?;
    if config.trainer == TrainerKind::Adact {
        let nets = net.nets(&data.x)?;
        let row_major: Vec<f64> = nets.transpose().iter().copied().collect();
        let ranges = fit_ranges(&row_major, config.hidden, config.range_margin)?;
        let bank = ActivationBank::from_ranges(&ranges, config.hinges, config.init_activation, config.leaky_slope)?;
        net.activation = HiddenActivation::Adaptive { bank };
    }
    Ok(net)
}

/// Mutable state carried across iterations.
pub struct TrainerState {
    pub kind: TrainerKind,
    pub optimizer_for_acts: ActivationOptimizer,
    pub adam: Option<AdamState>,
    pub cg: Option<ConjugateGradient>,
}

impl TrainerState {
    pub fn new(config: &TrainConfig, net: &MlpNetwork) -> Self {
        let adam = match (config.trainer, config.optimizer_for_acts, net.activation.bank()) {
            (TrainerKind::Adact, ActivationOptimizer::Adam, Some(bank)) => {
                Some(AdamState::new(config.adam, bank.len(), bank.hinges()))
            }
            _ => None,
        };
        let cg = match config.trainer {
            TrainerKind::Cg => Some(ConjugateGradient::new(CgVariant::Optimal)),
            TrainerKind::Scg => Some(ConjugateGradient::new(CgVariant::Scaled)),
            _ => None,
        };
        Self {
            kind: config.trainer,
            optimizer_for_acts: config.optimizer_for_acts,
            adam,
            cg,
        }
    }
}

/// What one iteration did.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub train_mse: f64,
    pub z_act: Option<f64>,
    pub owo: Option<OwoOutcome>,
}

/// Runs one training iteration (1-based `iteration`) in place.
pub fn iterate(
    net: &mut MlpNetwork,
    data: &Dataset,
    state: &mut TrainerState,
    iteration: usize,
) -> Result<IterationOutcome> {
    match state.kind {
        TrainerKind::Cg | TrainerKind::Scg => {
            let cg = state.cg.as_mut().expect("conjugate gradient state");
            let out = cg.step(&mut NetworkObjective { net, data })?;
            if !net.is_finite() {
                return Err(Error::NonFiniteUpdate {
                    iteration,
                    what: "weights".into(),
                });
            }
            Ok(IterationOutcome {
                train_mse: out.error_after,
                z_act: None,
                owo: None,
            })
        }
        TrainerKind::Molf | TrainerKind::Adact => {
            let cache = net.forward(&data.x)?;
            let g = input_weight_gradient(net, data, &cache);
            let ga = if state.kind == TrainerKind::Adact {
                Some(activation_gradient(net, data, &cache)?)
            } else {
                None
            };
            let (_, mut cache) = molf_step(net, data, &cache, &g)?;

            let mut z_act = None;
            if let Some(ga) = ga {
                z_act = activation_phase(net, data, &cache, &ga, state, iteration)?;
                cache = net.forward(&data.x)?;
            }

            let owo = owo_step(net, data, &cache)?;
            if !net.is_finite() {
                return Err(Error::NonFiniteUpdate {
                    iteration,
                    what: "weights".into(),
                });
            }
            Ok(IterationOutcome {
                train_mse: owo.mse_after,
                z_act,
                owo: Some(owo),
            })
        }
    }
}

/// Updates the hinge heights along `ga`, halving an OLF step that raises the
/// error up to ten times before skipping it. Returns the applied factor.
fn activation_phase(
    net: &mut MlpNetwork,
    data: &Dataset,
    cache: &crate::network::ForwardCache,
    ga: &ActivationGradient,
    state: &mut TrainerState,
    iteration: usize,
) -> Result<Option<f64>> {
    if let Some(adam) = state.adam.as_mut() {
        let bank = net.activation.bank_mut().expect("adaptive network");
        update_activations(bank, ga, ActivationUpdate::Adam(adam), iteration)?;
        return Ok(None);
    }
    // the gradient was taken before the MOLF step; the factor uses current nets
    let olf = activation_olf(net, data, cache, ga, iteration)?;
    if olf.z == 0.0 {
        return Ok(Some(0.0));
    }
    let before = mse(&cache.y, &data.t)?;
    let mut z = olf.z;
    for _ in 0..=molf::MAX_HALVINGS {
        let mut trial = net.clone();
        let bank = trial.activation.bank_mut().expect("adaptive network");
        update_activations(bank, ga, ActivationUpdate::Olf(z), iteration)?;
        if mse(&trial.predict(&data.x)?, &data.t)? <= before {
            *net = trial;
            return Ok(Some(z));
        }
        z *= 0.5;
    }
    Ok(Some(0.0))
}

/// Trains a network from scratch on `data`, optionally tracking a validation set.
pub fn train(config: &TrainConfig, data: &Dataset, validation: Option<&Dataset>) -> Result<TrainRun> {
    let net = prime_network(config, data)?;
    train_from(config, net, data, validation)
}

/// Trains an already primed network.
pub fn train_from(
    config: &TrainConfig,
    mut net: MlpNetwork,
    data: &Dataset,
    validation: Option<&Dataset>,
) -> Result<TrainRun> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_iteration = burden(
        config.trainer.algorithm(),
        &BurdenInput::new(
            data.inputs() as u64,
            config.hidden as u64,
            data.outputs() as u64,
            data.len() as u64,
            config.hinges as u64,
        )?,
    );
    let mut state = TrainerState::new(config, &net);
    let mut records = Vec::with_capacity(config.iterations);
    for iteration in 1..=config.iterations {
        let out = iterate(&mut net, data, &mut state, iteration)?;
        let (val_mse, val_pe) = match validation {
            Some(v) => {
                let y = net.predict(&v.x)?;
                let val_pe = match v.kind {
                    DatasetKind::Classification => Some(pe(&y, &v.t)?),
                    DatasetKind::Approximation => None,
                };
                (Some(mse(&y, &v.t)?), val_pe)
            }
            None => (None, None),
        };
        records.push(IterationRecord {
            iteration,
            train_mse: out.train_mse,
            val_mse,
            val_pe,
            z_act: out.z_act,
            multiplies_cumulative: per_iteration * iteration as u128,
            owo: out.owo.map(|o| (o.mse_before, o.mse_after)),
        });
    }
    Ok(TrainRun {
        config: config.clone(),
        records,
        network: net,
    })
}
