//! Hinge-height training for piecewise-linear activations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::activations::{ActivationBank, Placement};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{ForwardCache, MlpNetwork};

/// Curvature below which the Newton step is replaced by a fallback factor.
pub const CURVATURE_FLOOR: f64 = 1e-12;

/// Negative MSE gradient with respect to the hinge heights, `N_h x H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationGradient(pub DMatrix<f64>);

impl ActivationGradient {
    pub fn zeros(units: usize, hinges: usize) -> Self {
        Self(DMatrix::zeros(units, hinges))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

/// Calls `f(hinge, weight)` for each height that `o = f(n)` depends on.
///
/// Net values in a flat region depend only on the nearest end height.
#[inline]
fn for_each_weight(placement: Placement, hinges: usize, mut f: impl FnMut(usize, f64)) {
    match placement {
        Placement::Below => f(0, 1.0),
        Placement::Above => f(hinges - 1, 1.0),
        Placement::Inside(b) => {
            f(b.lo, b.w1);
            f(b.hi, b.w2);
        }
    }
}

fn adaptive_bank(net: &MlpNetwork) -> Result<&ActivationBank> {
    net.activation
        .bank()
        .ok_or_else(|| Error::Config("network has fixed activations; no hinge heights to train".into()))
}

pub fn activation_gradient(net: &MlpNetwork, data: &Dataset, cache: &ForwardCache) -> Result<ActivationGradient> {
    let bank = adaptive_bank(net)?;
    let hinges = bank.hinges();
    let backprop = cache.residuals(&data.t) * &net.w_oh;
    let mut g = DMatrix::zeros(net.hidden(), hinges);
    for k in 0..net.hidden() {
        let unit = bank.unit(k);
        for p in 0..data.len() {
            let e = backprop[(p, k)];
            for_each_weight(unit.placement(cache.nets[(p, k)]), hinges, |m, w| {
                g[(k, m)] += e * w;
            });
        }
    }
    g *= 2.0 / data.len() as f64;
    Ok(ActivationGradient(g))
}

/// Learning factor for the step `A <- A + z G_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationLearningFactor {
    pub z: f64,
    /// `dE/dz` at `z = 0`.
    pub first: f64,
    /// Gauss-Newton `d2E/dz2`.
    pub second: f64,
    pub fallback: bool,
}

/// Newton step along `G_a`; falls back to `0.1 / (1 + iteration)` on flat curvature.
///
/// The outputs are linear in the heights, so the Gauss-Newton second
/// derivative is exact and the step minimizes the error along `G_a`.
pub fn activation_olf(
    net: &MlpNetwork,
    data: &Dataset,
    cache: &ForwardCache,
    ga: &ActivationGradient,
    iteration: usize,
) -> Result<ActivationLearningFactor> {
    let dy = output_change(net, cache, ga)?;
    let residuals = cache.residuals(&data.t);
    let scale = 2.0 / data.len() as f64;
    let first = -scale * residuals.dot(&dy);
    let second = scale * dy.norm_squared();
    if first == 0.0 {
        return Ok(ActivationLearningFactor {
            z: 0.0,
            first,
            second,
            fallback: false,
        });
    }
    if !(second > CURVATURE_FLOOR) {
        return Ok(ActivationLearningFactor {
            z: 0.1 / (1.0 + iteration as f64),
            first,
            second,
            fallback: true,
        });
    }
    Ok(ActivationLearningFactor {
        z: -first / second,
        first,
        second,
        fallback: false,
    })
}

/// `dy_p(i)/dz` for the step `A + z G_a`, `N_v x M`.
pub fn output_change(net: &MlpNetwork, cache: &ForwardCache, ga: &ActivationGradient) -> Result<DMatrix<f64>> {
    let bank = adaptive_bank(net)?;
    let hinges = bank.hinges();
    let nv = cache.nets.nrows();
    let mut dacts = DMatrix::zeros(nv, net.hidden());
    for k in 0..net.hidden() {
        let unit = bank.unit(k);
        for p in 0..nv {
            let mut v = 0.0;
            for_each_weight(unit.placement(cache.nets[(p, k)]), hinges, |m, w| {
                v += w * ga.0[(k, m)];
            });
            dacts[(p, k)] = v;
        }
    }
    Ok(dacts * net.w_oh.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate: 1e-2,
        }
    }
}

/// First and second moment estimates for the hinge heights.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub params: AdamParams,
    first: DMatrix<f64>,
    second: DMatrix<f64>,
    steps: i32,
}

impl AdamState {
    pub fn new(params: AdamParams, units: usize, hinges: usize) -> Self {
        Self {
            params,
            first: DMatrix::zeros(units, hinges),
            second: DMatrix::zeros(units, hinges),
            steps: 0,
        }
    }

    /// Height increments for one step, given the negative gradient.
    fn increments(&mut self, ga: &DMatrix<f64>) -> DMatrix<f64> {
        let AdamParams {
            beta1,
            beta2,
            epsilon,
            learning_rate,
        } = self.params;
        self.steps += 1;
        let gradient = -ga;
        self.first = &self.first * beta1 + &gradient * (1.0 - beta1);
        self.second = &self.second * beta2 + gradient.map(|v| v * v) * (1.0 - beta2);
        let c1 = 1.0 - beta1.powi(self.steps);
        let c2 = 1.0 - beta2.powi(self.steps);
        self.first.zip_map(&self.second, |m, v| {
            -learning_rate * (m / c1) / ((v / c2).sqrt() + epsilon)
        })
    }
}

pub enum ActivationUpdate<'a> {
    /// `A <- A + z G_a`.
    Olf(f64),
    Adam(&'a mut AdamState),
}

/// Applies one height update; hinge abscissae are never touched.
///
/// A non-finite result leaves the bank unchanged and reports an error.
pub fn update_activations(
    bank: &mut ActivationBank,
    ga: &ActivationGradient,
    rule: ActivationUpdate<'_>,
    iteration: usize,
) -> Result<()> {
    if ga.0.shape() != (bank.len(), bank.hinges()) {
        return Err(Error::Shape(format!(
            "gradient is {:?}, bank is ({}, {})",
            ga.0.shape(),
            bank.len(),
            bank.hinges()
        )));
    }
    let increments = match rule {
        ActivationUpdate::Olf(z) => {
            if z == 0.0 {
                return Ok(());
            }
            &ga.0 * z
        }
        ActivationUpdate::Adam(state) => state.increments(&ga.0),
    };
    let mut updated = bank.clone();
    for k in 0..bank.len() {
        for (m, a) in updated.unit_mut(k).heights_mut().iter_mut().enumerate() {
            *a += increments[(k, m)];
        }
    }
    if updated
        .units()
        .iter()
        .any(|u| u.heights().iter().any(|a| !a.is_finite()))
    {
        return Err(Error::NonFiniteUpdate {
            iteration,
            what: "hinge heights".into(),
        });
    }
    *bank = updated;
    Ok(())
}
