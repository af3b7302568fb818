//! Input-weight gradient and the multiple-optimal-learning-factor step.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::Result;
use crate::network::{mse, ForwardCache, MlpNetwork};
use crate::ols::solve_via_ols;

/// Maximum number of step halvings before a step is skipped.
pub const MAX_HALVINGS: usize = 10;

/// `[X | 1]`, `N_v x (N + 1)`.
pub(crate) fn augment(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(x.ncols(), 1.0)
}

/// `f'(n_pk)` for every pattern and hidden unit.
pub(crate) fn slopes(net: &MlpNetwork, cache: &ForwardCache) -> DMatrix<f64> {
    DMatrix::from_fn(cache.nets.nrows(), cache.nets.ncols(), |p, k| {
        net.activation.derivative(k, cache.nets[(p, k)])
    })
}

/// Negative MSE gradient with respect to the input weights, `N_h x (N + 1)`.
pub fn input_weight_gradient(net: &MlpNetwork, data: &Dataset, cache: &ForwardCache) -> DMatrix<f64> {
    let nv = data.len() as f64;
    let backprop = cache.residuals(&data.t) * &net.w_oh;
    let delta = backprop.component_mul(&slopes(net, cache));
    delta.tr_mul(&augment(&data.x)) * (2.0 / nv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MolfOutcome {
    /// Learning factors actually applied (after any halving).
    pub z: DVector<f64>,
    /// Newton solution before any safeguard.
    pub z_newton: DVector<f64>,
    pub halvings: usize,
    /// False when every halving still increased the error and the step was skipped.
    pub applied: bool,
    pub mse_before: f64,
    pub mse_after: f64,
}

/// Gauss-Newton system for one learning factor per hidden unit along `g`.
///
/// Returns `(H_molf, g_molf)` where `g_molf(k) = -dE/dz_k` at `z = 0`.
pub fn molf_system(
    net: &MlpNetwork,
    data: &Dataset,
    cache: &ForwardCache,
    g: &DMatrix<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let scale = 2.0 / data.len() as f64;
    // u_pk = f'(n_pk) * (g_k . [x_p; 1]): net change per unit z_k, through the slope
    let direction_nets = augment(&data.x) * g.transpose();
    let u = direction_nets.component_mul(&slopes(net, cache));
    let backprop = cache.residuals(&data.t) * &net.w_oh;
    let nh = net.hidden();
    let gradient = DVector::from_fn(nh, |k, _| scale * u.column(k).dot(&backprop.column(k)));
    let hessian = u.tr_mul(&u).component_mul(&net.w_oh.tr_mul(&net.w_oh)) * scale;
    (hessian, gradient)
}

/// Updates each input-weight row along `g` with its own learning factor.
///
/// The factors solve the Gauss-Newton system with OLS; a step that raises the
/// training error is halved up to [`MAX_HALVINGS`] times and then skipped.
/// Returns the outcome and a forward pass of the resulting network.
pub fn molf_step(
    net: &mut MlpNetwork,
    data: &Dataset,
    cache: &ForwardCache,
    g: &DMatrix<f64>,
) -> Result<(MolfOutcome, ForwardCache)> {
    let mse_before = mse(&cache.y, &data.t)?;
    let (hessian, gradient) = molf_system(net, data, cache, g);
    let nh = net.hidden();
    let z_newton = if gradient.iter().all(|&v| v == 0.0) {
        DVector::zeros(nh)
    } else {
        let solution = solve_via_ols(&hessian, &DMatrix::from_column_slice(nh, 1, gradient.as_slice()));
        DVector::from_iterator(nh, solution.weights.row(0).iter().copied())
    };

    if z_newton.iter().all(|&v| v == 0.0) {
        let outcome = MolfOutcome {
            z: z_newton.clone(),
            z_newton,
            halvings: 0,
            applied: true,
            mse_before,
            mse_after: mse_before,
        };
        return Ok((outcome, cache.clone()));
    }

    let mut z = z_newton.clone();
    for halvings in 0..=MAX_HALVINGS {
        let mut trial = net.clone();
        for k in 0..nh {
            for j in 0..g.ncols() {
                trial.w[(k, j)] += z[k] * g[(k, j)];
            }
        }
        if trial.w.iter().all(|v| v.is_finite()) {
            let trial_cache = trial.forward(&data.x)?;
            let mse_after = mse(&trial_cache.y, &data.t)?;
            if mse_after <= mse_before {
                *net = trial;
                let outcome = MolfOutcome {
                    z,
                    z_newton,
                    halvings,
                    applied: true,
                    mse_before,
                    mse_after,
                };
                return Ok((outcome, trial_cache));
            }
        }
        z *= 0.5;
    }
    let outcome = MolfOutcome {
        z: DVector::zeros(nh),
        z_newton,
        halvings: MAX_HALVINGS,
        applied: false,
        mse_before,
        mse_after: mse_before,
    };
    Ok((outcome, cache.clone()))
}
