use crate::data::Dataset;
use crate::error::Result;
use crate::network::{build_correlations, mse, ForwardCache, MlpNetwork};
use crate::ols::solve_via_ols;

/// Outcome of one output-weight solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OwoOutcome {
    pub mse_before: f64,
    pub mse_after: f64,
    /// Multiplies spent inside the OLS solve.
    pub multiplies: u64,
    /// False when the solved weights fit worse than the current ones and were discarded.
    pub replaced: bool,
}

/// Replaces all output weights with the least-squares solution for the current
/// hidden activations. `cache` must come from a forward pass of `net` on `data`.
///
/// The OLS solve drops near-dependent basis functions, so its solution can fit
/// marginally worse than weights that still use them; in that case the current
/// weights are kept.
pub fn owo_step(net: &mut MlpNetwork, data: &Dataset, cache: &ForwardCache) -> Result<OwoOutcome> {
    let mse_before = mse(&cache.y, &data.t)?;
    let system = build_correlations(&cache.xa, &data.t)?;
    let solution = solve_via_ols(&system.r, &system.c);
    let y = &cache.xa * solution.weights.transpose();
    let mse_after = mse(&y, &data.t)?;
    let replaced = mse_after <= mse_before && solution.weights.iter().all(|v| v.is_finite());
    if replaced {
        net.set_output_weights(&solution.weights)?;
    }
    Ok(OwoOutcome {
        mse_before,
        mse_after: if replaced { mse_after } else { mse_before },
        multiplies: solution.multiplies,
        replaced,
    })
}
