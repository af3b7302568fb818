//! Orthogonal least squares for the output-weight equations `R W^T = C`.
//!
//! The basis functions are orthonormalized one at a time through a lower
//! triangular matrix `A`, working only from the autocorrelation matrix `R`:
//! `O'_m = sum_{k <= m} a_mk O_k`. Basis functions whose residual energy after
//! projection falls below a scale-aware threshold are treated as linearly
//! dependent and get zero weight.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative factor for the dependence threshold `tau = factor * trace(R) / N_u`.
pub const DEPENDENCE_FACTOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OrthoFactorization {
    /// Lower-triangular coefficients; rows of dependent basis functions are zero.
    pub a: DMatrix<f64>,
    /// `accepted[m]` is false when basis function `m` was skipped as dependent.
    pub accepted: Vec<bool>,
    pub valid_count: usize,
    pub threshold: f64,
    /// Multiplications and divisions spent in the recursion.
    pub multiplies: u64,
}

/// Orthonormalizes the basis described by `r`.
///
/// Fails when the very first basis function has (numerically) zero energy.
pub fn orthonormalize(r: &DMatrix<f64>) -> Result<OrthoFactorization> {
    let threshold = dependence_threshold(r);
    if r.nrows() > 0 && r[(0, 0)] <= threshold {
        return Err(Error::FirstBasisDegenerate {
            value: r[(0, 0)],
            threshold,
        });
    }
    Ok(factorize(r, threshold))
}

fn dependence_threshold(r: &DMatrix<f64>) -> f64 {
    assert!(r.is_square(), "autocorrelation matrix must be square");
    let nu = r.nrows().max(1);
    DEPENDENCE_FACTOR * r.trace() / nu as f64
}

fn factorize(r: &DMatrix<f64>, threshold: f64) -> OrthoFactorization {
    let nu = r.nrows();
    let mut a = DMatrix::zeros(nu, nu);
    let mut accepted = vec![false; nu];
    let mut c = vec![0.0; nu];
    let mut multiplies = 0u64;

    for m in 0..nu {
        // c_i = <O'_i, O_m> for the already-built orthonormal functions
        let mut energy = r[(m, m)];
        for i in 0..m {
            c[i] = 0.0;
            if !accepted[i] {
                continue;
            }
            c[i] = (0..=i).map(|q| a[(i, q)] * r[(q, m)]).sum();
            energy -= c[i] * c[i];
            multiplies += i as u64 + 2;
        }
        if !(energy > threshold) {
            continue;
        }
        let scale = 1.0 / energy.sqrt();
        for k in 0..m {
            let b: f64 = (k..m).filter(|&i| accepted[i]).map(|i| c[i] * a[(i, k)]).sum();
            a[(m, k)] = -b * scale;
            multiplies += (m - k) as u64 + 1;
        }
        a[(m, m)] = scale;
        multiplies += 1;
        accepted[m] = true;
    }

    let valid_count = accepted.iter().filter(|&&x| x).count();
    OrthoFactorization {
        a,
        accepted,
        valid_count,
        threshold,
        multiplies,
    }
}

/// Result of an OLS solve.
#[derive(Debug, Clone)]
pub struct OlsSolution {
    /// Weights in the original basis, `M x N_u`.
    pub weights: DMatrix<f64>,
    /// Weights in the orthonormal basis, `M x N_u`.
    pub orthonormal_weights: DMatrix<f64>,
    pub factorization: OrthoFactorization,
    /// Total multiplications, recursion included.
    pub multiplies: u64,
}

/// Solves `R W^T = C` for `W` (`M x N_u`), giving dependent basis functions zero weight.
///
/// `c` is `N_u x M`. A first basis function with no energy is skipped like any
/// other dependent one instead of being reported as an error.
pub fn solve_via_ols(r: &DMatrix<f64>, c: &DMatrix<f64>) -> OlsSolution {
    assert_eq!(r.nrows(), c.nrows(), "R and C must have the same row count");
    let threshold = dependence_threshold(r);
    let factorization = factorize(r, threshold);
    let (nu, outputs) = (r.nrows(), c.ncols());
    let a = &factorization.a;
    let mut multiplies = factorization.multiplies;

    let mut wp = DMatrix::zeros(outputs, nu);
    for i in 0..outputs {
        for m in 0..nu {
            if factorization.accepted[m] {
                wp[(i, m)] = (0..=m).map(|k| a[(m, k)] * c[(k, i)]).sum();
                multiplies += m as u64 + 1;
            }
        }
    }

    let mut weights = DMatrix::zeros(outputs, nu);
    for i in 0..outputs {
        for k in 0..nu {
            weights[(i, k)] = (k..nu)
                .filter(|&m| factorization.accepted[m])
                .map(|m| a[(m, k)] * wp[(i, m)])
                .sum();
            multiplies += (nu - k) as u64;
        }
    }

    OlsSolution {
        weights,
        orthonormal_weights: wp,
        factorization,
        multiplies,
    }
}

/// Training MSE implied by orthonormal-system weights: target energy minus
/// the energy captured by each orthonormal basis function.
pub fn orthonormal_error(orthonormal_weights: &DMatrix<f64>, target_energy: f64) -> f64 {
    let e = target_energy - orthonormal_weights.norm_squared();
    if e < -1e-9 * target_energy.abs().max(1.0) {
        log::warn!("orthonormal error is negative ({e:e}); the correlation matrix is ill-conditioned");
    }
    e
}
