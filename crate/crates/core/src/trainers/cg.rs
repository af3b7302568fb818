//! Conjugate gradient and scaled conjugate gradient over all network weights.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::Result;
use crate::network::{mse, MlpNetwork};

use super::molf::{augment, slopes, MAX_HALVINGS};

/// A sum-of-squares objective with a Gauss-Newton model along search directions.
pub trait LeastSquaresObjective {
    fn params(&self) -> DVector<f64>;
    fn set_params(&mut self, w: &DVector<f64>);
    fn error(&self) -> Result<f64>;
    /// Error and its gradient `dE/dw`.
    fn error_and_gradient(&self) -> Result<(f64, DVector<f64>)>;
    /// `(dE/dz, Gauss-Newton d2E/dz2)` for `w + z p` at `z = 0`.
    fn directional(&self, p: &DVector<f64>) -> Result<(f64, f64)>;
}

/// All weights of a network flattened as `vec(W, W_oh, W_oi)`, row-major.
pub struct NetworkObjective<'a> {
    pub net: &'a mut MlpNetwork,
    pub data: &'a Dataset,
}

impl NetworkObjective<'_> {
    fn split(&self, v: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (n, nh, m) = (self.net.inputs(), self.net.hidden(), self.net.outputs());
        let a = nh * (n + 1);
        let b = a + m * nh;
        (
            DMatrix::from_row_slice(nh, n + 1, &v.as_slice()[..a]),
            DMatrix::from_row_slice(m, nh, &v.as_slice()[a..b]),
            DMatrix::from_row_slice(m, n + 1, &v.as_slice()[b..]),
        )
    }
}

fn row_major(m: &DMatrix<f64>) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

impl LeastSquaresObjective for NetworkObjective<'_> {
    fn params(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.net.weight_count(),
            row_major(&self.net.w)
                .chain(row_major(&self.net.w_oh))
                .chain(row_major(&self.net.w_oi)),
        )
    }

    fn set_params(&mut self, v: &DVector<f64>) {
        let (w, w_oh, w_oi) = self.split(v);
        self.net.w = w;
        self.net.w_oh = w_oh;
        self.net.w_oi = w_oi;
    }

    fn error(&self) -> Result<f64> {
        mse(&self.net.predict(&self.data.x)?, &self.data.t)
    }

    fn error_and_gradient(&self) -> Result<(f64, DVector<f64>)> {
        let cache = self.net.forward(&self.data.x)?;
        let e = cache.residuals(&self.data.t);
        let scale = -2.0 / self.data.len() as f64;
        let xa1 = augment(&self.data.x);
        let delta = (&e * &self.net.w_oh).component_mul(&slopes(self.net, &cache));
        let g_w = delta.tr_mul(&xa1) * scale;
        let g_oh = e.tr_mul(&cache.acts) * scale;
        let g_oi = e.tr_mul(&xa1) * scale;
        let grad = DVector::from_iterator(
            self.net.weight_count(),
            row_major(&g_w).chain(row_major(&g_oh)).chain(row_major(&g_oi)),
        );
        Ok((mse(&cache.y, &self.data.t)?, grad))
    }

    fn directional(&self, p: &DVector<f64>) -> Result<(f64, f64)> {
        let (p_w, p_oh, p_oi) = self.split(p);
        let cache = self.net.forward(&self.data.x)?;
        let xa1 = augment(&self.data.x);
        let dnets = (&xa1 * p_w.transpose()).component_mul(&slopes(self.net, &cache));
        let dy = dnets * self.net.w_oh.transpose() + &cache.acts * p_oh.transpose() + &xa1 * p_oi.transpose();
        let e = cache.residuals(&self.data.t);
        let scale = 2.0 / self.data.len() as f64;
        Ok((-scale * e.dot(&dy), scale * dy.norm_squared()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgVariant {
    /// Gauss-Newton optimal learning factor along each direction.
    Optimal,
    /// Heuristic step: doubled after a successful step, halved after a failed one.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub z: f64,
    pub b1: f64,
    pub error_before: f64,
    pub error_after: f64,
    pub moved: bool,
}

/// Direction memory for Fletcher-Reeves conjugate gradient.
#[derive(Debug, Clone)]
pub struct ConjugateGradient {
    pub variant: CgVariant,
    direction: Option<DVector<f64>>,
    previous_energy: f64,
    step: Option<f64>,
}

impl ConjugateGradient {
    pub fn new(variant: CgVariant) -> Self {
        Self {
            variant,
            direction: None,
            previous_energy: 0.0,
            step: None,
        }
    }

    pub fn direction(&self) -> Option<&DVector<f64>> {
        self.direction.as_ref()
    }

    /// One direction update `p <- -g + B1 p` followed by `w <- w + z p`.
    pub fn step(&mut self, objective: &mut impl LeastSquaresObjective) -> Result<CgOutcome> {
        let (error_before, g) = objective.error_and_gradient()?;
        let energy = g.norm_squared();
        let still = CgOutcome {
            z: 0.0,
            b1: 0.0,
            error_before,
            error_after: error_before,
            moved: false,
        };
        if energy == 0.0 {
            return Ok(still);
        }

        let (mut p, mut b1) = match self.direction.take() {
            Some(p) if self.previous_energy > 0.0 => {
                let b1 = energy / self.previous_energy;
                (-&g + p * b1, b1)
            }
            _ => (-&g, 0.0),
        };
        if p.dot(&g) >= 0.0 {
            // not a descent direction; restart
            p = -&g;
            b1 = 0.0;
        }
        self.previous_energy = energy;

        let (first, second) = objective.directional(&p)?;
        let newton = if second > 0.0 { -first / second } else { 0.0 };
        let start = self.params_step(&p, &g, newton);

        let w0 = objective.params();
        let mut z = start;
        let attempts = match self.variant {
            CgVariant::Optimal => MAX_HALVINGS + 1,
            CgVariant::Scaled => 1,
        };
        for _ in 0..attempts {
            let trial = &w0 + &p * z;
            if trial.iter().all(|v| v.is_finite()) {
                objective.set_params(&trial);
                let error_after = objective.error()?;
                if error_after <= error_before {
                    if self.variant == CgVariant::Scaled {
                        self.step = Some(2.0 * z);
                    }
                    self.direction = Some(p);
                    return Ok(CgOutcome {
                        z,
                        b1,
                        error_before,
                        error_after,
                        moved: true,
                    });
                }
            }
            z *= 0.5;
        }
        objective.set_params(&w0);
        if self.variant == CgVariant::Scaled {
            self.step = Some(0.5 * start);
        }
        // restart from steepest descent next time
        self.direction = None;
        self.previous_energy = 0.0;
        Ok(CgOutcome { b1, ..still })
    }

    fn params_step(&self, p: &DVector<f64>, g: &DVector<f64>, newton: f64) -> f64 {
        match self.variant {
            CgVariant::Optimal => newton,
            CgVariant::Scaled => self.step.unwrap_or_else(|| {
                if newton > 0.0 {
                    newton
                } else {
                    0.01 / p.norm().max(g.norm()).max(1e-12)
                }
            }),
        }
    }
}
