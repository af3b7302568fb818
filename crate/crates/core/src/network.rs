//! Single-hidden-layer perceptron with bypass connections.
//!
//! Outputs are `y_p = W_oi [x_p; 1] + W_oh o_p`, where `o_p` is the hidden
//! activation vector. The augmented basis vector for pattern `p` is ordered
//! `[x_p | o_p | 1]`, giving `N_u = N + N_h + 1` basis functions; the output
//! weight matrix `W_o` (M x N_u) uses the same column order.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activations::{ActivationBank, Reference, DEFAULT_LEAKY_SLOPE};
use crate::error::{Error, Result};

/// Hidden-unit nonlinearity: a fixed reference function or a trainable bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HiddenActivation {
    Fixed { reference: Reference, leaky_slope: f64 },
    Adaptive { bank: ActivationBank },
}

impl HiddenActivation {
    pub fn fixed(reference: Reference) -> Self {
        HiddenActivation::Fixed {
            reference,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    #[inline]
    pub fn value(&self, unit: usize, n: f64) -> f64 {
        match self {
            HiddenActivation::Fixed {
                reference,
                leaky_slope,
            } => reference.value(n, *leaky_slope),
            HiddenActivation::Adaptive { bank } => bank.unit(unit).evaluate(n),
        }
    }

    #[inline]
    pub fn derivative(&self, unit: usize, n: f64) -> f64 {
        match self {
            HiddenActivation::Fixed {
                reference,
                leaky_slope,
            } => reference.derivative(n, *leaky_slope),
            HiddenActivation::Adaptive { bank } => bank.unit(unit).slope(n),
        }
    }

    pub fn bank(&self) -> Option<&ActivationBank> {
        match self {
            HiddenActivation::Adaptive { bank } => Some(bank),
            HiddenActivation::Fixed { .. } => None,
        }
    }

    pub fn bank_mut(&mut self) -> Option<&mut ActivationBank> {
        match self {
            HiddenActivation::Adaptive { bank } => Some(bank),
            HiddenActivation::Fixed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    /// Input weights, `N_h x (N + 1)`; the last column holds the thresholds.
    pub w: DMatrix<f64>,
    /// Hidden-to-output weights, `M x N_h`.
    pub w_oh: DMatrix<f64>,
    /// Bypass input-to-output weights, `M x (N + 1)`; the last column is the output threshold.
    pub w_oi: DMatrix<f64>,
    pub activation: HiddenActivation,
}

impl MlpNetwork {
    /// Draws input weights i.i.d. from `N(0, sigma^2)`; output weights start at zero.
    pub fn init(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        seed: u64,
        sigma: f64,
        activation: HiddenActivation,
    ) -> Result<Self> {
        if inputs == 0 || hidden == 0 || outputs == 0 {
            return Err(Error::Shape(format!(
                "network dimensions must be positive, got N={inputs}, N_h={hidden}, M={outputs}"
            )));
        }
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::Config(format!("bad weight deviation {sigma}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = DMatrix::zeros(hidden, inputs + 1);
        for k in 0..hidden {
            for j in 0..=inputs {
                w[(k, j)] = normal.sample(&mut rng);
            }
        }
        Ok(Self {
            w,
            w_oh: DMatrix::zeros(outputs, hidden),
            w_oi: DMatrix::zeros(outputs, inputs + 1),
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols() - 1
    }

    pub fn hidden(&self) -> usize {
        self.w.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w_oh.nrows()
    }

    /// `N_u = N + N_h + 1`.
    pub fn basis_len(&self) -> usize {
        self.inputs() + self.hidden() + 1
    }

    /// Total trainable weight count `N_w = M N_u + (N + 1) N_h` (excluding hinge heights).
    pub fn weight_count(&self) -> usize {
        self.outputs() * self.basis_len() + (self.inputs() + 1) * self.hidden()
    }

    /// `W_o` as one `M x N_u` matrix in `[inputs | hidden | bias]` column order.
    pub fn output_weights(&self) -> DMatrix<f64> {
        let (n, nh, m) = (self.inputs(), self.hidden(), self.outputs());
        let mut wo = DMatrix::zeros(m, n + nh + 1);
        wo.view_mut((0, 0), (m, n)).copy_from(&self.w_oi.columns(0, n));
        wo.view_mut((0, n), (m, nh)).copy_from(&self.w_oh);
        wo.column_mut(n + nh).copy_from(&self.w_oi.column(n));
        wo
    }

    pub fn set_output_weights(&mut self, wo: &DMatrix<f64>) -> Result<()> {
        let (n, nh, m) = (self.inputs(), self.hidden(), self.outputs());
        if wo.shape() != (m, n + nh + 1) {
            return Err(Error::Shape(format!(
                "output weights are {:?}, expected ({m}, {})",
                wo.shape(),
                n + nh + 1
            )));
        }
        self.w_oi.columns_mut(0, n).copy_from(&wo.columns(0, n));
        self.w_oi.column_mut(n).copy_from(&wo.column(n + nh));
        self.w_oh.copy_from(&wo.columns(n, nh));
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        let bank_ok = self
            .activation
            .bank()
            .is_none_or(|b| b.units().iter().all(|u| u.heights().iter().all(|a| a.is_finite())));
        finite(&self.w) && finite(&self.w_oh) && finite(&self.w_oi) && bank_ok
    }

    /// Net values `[X | 1] W^T`, `N_v x N_h`.
    pub fn nets(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_inputs(x, self.inputs())?;
        let n = self.inputs();
        let mut nets = x * self.w.columns(0, n).transpose();
        for (k, mut col) in nets.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.w[(k, n)]);
        }
        Ok(nets)
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> Result<ForwardCache> {
        let nets = self.nets(x)?;
        Ok(self.forward_from_nets(x, nets))
    }

    /// Completes a forward pass from precomputed net values.
    pub(crate) fn forward_from_nets(&self, x: &DMatrix<f64>, nets: DMatrix<f64>) -> ForwardCache {
        let (nv, n, nh) = (x.nrows(), self.inputs(), self.hidden());
        let acts = DMatrix::from_fn(nv, nh, |p, k| self.activation.value(k, nets[(p, k)]));
        let mut xa = DMatrix::zeros(nv, n + nh + 1);
        xa.columns_mut(0, n).copy_from(x);
        xa.columns_mut(n, nh).copy_from(&acts);
        xa.column_mut(n + nh).fill(1.0);
        let y = &xa * self.output_weights().transpose();
        ForwardCache { nets, acts, xa, y }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward(x)?.y)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            inputs: self.inputs(),
            hidden: self.hidden(),
            outputs: self.outputs(),
            w: rows_of(&self.w),
            w_oh: rows_of(&self.w_oh),
            w_oi: rows_of(&self.w_oi),
            activation: self.activation.clone(),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        let w = matrix_from_rows(&c.w, c.hidden, c.inputs + 1, "w")?;
        let w_oh = matrix_from_rows(&c.w_oh, c.outputs, c.hidden, "w_oh")?;
        let w_oi = matrix_from_rows(&c.w_oi, c.outputs, c.inputs + 1, "w_oi")?;
        if let Some(bank) = c.activation.bank() {
            if bank.len() != c.hidden {
                return Err(Error::Shape(format!(
                    "activation bank has {} units for {} hidden units",
                    bank.len(),
                    c.hidden
                )));
            }
        }
        Ok(Self {
            w,
            w_oh,
            w_oi,
            activation: c.activation,
        })
    }
}

fn check_inputs(x: &DMatrix<f64>, inputs: usize) -> Result<()> {
    if x.ncols() != inputs {
        return Err(Error::Shape(format!(
            "pattern matrix has {} columns, network expects {inputs}",
            x.ncols()
        )));
    }
    for p in 0..x.nrows() {
        for j in 0..inputs {
            if !x[(p, j)].is_finite() {
                return Err(Error::NonFiniteInput { pattern: p, column: j });
            }
        }
    }
    Ok(())
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape(format!("{name} must be {nrows} x {ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serialized network: dimensions, row-major weight matrices and the hidden activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub w: Vec<Vec<f64>>,
    pub w_oh: Vec<Vec<f64>>,
    pub w_oi: Vec<Vec<f64>>,
    pub activation: HiddenActivation,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Net values, `N_v x N_h`.
    pub nets: DMatrix<f64>,
    /// Hidden activations, `N_v x N_h`.
    pub acts: DMatrix<f64>,
    /// Augmented basis vectors `[x | o | 1]`, `N_v x N_u`.
    pub xa: DMatrix<f64>,
    /// Network outputs, `N_v x M`.
    pub y: DMatrix<f64>,
}

impl ForwardCache {
    /// Residuals `t - y`.
    pub fn residuals(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        t - &self.y
    }
}

/// Autocorrelation `R` (N_u x N_u) and cross-correlation `C` (N_u x M), both
/// averaged over patterns.
#[derive(Debug, Clone)]
pub struct CorrelationSystem {
    pub r: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Mean target energy `(1/N_v) sum_p sum_i t_p(i)^2`.
    pub target_energy: f64,
}

pub fn build_correlations(xa: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<CorrelationSystem> {
    if xa.nrows() != t.nrows() {
        return Err(Error::Shape(format!(
            "{} basis rows vs {} target rows",
            xa.nrows(),
            t.nrows()
        )));
    }
    let nv = xa.nrows();
    if nv == 0 {
        return Err(Error::EmptyDataset);
    }
    let scale = 1.0 / nv as f64;
    let mut r = xa.tr_mul(xa) * scale;
    // exact symmetry regardless of the product kernel's summation order
    for i in 0..r.nrows() {
        for j in 0..i {
            let v = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    let c = xa.tr_mul(t) * scale;
    let target_energy = t.norm_squared() * scale;
    Ok(CorrelationSystem { r, c, target_energy })
}

/// Mean squared error summed over outputs and averaged over patterns.
pub fn mse(y: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<f64> {
    check_pair(y, t)?;
    Ok((t - y).norm_squared() / y.nrows() as f64)
}

/// Percentage of patterns whose predicted argmax class differs from the target's.
pub fn pe(y: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<f64> {
    check_pair(y, t)?;
    let wrong = (0..y.nrows())
        .filter(|&p| argmax(y.row(p).iter()) != argmax(t.row(p).iter()))
        .count();
    Ok(100.0 * wrong as f64 / y.nrows() as f64)
}

fn argmax<'a>(values: impl Iterator<Item = &'a f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn check_pair(y: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<()> {
    if y.shape() != t.shape() {
        return Err(Error::Shape(format!(
            "outputs {:?} vs targets {:?}",
            y.shape(),
            t.shape()
        )));
    }
    if y.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{HingeGrid, PiecewiseLinearActivation};
    use approx::assert_abs_diff_eq;

    fn identity_bank(units: usize) -> HiddenActivation {
        let bank = ActivationBank::from_ranges(
            &vec![(-2.0, 2.0); units],
            5,
            Reference::Identity,
            DEFAULT_LEAKY_SLOPE,
        )
        .unwrap();
        HiddenActivation::Adaptive { bank }
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = MlpNetwork::init(3, 4, 2, 7, 1.0, HiddenActivation::fixed(Reference::Tanh)).unwrap();
        let b = MlpNetwork::init(3, 4, 2, 7, 1.0, HiddenActivation::fixed(Reference::Tanh)).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.w.shape(), (4, 4));
        assert!(a.w_oh.iter().all(|&v| v == 0.0));
        assert!(a.w_oi.iter().all(|&v| v == 0.0));
        assert_eq!(a.basis_len(), 3 + 4 + 1);

        let z = MlpNetwork::init(3, 4, 2, 7, 0.0, HiddenActivation::fixed(Reference::Tanh)).unwrap();
        assert!(z.w.iter().all(|&v| v == 0.0));

        let tiny = MlpNetwork::init(1, 1, 1, 0, 1.0, HiddenActivation::fixed(Reference::Relu)).unwrap();
        assert_eq!(tiny.w.shape(), (1, 2));
        assert!(MlpNetwork::init(0, 1, 1, 0, 1.0, HiddenActivation::fixed(Reference::Relu)).is_err());
    }

    #[test]
    fn zero_input_weights_give_constant_hidden_outputs() {
        let mut net = MlpNetwork::init(2, 3, 1, 0, 0.0, identity_bank(3)).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, 3.0]);
        let cache = net.forward(&x).unwrap();
        assert!(cache.acts.iter().all(|&a| a == 0.0));
        assert!(cache.y.iter().all(|&y| y == 0.0));
        net.w_oh.fill(5.0);
        let cache = net.forward(&x).unwrap();
        assert!(cache.y.iter().all(|&y| y == 0.0));
        net.w_oi[(0, 2)] = 1.5;
        let cache = net.forward(&x).unwrap();
        assert!(cache.y.iter().all(|&y| y == 1.5));
    }

    #[test]
    fn scalar_network_matches_hand_computation() {
        let grid = HingeGrid::new(-1.0, 3.0, 5).unwrap();
        let pla = PiecewiseLinearActivation::new(grid, vec![0.5, -1.0, 2.0, 0.0, 1.0]).unwrap();
        let bank = ActivationBank::new(vec![pla]).unwrap();
        let mut net = MlpNetwork::init(1, 1, 1, 0, 0.0, HiddenActivation::Adaptive { bank }).unwrap();
        net.w[(0, 0)] = 0.8;
        net.w[(0, 1)] = 0.3;
        net.w_oh[(0, 0)] = -2.0;
        net.w_oi[(0, 0)] = 0.25;
        net.w_oi[(0, 1)] = 1.0;
        let x = DMatrix::from_element(1, 1, 1.5);
        let cache = net.forward(&x).unwrap();
        // n = 0.3 + 0.8 * 1.5 = 1.5 sits in [1, 2] with w1 = w2 = 0.5
        let n = 1.5;
        let o = 0.5 * 2.0 + 0.5 * 0.0;
        let y = 0.25 * 1.5 + 1.0 + -2.0 * o;
        assert_abs_diff_eq!(cache.nets[(0, 0)], n, epsilon = 1e-15);
        assert_abs_diff_eq!(cache.acts[(0, 0)], o, epsilon = 1e-15);
        assert_abs_diff_eq!(cache.y[(0, 0)], y, epsilon = 1e-14);
        assert_eq!(cache.xa[(0, 0)], 1.5);
        assert_abs_diff_eq!(cache.xa[(0, 1)], o, epsilon = 1e-15);
        assert_eq!(cache.xa[(0, 2)], 1.0);
    }

    #[test]
    fn outputs_are_linear_in_output_weights() {
        let mut net = MlpNetwork::init(2, 3, 2, 4, 1.0, HiddenActivation::fixed(Reference::Tanh)).unwrap();
        net.w_oh = DMatrix::from_fn(2, 3, |i, j| (i as f64 - j as f64) * 0.3);
        net.w_oi = DMatrix::from_fn(2, 3, |i, j| 0.1 * (i + 2 * j) as f64);
        let x = DMatrix::from_fn(5, 2, |p, j| (p as f64 * 0.7 - j as f64).sin());
        let y1 = net.predict(&x).unwrap();
        let mut scaled = net.clone();
        scaled.w_oh *= 2.5;
        scaled.w_oi *= 2.5;
        let y2 = scaled.predict(&x).unwrap();
        assert!((y2 - y1 * 2.5).amax() < 1e-12);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = MlpNetwork::init(2, 1, 1, 0, 1.0, HiddenActivation::fixed(Reference::Tanh)).unwrap();
        let mut x = DMatrix::zeros(3, 2);
        x[(2, 1)] = f64::NAN;
        match net.forward(&x) {
            Err(Error::NonFiniteInput { pattern, column }) => assert_eq!((pattern, column), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(net.forward(&DMatrix::zeros(3, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn output_weight_packing_round_trips() {
        let mut net = MlpNetwork::init(2, 3, 2, 1, 1.0, HiddenActivation::fixed(Reference::Relu)).unwrap();
        let wo = DMatrix::from_fn(2, 6, |i, j| (10 * i + j) as f64);
        net.set_output_weights(&wo).unwrap();
        assert_eq!(net.w_oi, DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 5.0, 10.0, 11.0, 15.0]));
        assert_eq!(net.w_oh, DMatrix::from_row_slice(2, 3, &[2.0, 3.0, 4.0, 12.0, 13.0, 14.0]));
        assert_eq!(net.output_weights(), wo);
    }

    #[test]
    fn correlations_single_pattern() {
        let xa = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let t = DMatrix::from_row_slice(1, 1, &[3.0]);
        let sys = build_correlations(&xa, &t).unwrap();
        assert_eq!(sys.r, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert_eq!(sys.c, DMatrix::from_row_slice(2, 1, &[3.0, 6.0]));
        assert_eq!(sys.target_energy, 9.0);
    }

    #[test]
    fn correlations_orthonormal_rows_and_zero_targets() {
        let xa = DMatrix::<f64>::identity(4, 4);
        let sys = build_correlations(&xa, &DMatrix::zeros(4, 2)).unwrap();
        assert_eq!(sys.r, DMatrix::identity(4, 4) * 0.25);
        assert!(sys.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn correlations_symmetric() {
        let xa = DMatrix::from_fn(37, 6, |p, j| ((p * 7 + j * 3) as f64).sin() * 1e3);
        let t = DMatrix::from_fn(37, 2, |p, i| (p + i) as f64);
        let sys = build_correlations(&xa, &t).unwrap();
        assert!((&sys.r - sys.r.transpose()).amax() <= 1e-12);
        assert!(matches!(
            build_correlations(&xa, &DMatrix::zeros(3, 1)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn error_metrics() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(mse(&t, &t).unwrap(), 0.0);
        assert_eq!(pe(&t, &t).unwrap(), 0.0);
        let one = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(mse(&DMatrix::zeros(1, 1), &one).unwrap(), 1.0);
        let y = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.8, 0.2]);
        assert_eq!(pe(&y, &t).unwrap(), 50.0);
        assert!(matches!(
            mse(&DMatrix::zeros(0, 1), &DMatrix::zeros(0, 1)),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut net = MlpNetwork::init(2, 3, 2, 9, 1.0, identity_bank(3)).unwrap();
        net.w_oh[(1, 2)] = 0.1 + 0.2;
        let json = serde_json::to_string(&net.to_checkpoint()).unwrap();
        let back = MlpNetwork::from_checkpoint(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, net);
    }
}
