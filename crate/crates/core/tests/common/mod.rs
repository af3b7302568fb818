#![allow(dead_code)]

use adact_core::activations::{ActivationBank, HingeGrid, PiecewiseLinearActivation};
use adact_core::network::{HiddenActivation, MlpNetwork};
use adact_core::{Dataset, DatasetKind};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.gen_range(lo..hi);
        }
    }
    m
}

/// Network with random weights everywhere and random hinge heights on grids
/// roughly covering `[-2, 2]`.
pub fn random_adaptive_net(rng: &mut ChaCha8Rng, n: usize, nh: usize, m: usize, hinges: usize) -> MlpNetwork {
    let units = (0..nh)
        .map(|_| {
            let r = rng.gen_range(-2.5..-1.5);
            let s = rng.gen_range(1.5..2.5);
            let grid = HingeGrid::new(r, s, hinges).unwrap();
            let heights = (0..hinges).map(|_| rng.gen_range(-1.0..1.0)).collect();
            PiecewiseLinearActivation::new(grid, heights).unwrap()
        })
        .collect();
    MlpNetwork {
        w: uniform_matrix(rng, nh, n + 1, -1.0, 1.0),
        w_oh: uniform_matrix(rng, m, nh, -1.0, 1.0),
        w_oi: uniform_matrix(rng, m, n + 1, -1.0, 1.0),
        activation: HiddenActivation::Adaptive {
            bank: ActivationBank::new(units).unwrap(),
        },
    }
}

pub fn random_dataset(rng: &mut ChaCha8Rng, nv: usize, n: usize, m: usize) -> Dataset {
    Dataset::new(
        uniform_matrix(rng, nv, n, -1.5, 1.5),
        uniform_matrix(rng, nv, m, -1.0, 1.0),
        DatasetKind::Approximation,
    )
    .unwrap()
}

/// Drops patterns whose net value for any unit lies within `gap` of a hinge.
pub fn away_from_hinges(net: &MlpNetwork, data: &Dataset, gap: f64) -> Dataset {
    let nets = net.nets(&data.x).unwrap();
    let bank = net.activation.bank().unwrap();
    let keep: Vec<usize> = (0..data.len())
        .filter(|&p| {
            (0..net.hidden()).all(|k| {
                let n = nets[(p, k)];
                bank.unit(k).grid().abscissae().iter().all(|h| (n - h).abs() > gap)
            })
        })
        .collect();
    data.select(&keep)
}

/// `|a - b| <= tol * max(|a|, |b|)`, with an absolute floor for values near zero.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-6)
}
