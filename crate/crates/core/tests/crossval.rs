mod common;

use adact_core::crossval::crossval;
use adact_core::trainers::{TrainConfig, TrainerKind};
use adact_core::{Dataset, DatasetKind, Reference};
use common::uniform_matrix;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn linear_dataset(nv: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let x = uniform_matrix(&mut rng, nv, 2, -1.0, 1.0);
    let t = DMatrix::from_fn(nv, 1, |p, _| 1.5 * x[(p, 0)] - 0.5 * x[(p, 1)] + 0.25);
    Dataset::new(x, t, DatasetKind::Approximation).unwrap()
}

fn config(trainer: TrainerKind, iterations: usize) -> TrainConfig {
    TrainConfig {
        trainer,
        iterations,
        hidden: 2,
        hinges: 5,
        init_activation: Reference::Tanh,
        ..Default::default()
    }
}

#[test]
fn leave_one_out_uses_single_pattern_folds() {
    let data = linear_dataset(12);
    let report = crossval(&config(TrainerKind::Molf, 3), &data, 12, 1, 2).unwrap();
    assert_eq!(report.folds.len(), 12);
    assert!(report.folds.iter().all(|f| f.test_size == 1 && f.train_size == 11));
}

#[test]
fn same_seed_gives_identical_reports() {
    let data = linear_dataset(40);
    let a = crossval(&config(TrainerKind::Adact, 5), &data, 4, 9, 1).unwrap();
    let b = crossval(&config(TrainerKind::Adact, 5), &data, 4, 9, 4).unwrap();
    assert_eq!(a, b);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn linear_targets_cross_validate_to_zero_for_every_trainer() {
    let data = linear_dataset(60);
    // the scaled step control wastes every failed step, so give it room
    for trainer in [TrainerKind::Adact, TrainerKind::Molf, TrainerKind::Cg, TrainerKind::Scg] {
        let report = crossval(&config(trainer, 500), &data, 5, 3, 2).unwrap();
        assert!(report.mean_test_mse <= 1e-6, "{trainer:?}: {}", report.mean_test_mse);
    }
}

#[test]
fn more_folds_than_patterns_is_an_error() {
    let data = linear_dataset(5);
    assert!(crossval(&config(TrainerKind::Molf, 2), &data, 6, 0, 1).is_err());
    assert!(crossval(&config(TrainerKind::Molf, 2), &data, 1, 0, 1).is_err());
}

#[test]
fn classification_reports_error_percentages() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = uniform_matrix(&mut rng, 30, 2, -1.0, 1.0);
    let t = DMatrix::from_fn(30, 2, |p, i| ((x[(p, 0)] > 0.0) as usize == i) as u8 as f64);
    let data = Dataset::new(x, t, DatasetKind::Classification).unwrap();
    let report = crossval(&config(TrainerKind::Adact, 10), &data, 3, 0, 1).unwrap();
    let pe = report.mean_test_pe.unwrap();
    assert!((0.0..=100.0).contains(&pe));
    assert!(report.folds.iter().all(|f| f.test_pe.is_some()));
}
