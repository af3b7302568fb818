//! Single-hidden-layer perceptrons with trainable piecewise-linear hidden
//! activations, trained by alternating second-order steps: a multiple
//! optimal learning factor (MOLF) input-weight step, an optimal-learning-factor
//! hinge-height step and an orthogonal-least-squares output-weight solve.
//!
//! Conjugate-gradient baselines, closed-form per-iteration multiply counts and
//! a small experiment harness (synthetic data, CSV loading, k-fold
//! cross-validation) are included.

pub mod activations;
pub mod burden;
pub mod crossval;
pub mod data;
pub mod error;
pub mod network;
pub mod ols;
pub mod trainers;

pub use activations::{ActivationBank, HingeGrid, PiecewiseLinearActivation, Reference};
pub use data::{Dataset, DatasetKind};
pub use error::{Error, Result};
pub use network::{HiddenActivation, MlpNetwork};
pub use trainers::{train, TrainConfig, TrainRun, TrainerKind};
