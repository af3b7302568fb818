//! k-fold cross-validation over independent network copies.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{standardize, Dataset, DatasetKind, FoldPlan};
use crate::error::{Error, Result};
use crate::network::{mse, pe};
use crate::trainers::{train, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub test_pe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValReport {
    pub trainer: String,
    pub k: usize,
    pub folds: Vec<FoldResult>,
    pub mean_test_mse: f64,
    pub std_test_mse: f64,
    pub mean_test_pe: Option<f64>,
    pub std_test_pe: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains one network per fold, each validated on its held-out patterns.
///
/// Inputs are standardized with each fold's training statistics. Fold `f`
/// initializes its weights from `config.seed + f`. Folds run on up to `threads`
/// workers; results are collected in fold order.
pub fn crossval(config: &TrainConfig, data: &Dataset, k: usize, seed: u64, threads: usize) -> Result<CrossValReport> {
    let plan = FoldPlan::new(data.len(), k, seed)?;
    if let Some(f) = plan.fold_sizes().iter().position(|&s| s == 0) {
        return Err(Error::Config(format!("fold {f} holds no patterns")));
    }
    let run_fold = |fold: usize| -> Result<FoldResult> {
        let (train_rows, test_rows) = plan.split(fold);
        let (train_set, test_set, _) = standardize(&data.select(&train_rows), &data.select(&test_rows))?;
        let fold_config = TrainConfig {
            seed: config.seed.wrapping_add(fold as u64),
            ..config.clone()
        };
        let run = train(&fold_config, &train_set, None)?;
        let y = run.network.predict(&test_set.x)?;
        Ok(FoldResult {
            fold,
            train_size: train_rows.len(),
            test_size: test_rows.len(),
            train_mse: run.final_train_mse(),
            test_mse: mse(&y, &test_set.t)?,
            test_pe: match data.kind {
                DatasetKind::Classification => Some(pe(&y, &test_set.t)?),
                DatasetKind::Approximation => None,
            },
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let folds: Vec<FoldResult> = pool.install(|| {
        (0..k)
            .into_par_iter()
            .map(run_fold)
            .collect::<Result<Vec<_>>>()
    })?;

    let mses: Vec<f64> = folds.iter().map(|f| f.test_mse).collect();
    let (mean_test_mse, std_test_mse) = mean_std(&mses);
    let pes: Option<Vec<f64>> = folds.iter().map(|f| f.test_pe).collect();
    let (mean_test_pe, std_test_pe) = match pes {
        Some(p) => {
            let (m, s) = mean_std(&p);
            (Some(m), Some(s))
        }
        None => (None, None),
    };
    Ok(CrossValReport {
        trainer: config.trainer.name().to_owned(),
        k,
        folds,
        mean_test_mse,
        std_test_mse,
        mean_test_pe,
        std_test_pe,
    })
}

impl CrossValReport {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(out, "fold,train_size,test_size,train_mse,test_mse,test_pe")?;
        for f in &self.folds {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                f.fold,
                f.train_size,
                f.test_size,
                f.train_mse,
                f.test_mse,
                opt(f.test_pe)
            )?;
        }
        writeln!(out, "mean,,,,{},{}", self.mean_test_mse, opt(self.mean_test_pe))?;
        writeln!(out, "std,,,,{},{}", self.std_test_mse, opt(self.std_test_pe))
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let mut s = format!("{}-fold cross-validation, trainer {}\n", self.k, self.trainer);
        s.push_str("fold  n_train  n_test  train_mse     test_mse      test_pe\n");
        for f in &self.folds {
            s.push_str(&format!(
                "{:>4}  {:>7}  {:>6}  {:<12.6e}  {:<12.6e}  {}\n",
                f.fold,
                f.train_size,
                f.test_size,
                f.train_mse,
                f.test_mse,
                f.test_pe.map(|p| format!("{p:.2}")).unwrap_or_else(|| "-".into())
            ));
        }
        s.push_str(&format!(
            "test mse: mean {:.6e}  std {:.6e}\n",
            self.mean_test_mse, self.std_test_mse
        ));
        if let (Some(m), Some(sd)) = (self.mean_test_pe, self.std_test_pe) {
            s.push_str(&format!("test pe:  mean {m:.2}  std {sd:.2}\n"));
        }
        s
    }
}
