//! Datasets: synthetic generators, CSV ingestion, standardization and fold plans.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Approximation,
    Classification,
}

/// Patterns `x` (`N_v x N`) and targets `t` (`N_v x M`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub kind: DatasetKind,
    pub names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, t: DMatrix<f64>, kind: DatasetKind) -> Result<Self> {
        if x.nrows() != t.nrows() {
            return Err(Error::Shape(format!(
                "{} patterns but {} target rows",
                x.nrows(),
                t.nrows()
            )));
        }
        if kind == DatasetKind::Classification {
            for p in 0..t.nrows() {
                let ones = t.row(p).iter().filter(|&&v| v == 1.0).count();
                let zeros = t.row(p).iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || ones + zeros != t.ncols() {
                    return Err(Error::Shape(format!("target row {p} is not one-hot")));
                }
            }
        }
        Ok(Self {
            x,
            t,
            kind,
            names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn inputs(&self) -> usize {
        self.x.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.t.ncols()
    }

    /// The patterns at `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            t: self.t.select_rows(rows),
            kind: self.kind,
            names: self.names.clone(),
        }
    }

    /// First `n` patterns and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        (self.select(&head), self.select(&tail))
    }

    /// Writes `x` columns followed by `t` columns with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let header: Vec<String> = match &self.names {
            Some(names) if names.len() == self.inputs() + self.outputs() => names.clone(),
            _ => (0..self.inputs())
                .map(|j| format!("x{}", j + 1))
                .chain((0..self.outputs()).map(|i| format!("t{}", i + 1)))
                .collect(),
        };
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for p in 0..self.len() {
            let row: Vec<String> = self
                .x
                .row(p)
                .iter()
                .chain(self.t.row(p).iter())
                .map(|v| v.to_string())
                .collect();
            w.write_record(&row).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Sine data: training `x ~ U(0, 4 pi)`, test `x ~ U(0, 2 pi)`, `t = sin(x)`.
pub fn gen_sine(n_train: usize, n_test: usize, seed: u64) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize, hi: f64| {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=hi)).collect();
        let t: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        Dataset {
            x: DMatrix::from_vec(n, 1, x),
            t: DMatrix::from_vec(n, 1, t),
            kind: DatasetKind::Approximation,
            names: Some(vec!["x".into(), "sin".into()]),
        }
    };
    let train = draw(n_train, 4.0 * PI);
    let test = draw(n_test, 2.0 * PI);
    (train, test)
}

pub fn rosenbrock(x1: f64, x2: f64) -> f64 {
    (1.0 - x1).powi(2) + 100.0 * (x2 - x1 * x1).powi(2)
}

/// Rosenbrock surface sampled uniformly over `[-2, 2]^2`.
pub fn gen_rosenbrock(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, 2);
    let mut t = DMatrix::zeros(n, 1);
    for p in 0..n {
        let x1 = rng.gen_range(-2.0..=2.0);
        let x2 = rng.gen_range(-2.0..=2.0);
        x[(p, 0)] = x1;
        x[(p, 1)] = x2;
        t[(p, 0)] = rosenbrock(x1, x2);
    }
    Dataset {
        x,
        t,
        kind: DatasetKind::Approximation,
        names: Some(vec!["x1".into(), "x2".into(), "t".into()]),
    }
}

/// Reads a comma-delimited file of `n_inputs` input columns followed by
/// `n_outputs` target columns.
///
/// For classification the single target column holds an integer class label,
/// expanded to a one-hot row over the sorted distinct labels. A first row that
/// does not parse as numbers is taken as a header.
pub fn load_csv(path: &Path, n_inputs: usize, n_outputs: usize, kind: DatasetKind) -> Result<Dataset> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if kind == DatasetKind::Classification && n_outputs != 1 {
        return Err(Error::Config(
            "classification files carry exactly one label column".into(),
        ));
    }
    let width = n_inputs + n_outputs;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;

    let mut names = None;
    let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(index as u64 + 1, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => {
                if let Some(j) = values.iter().position(|v| !v.is_finite()) {
                    return Err(parse_err(line, format!("field {} is not finite", j + 1)));
                }
                rows.push((line, values));
            }
            Err(_) if rows.is_empty() && names.is_none() => {
                names = Some(record.iter().map(str::to_owned).collect());
            }
            Err(_) => {
                let (j, bad) = record
                    .iter()
                    .enumerate()
                    .find(|(_, f)| f.parse::<f64>().is_err())
                    .expect("a field failed to parse");
                return Err(parse_err(
                    line,
                    format!("field {} (`{bad}`) is not a number", j + 1),
                ));
            }
        }
    }
    if rows.is_empty() {
        return Err(parse_err(1, "file holds no data rows".into()));
    }

    let nv = rows.len();
    let x = DMatrix::from_fn(nv, n_inputs, |p, j| rows[p].1[j]);
    let t = match kind {
        DatasetKind::Approximation => DMatrix::from_fn(nv, n_outputs, |p, i| rows[p].1[n_inputs + i]),
        DatasetKind::Classification => {
            let mut labels = Vec::with_capacity(nv);
            for (line, values) in &rows {
                let v = values[n_inputs];
                if v.fract() != 0.0 {
                    return Err(parse_err(*line, format!("class label {v} is not an integer")));
                }
                labels.push(v as i64);
            }
            let classes: Vec<i64> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            let mut t = DMatrix::zeros(nv, classes.len());
            for (p, label) in labels.iter().enumerate() {
                let c = classes.binary_search(label).expect("label collected above");
                t[(p, c)] = 1.0;
            }
            t
        }
    };
    Ok(Dataset { x, t, kind, names })
}

/// Per-column statistics from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
    /// Columns with zero spread, left untouched.
    pub constant_columns: Vec<usize>,
}

impl Standardization {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let nv = x.nrows();
        if nv == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std_dev = Vec::with_capacity(x.ncols());
        let mut constant_columns = Vec::new();
        for (j, col) in x.column_iter().enumerate() {
            let mu = col.sum() / nv as f64;
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / nv as f64;
            let sd = var.sqrt();
            if !(sd > 1e-12 * mu.abs().max(1.0)) {
                log::warn!("input column {j} is constant; leaving it unscaled");
                constant_columns.push(j);
            }
            mean.push(mu);
            std_dev.push(sd);
        }
        Ok(Self {
            mean,
            std_dev,
            constant_columns,
        })
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            if self.constant_columns.contains(&j) {
                continue;
            }
            let (mu, sd) = (self.mean[j], self.std_dev[j]);
            col.apply(|v| *v = (*v - mu) / sd);
        }
        out
    }
}

/// Z-scores the inputs of both splits with training statistics; targets are untouched.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Standardization)> {
    let stats = Standardization::fit(&train.x)?;
    let mut train2 = train.clone();
    let mut test2 = test.clone();
    train2.x = stats.apply(&train.x);
    test2.x = stats.apply(&test.x);
    Ok((train2, test2, stats))
}

/// Assignment of every pattern to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Seeded shuffle followed by round-robin assignment.
    pub fn new(patterns: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {k}")));
        }
        if patterns < k {
            return Err(Error::TooFewPatterns {
                needed: k,
                got: patterns,
            });
        }
        let mut order: Vec<usize> = (0..patterns).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignments = vec![0; patterns];
        for (i, &p) in order.iter().enumerate() {
            assignments[p] = i % k;
        }
        Ok(Self { k, assignments })
    }

    /// `(training rows, held-out rows)` for `fold`.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignments.len()).partition(|&p| self.assignments[p] != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn sine_ranges_and_values() {
        let (train, test) = gen_sine(5000, 100, 3);
        assert_eq!((train.len(), test.len()), (5000, 100));
        assert!(train.x.iter().all(|&x| (0.0..=4.0 * PI).contains(&x)));
        assert!(test.x.iter().all(|&x| (0.0..=2.0 * PI).contains(&x)));
        for p in 0..train.len() {
            assert_eq!(train.t[(p, 0)], train.x[(p, 0)].sin());
        }
        assert_eq!((PI / 2.0).sin(), 1.0);
        let (again, _) = gen_sine(5000, 100, 3);
        assert_eq!(again, train);
        let (other, _) = gen_sine(5000, 100, 4);
        assert_ne!(other, train);
    }

    #[test]
    fn rosenbrock_values() {
        assert_eq!(rosenbrock(1.0, 1.0), 0.0);
        assert_eq!(rosenbrock(0.0, 0.0), 1.0);
        assert_eq!(rosenbrock(-1.0, 1.0), 4.0);
        let d = gen_rosenbrock(200, 1);
        assert!(d.x.iter().all(|v| (-2.0..=2.0).contains(v)));
        for p in 0..d.len() {
            assert_eq!(d.t[(p, 0)], rosenbrock(d.x[(p, 0)], d.x[(p, 1)]));
        }
        assert_eq!(gen_rosenbrock(200, 1), d);
    }

    #[test]
    fn csv_approximation() {
        let f = write_tmp("1,2,3\n4,5,6");
        let d = load_csv(f.path(), 2, 1, DatasetKind::Approximation).unwrap();
        assert_eq!(d.x, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 5.0]));
        assert_eq!(d.t, DMatrix::from_row_slice(2, 1, &[3.0, 6.0]));
        assert!(d.names.is_none());
    }

    #[test]
    fn csv_header_detected() {
        let f = write_tmp("a,b,target\n1,2,3\n");
        let d = load_csv(f.path(), 2, 1, DatasetKind::Approximation).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.names.unwrap(), vec!["a", "b", "target"]);
    }

    #[test]
    fn csv_classification_one_hot() {
        let f = write_tmp("0.5,2\n1.5,0\n2.5,1\n3.5,2\n");
        let d = load_csv(f.path(), 1, 1, DatasetKind::Classification).unwrap();
        assert_eq!(d.outputs(), 3);
        assert_eq!(d.t.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0]);
        assert_eq!(d.t.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let f = write_tmp("1,2,3\n4,abc,6\n");
        match load_csv(f.path(), 2, 1, DatasetKind::Approximation) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp("1,2,3\n4,5\n");
        assert!(matches!(
            load_csv(f.path(), 2, 1, DatasetKind::Approximation),
            Err(Error::Parse { line: 2, .. })
        ));
        let f = write_tmp("");
        assert!(matches!(
            load_csv(f.path(), 2, 1, DatasetKind::Approximation),
            Err(Error::Parse { .. })
        ));
        let f = write_tmp("1,0.5\n");
        assert!(load_csv(f.path(), 1, 1, DatasetKind::Classification).is_err());
    }

    #[test]
    fn standardize_uses_training_statistics() {
        let train = Dataset::new(
            DMatrix::from_row_slice(4, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0]),
            DMatrix::zeros(4, 1),
            DatasetKind::Approximation,
        )
        .unwrap();
        let test = Dataset::new(
            DMatrix::from_row_slice(1, 2, &[2.5, 7.0]),
            DMatrix::from_element(1, 1, 9.0),
            DatasetKind::Approximation,
        )
        .unwrap();
        let (tr, te, stats) = standardize(&train, &test).unwrap();
        assert_eq!(stats.constant_columns, vec![1]);
        assert_abs_diff_eq!(tr.x.column(0).sum(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(te.x[(0, 0)], 0.0, epsilon = 1e-12);
        assert_eq!(te.x[(0, 1)], 7.0);
        assert_eq!(tr.x.column(1), train.x.column(1));
        assert_eq!(te.t, test.t);
    }

    #[test]
    fn standardize_leaves_unit_columns_alone() {
        let x = DMatrix::from_column_slice(4, 1, &[-1.0, 1.0, -1.0, 1.0]);
        let stats = Standardization::fit(&x).unwrap();
        assert!((stats.apply(&x) - &x).amax() < 1e-12);
    }

    #[test]
    fn fold_plan_basics() {
        let plan = FoldPlan::new(5, 5, 0).unwrap();
        assert!(plan.fold_sizes().iter().all(|&s| s == 1));
        assert!(FoldPlan::new(3, 4, 0).is_err());
        assert!(FoldPlan::new(10, 1, 0).is_err());
        assert_eq!(FoldPlan::new(23, 4, 9).unwrap(), FoldPlan::new(23, 4, 9).unwrap());
    }

    proptest! {
        #[test]
        fn folds_partition_patterns(n in 2usize..300, k in 2usize..12, seed: u64) {
            prop_assume!(n >= k);
            let plan = FoldPlan::new(n, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut seen = vec![0; n];
            for f in 0..k {
                let (train, held) = plan.split(f);
                prop_assert_eq!(train.len() + held.len(), n);
                for p in held { seen[p] += 1; }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn standardize_is_idempotent(values in prop::collection::vec(-1e3..1e3f64, 6..60)) {
            let n = values.len() / 2;
            let x = DMatrix::from_column_slice(n, 2, &values[..2 * n]);
            prop_assume!(Standardization::fit(&x).unwrap().constant_columns.is_empty());
            let once = Standardization::fit(&x).unwrap().apply(&x);
            let twice = Standardization::fit(&once).unwrap().apply(&once);
            prop_assert!((twice - once).amax() <= 1e-12);
        }
    }
}
