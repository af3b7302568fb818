//! Subcommand implementations. Every artifact is a pure function of the
//! config, so reruns produce byte-identical files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use adact_core::burden::{burden, Algorithm, BurdenInput};
use adact_core::crossval::crossval;
use adact_core::data::{gen_rosenbrock, gen_sine, load_csv, standardize, Standardization};
use adact_core::network::{mse, pe, Checkpoint, HiddenActivation};
use adact_core::trainers::train;
use adact_core::{Dataset, DatasetKind, MlpNetwork};
use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{DataParams, ExperimentConfig};

/// Samples drawn per unit when dumping the shape of a fixed activation.
const FIXED_SHAPE_SAMPLES: usize = 21;

/// Network plus the input statistics it was trained under.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunCheckpoint {
    pub network: Checkpoint,
    pub standardization: Option<Standardization>,
}

/// Raw training split and, when the source provides one, the test split.
pub fn load_data(config: &ExperimentConfig) -> Result<(Dataset, Option<Dataset>)> {
    let (train_set, test_set) = match config.data_params()? {
        DataParams::Sine(p) => gen_sine(p.n_train, p.n_test, p.seed),
        DataParams::Rosenbrock(p) => gen_rosenbrock(p.n_train + p.n_test, p.seed).split_at(p.n_train),
        DataParams::Csv(p) => {
            let all = load_csv(&p.path, p.n_inputs, p.n_outputs, p.kind)?;
            match &p.test_path {
                Some(test_path) => (all, load_csv(test_path, p.n_inputs, p.n_outputs, p.kind)?),
                None => {
                    let held = (all.len() as f64 * p.test_fraction).round() as usize;
                    all.split_at(all.len() - held)
                }
            }
        }
    };
    if train_set.is_empty() {
        bail!("the training split is empty");
    }
    Ok((train_set, (!test_set.is_empty()).then_some(test_set)))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    write(&mut out)
        .and_then(|_| out.flush())
        .with_context(|| format!("cannot write {}", path.display()))
}

fn write_config_copy(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(config)?;
    write_file(&dir.join("config.json"), |out| writeln!(out, "{text}"))
}

fn write_datasets(train_set: &Dataset, test_set: Option<&Dataset>, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = vec![dir.join("train.csv")];
    train_set.write_csv(&written[0])?;
    if let Some(t) = test_set {
        written.push(dir.join("test.csv"));
        t.write_csv(&written[1])?;
    }
    Ok(written)
}

pub fn cmd_gen(config: &ExperimentConfig) -> Result<()> {
    let dir = &config.output.directory;
    create_dir(dir)?;
    let (train_set, test_set) = load_data(config)?;
    write_config_copy(config, dir)?;
    for path in write_datasets(&train_set, test_set.as_ref(), dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<()> {
    let dir = &config.output.directory;
    create_dir(dir)?;
    let (raw_train, raw_test) = load_data(config)?;
    write_config_copy(config, dir)?;
    write_datasets(&raw_train, raw_test.as_ref(), dir)?;

    let (train_set, test_set, stats) = match (&raw_test, config.data.standardize) {
        (Some(test), true) => {
            let (a, b, s) = standardize(&raw_train, test)?;
            (a, Some(b), Some(s))
        }
        (None, true) => {
            let (a, _, s) = standardize(&raw_train, &raw_train)?;
            (a, None, Some(s))
        }
        (test, false) => (raw_train.clone(), test.clone(), None),
    };

    let train_config = config.train_config();
    let run = train(&train_config, &train_set, test_set.as_ref())?;

    write_file(&dir.join("history.csv"), |out| run.write_history_csv(out))?;
    let checkpoint = RunCheckpoint {
        network: run.network.to_checkpoint(),
        standardization: stats,
    };
    let text = serde_json::to_string_pretty(&checkpoint)?;
    write_file(&dir.join("checkpoint.json"), |out| writeln!(out, "{text}"))?;

    let mut rows = vec![("train_mse".to_owned(), run.final_train_mse().to_string())];
    if let Some(test) = &test_set {
        let y = run.network.predict(&test.x)?;
        rows.push(("test_mse".into(), mse(&y, &test.t)?.to_string()));
        if test.kind == DatasetKind::Classification {
            rows.push(("test_pe".into(), pe(&y, &test.t)?.to_string()));
        }
    }
    rows.push((
        "multiplies".into(),
        run.records.last().map(|r| r.multiplies_cumulative).unwrap_or(0).to_string(),
    ));
    write_file(&dir.join("report.csv"), |out| {
        writeln!(out, "metric,value")?;
        rows.iter().try_for_each(|(k, v)| writeln!(out, "{k},{v}"))
    })?;

    println!("trainer {} finished {} iterations", train_config.trainer.name(), run.records.len());
    for (k, v) in &rows {
        println!("  {k:<11} {v}");
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

pub fn cmd_xval(config: &ExperimentConfig, threads: usize) -> Result<()> {
    let dir = &config.output.directory;
    create_dir(dir)?;
    let (data, _) = load_data(config)?;
    write_config_copy(config, dir)?;
    let report = crossval(&config.train_config(), &data, config.eval.k_folds, config.eval.seed, threads)?;
    write_file(&dir.join("report.csv"), |out| report.write_csv(out))?;
    print!("{}", report.table());
    Ok(())
}

pub fn burden_table(dims: &BurdenInput) -> String {
    let mut s = format!(
        "multiplies per iteration for N={} N_h={} M={} N_v={} H={}\n",
        dims.inputs, dims.hidden, dims.outputs, dims.patterns, dims.hinges
    );
    s.push_str("algorithm  multiplies\n");
    for alg in Algorithm::ALL {
        s.push_str(&format!("{:<9}  {}\n", alg.name(), burden(alg, dims)));
    }
    s
}

pub fn burden_csv(dims: &BurdenInput) -> String {
    let mut s = String::from("algorithm,multiplies\n");
    for alg in Algorithm::ALL {
        s.push_str(&format!("{},{}\n", alg.name(), burden(alg, dims)));
    }
    s
}

fn column_names(prefix: &str, count: usize) -> Vec<String> {
    if count == 1 {
        vec![prefix.to_owned()]
    } else {
        (1..=count).map(|i| format!("{prefix}{i}")).collect()
    }
}

/// Writes `plot.csv` (inputs, targets, predictions per pattern) and
/// `activations.csv` (hidden-unit shapes) for a finished run.
pub fn cmd_plotdata(run_dir: &Path, out_dir: &Path) -> Result<()> {
    let path = run_dir.join("checkpoint.json");
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let checkpoint: RunCheckpoint = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| anyhow::anyhow!("invalid checkpoint at `{}`: {}", e.path(), e.inner()))
        .with_context(|| format!("in {}", path.display()))?;
    let net = MlpNetwork::from_checkpoint(checkpoint.network)?;

    let test_path = run_dir.join("test.csv");
    let data_path = if test_path.exists() { test_path } else { run_dir.join("train.csv") };
    let data = load_csv(&data_path, net.inputs(), net.outputs(), DatasetKind::Approximation)?;
    let x = match &checkpoint.standardization {
        Some(s) => s.apply(&data.x),
        None => data.x.clone(),
    };
    let cache = net.forward(&x)?;

    create_dir(out_dir)?;
    let plot_path = out_dir.join("plot.csv");
    let mut w = csv::Writer::from_path(&plot_path).with_context(|| format!("cannot create {}", plot_path.display()))?;
    let header: Vec<String> = column_names("x", net.inputs())
        .into_iter()
        .chain(column_names("target", net.outputs()))
        .chain(column_names("prediction", net.outputs()))
        .collect();
    w.write_record(&header)?;
    for p in 0..data.len() {
        let row: Vec<String> = data
            .x
            .row(p)
            .iter()
            .chain(data.t.row(p).iter())
            .chain(cache.y.row(p).iter())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;

    let shape_path = out_dir.join("activations.csv");
    let shapes = activation_shapes(&net, &cache.nets);
    write_file(&shape_path, |out| {
        writeln!(out, "unit,ns,a")?;
        shapes.iter().try_for_each(|(k, n, a)| writeln!(out, "{k},{n},{a}"))
    })?;
    println!("wrote {} ({} rows)", plot_path.display(), data.len());
    println!("wrote {}", shape_path.display());
    Ok(())
}

/// Hinges and heights for adaptive units; fixed units are sampled evenly
/// over the nets they saw.
fn activation_shapes(net: &MlpNetwork, nets: &DMatrix<f64>) -> Vec<(usize, f64, f64)> {
    let mut rows = Vec::new();
    match &net.activation {
        HiddenActivation::Adaptive { bank } => {
            for (k, unit) in bank.units().iter().enumerate() {
                for (n, a) in unit.grid().abscissae().iter().zip(unit.heights()) {
                    rows.push((k + 1, *n, *a));
                }
            }
        }
        fixed => {
            for k in 0..net.hidden() {
                let col = nets.column(k);
                let (lo, hi) = (col.min(), col.max());
                for i in 0..FIXED_SHAPE_SAMPLES {
                    let n = lo + (hi - lo) * i as f64 / (FIXED_SHAPE_SAMPLES - 1) as f64;
                    rows.push((k + 1, n, fixed.value(k, n)));
                }
            }
        }
    }
    rows
}
