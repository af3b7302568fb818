use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn adact(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_adact"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("ADACT_THREADS", t);
    }
    cmd.output().expect("run adact")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn sine_config(out: &Path) -> String {
    format!(
        r#"{{
  "data": {{ "source": "gen_sine", "params": {{ "n_train": 300, "n_test": 40, "seed": 2 }} }},
  "model": {{ "N_h": 1, "H": 12, "init_activation": "tanh" }},
  "train": {{ "trainer": "adact", "N_it": 15, "seed": 4, "optimizer_for_acts": "olf" }},
  "eval": {{ "k_folds": 3 }},
  "output": {{ "directory": {:?} }}
}}"#,
        out
    )
}

#[test]
fn burden_prints_worked_rows() {
    let out = adact(
        &["burden", "--inputs", "4", "--hidden", "3", "--outputs", "2", "--patterns", "10", "--hinges", "7"],
        None,
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = |name: &str| {
        text.lines()
            .find(|l| l.split_whitespace().next() == Some(name))
            .and_then(|l| l.split_whitespace().nth(1))
            .map(str::to_owned)
    };
    assert_eq!(row("molf").as_deref(), Some("2304"));
    assert_eq!(row("adact").as_deref(), Some("2325"));
    assert_eq!(row("ols").as_deref(), Some("1884"));
    assert_eq!(row("cg"), row("scg"));
}

#[test]
fn train_twice_gives_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let config = write_config(tmp.path(), "sine.json", &sine_config(&a));
    assert!(adact(&["train", "-c", &config], None).status.success());
    assert!(adact(&["train", "-c", &config, "--out", b.to_str().unwrap()], Some("4")).status.success());
    for name in ["history.csv", "checkpoint.json", "train.csv", "test.csv", "report.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let history = fs::read_to_string(a.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 16);
    assert!(history.starts_with("iteration,train_mse,val_mse,val_pe,z_act,multiplies_cumulative\n"));
    assert!(!history.contains('\r'));
}

#[test]
fn plotdata_has_one_row_per_test_pattern() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let config = write_config(tmp.path(), "sine.json", &sine_config(&run));
    assert!(adact(&["train", "-c", &config], None).status.success());
    let out = adact(&["plotdata", "--run", run.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let plot = fs::read_to_string(run.join("plot.csv")).unwrap();
    let lines: Vec<&str> = plot.lines().collect();
    assert_eq!(lines[0], "x,target,prediction");
    assert_eq!(lines.len(), 41);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));

    let shapes = fs::read_to_string(run.join("activations.csv")).unwrap();
    assert_eq!(shapes.lines().next(), Some("unit,ns,a"));
    assert_eq!(shapes.lines().count(), 1 + 12);
}

#[test]
fn saved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let config = write_config(tmp.path(), "sine.json", &sine_config(&run));
    assert!(adact(&["train", "-c", &config, "--seed", "9"], None).status.success());
    let copy = run.join("config.json");
    let again = tmp.path().join("again");
    assert!(adact(&["train", "-c", copy.to_str().unwrap(), "--out", again.to_str().unwrap()], None).status.success());
    assert_eq!(fs::read(run.join("history.csv")).unwrap(), fs::read(again.join("history.csv")).unwrap());
}

#[test]
fn invalid_config_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let body = sine_config(&tmp.path().join("x")).replace("\"H\": 12", "\"H\": 12, \"depth\": 2");
    let config = write_config(tmp.path(), "bad.json", &body);
    let out = adact(&["train", "-c", &config], None);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("model") && err.contains("depth"), "{err}");
    assert!(!tmp.path().join("x").exists());

    let body = sine_config(&tmp.path().join("x")).replace("\"N_it\": 15", "\"N_it\": 0");
    let config = write_config(tmp.path(), "zero.json", &body);
    let out = adact(&["train", "-c", &config], None);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("train.N_it"));
}

#[test]
fn missing_files_fail() {
    assert!(!adact(&["train", "-c", "/definitely/not/here.json"], None).status.success());
    let tmp = tempfile::tempdir().unwrap();
    assert!(!adact(&["plotdata", "--run", tmp.path().to_str().unwrap()], None).status.success());
    let body = r#"{
  "data": { "source": "csv", "params": { "path": "/no/such.csv", "n_inputs": 1, "n_outputs": 1 } },
  "model": { "N_h": 2 },
  "train": { "N_it": 3 },
  "output": { "directory": "unused" }
}"#;
    let config = write_config(tmp.path(), "csv.json", body);
    assert!(!adact(&["train", "-c", &config], None).status.success());
    assert!(!adact(&["train", "-c", &config], Some("zero")).status.success());
}

#[test]
fn generated_csv_feeds_a_csv_run_and_cross_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let gen_dir = tmp.path().join("gen");
    let config = write_config(tmp.path(), "sine.json", &sine_config(&gen_dir));
    assert!(adact(&["gen", "-c", &config], None).status.success());
    let train_csv = gen_dir.join("train.csv");
    assert_eq!(fs::read_to_string(&train_csv).unwrap().lines().count(), 301);

    let body = format!(
        r#"{{
  "data": {{ "source": "csv", "params": {{ "path": {:?}, "n_inputs": 1, "n_outputs": 1, "test_fraction": 0.25 }} }},
  "model": {{ "N_h": 2, "H": 6 }},
  "train": {{ "trainer": "molf", "N_it": 5 }},
  "eval": {{ "k_folds": 4 }},
  "output": {{ "directory": {:?} }}
}}"#,
        train_csv,
        tmp.path().join("csvrun")
    );
    let config = write_config(tmp.path(), "csv.json", &body);
    let out = adact(&["train", "-c", &config], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(tmp.path().join("csvrun/test.csv")).unwrap().lines().count(), 76);

    let out = adact(&["xval", "-c", &config, "--out", tmp.path().join("xv").to_str().unwrap()], Some("2"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(tmp.path().join("xv/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 4 + 2);
}
