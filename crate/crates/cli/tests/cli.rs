use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const INTERVAL: &str = "[encoder]\ndomain = \"interval\"\nflavor = \"bipolar-sign\"\nlength_scale = 0.1\ndims = 2000\n";
const SEQUENCE: &str = "[encoder]\ndomain = \"sequence\"\ndims = 2000\nk = 3\n";

fn hdt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdt")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hdt(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("interval.toml"), INTERVAL).unwrap();
    fs::write(dir.path().join("sequence.toml"), SEQUENCE).unwrap();
    for kind in ["d1", "mixture-1d", "heteroscedastic"] {
        ok(dir.path(), &["dataset", kind, "--seed", "3", "--out", "data"]);
    }
    ok(dir.path(), &["dataset", "sequence-families", "--size", "8", "--out", "data"]);
    dir
}

fn read(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn datasets_are_deterministic() {
    let dir = setup();
    let d = dir.path();
    let d1 = read(d, "data/d1.csv");
    assert_eq!(d1.lines().count(), 101);
    assert_eq!(d1.lines().filter(|l| l.ends_with(",1")).count(), 21);
    ok(d, &["dataset", "mixture-1d", "--seed", "3", "--out", "again"]);
    assert_eq!(read(d, "data/mixture-1d.csv"), read(d, "again/mixture-1d.csv"));
    ok(d, &["dataset", "mixture-1d", "--seed", "4", "--out", "other"]);
    assert_ne!(read(d, "data/mixture-1d.csv"), read(d, "other/mixture-1d.csv"));
}

#[test]
fn classifiers_fit_the_imbalanced_set() {
    let dir = setup();
    let d = dir.path();
    for model in ["proto-norm-each", "proto-raw", "proto-norm-diff", "iterative", "empirical-f", "empirical-p", "closed-form"] {
        let out = format!("cls-{model}");
        ok(d, &["classify", "--model", model, "--config", "interval.toml", "--input", "data/d1.csv", "--out", &out]);
        let acc: f64 = read(d, &format!("{out}/accuracy.csv")).lines().nth(1).unwrap().parse().unwrap();
        assert!(acc >= 0.75, "{model}: {acc}");
        assert_eq!(read(d, &format!("{out}/predictions.csv")).lines().count(), 101);
    }
    let acc = read(d, "cls-closed-form/accuracy.csv");
    assert_eq!(acc.lines().nth(1), Some("1"));
}

#[test]
fn every_regression_mode_tabulates_predictions() {
    let dir = setup();
    let d = dir.path();
    for mode in ["empirical", "generative", "ridge", "physics", "iterative"] {
        let out = format!("reg-{mode}");
        ok(d, &["regress", "--mode", mode, "--config", "interval.toml", "--input", "data/heteroscedastic.csv", "--out", &out]);
        let table = read(d, &format!("{out}/predictions.csv"));
        assert_eq!(table.lines().count(), 102, "{mode}");
    }
    assert!(read(d, "reg-generative/predictions.csv").starts_with("x,mle,eve,ci_lo,ci_hi\n"));
}

#[test]
fn distribution_commands_on_intervals_and_sequences() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["density", "--config", "interval.toml", "--input", "data/mixture-1d.csv", "--out", "dens"]);
    assert_eq!(read(d, "dens/density.csv").lines().count(), 202);
    ok(d, &["sample", "--config", "interval.toml", "--input", "data/mixture-1d.csv", "--count", "50", "--seed", "1", "--out", "mh"]);
    assert_eq!(read(d, "mh/draws.csv").lines().count(), 51);
    let a = "data/sequence-families-a.csv";
    let b = "data/sequence-families-b.csv";
    ok(d, &["mmd", "--config", "sequence.toml", "--input", a, "--other", b, "--out", "mmd"]);
    let dist: f64 = read(d, "mmd/mmd.csv").lines().nth(1).unwrap().parse().unwrap();
    assert!(dist > 0.0);
    ok(d, &["deconvolve", "--config", "sequence.toml", "--input", a, "--component", a, "--component", b, "--out", "mix"]);
    let coef: f64 = read(d, "mix/coefficients.csv").lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((coef - 1.0).abs() < 1e-6, "{coef}");
    ok(d, &["normalize", "--config", "interval.toml", "--out", "norm"]);
    assert!(read(d, "norm/normalization.txt").contains("epsilon="));
    ok(d, &["encode", "--config", "interval.toml", "--input", "data/d1.csv", "--out", "enc"]);
    assert_eq!(read(d, "enc/encodings.csv").lines().next().unwrap().split(',').count(), 2001);
    ok(d, &["transform", "--config", "interval.toml", "--input", "data/heteroscedastic.csv", "--out", "tr"]);
    assert!(read(d, "tr/transform.csv").starts_with("x,original,reconstructed,bipolar\n"));
    ok(d, &["joint", "--config", "interval.toml", "--input", "data/heteroscedastic.csv", "--y-lo", "-1", "--y-hi", "3", "--out", "joint"]);
    assert_eq!(read(d, "joint/joint.csv").lines().count(), 442);
    ok(d, &["joint", "--config", "interval.toml", "--input", "data/heteroscedastic.csv", "--grid", "5", "--out", "joint-auto"]);
    assert_eq!(read(d, "joint-auto/joint.csv").lines().count(), 26);
    ok(d, &["regress", "--mode", "physics", "--config", "interval.toml", "--input", "data/heteroscedastic.csv", "--operator", "-1,0,1", "--rhs", "-0.5", "--out", "phys"]);
    assert_eq!(read(d, "joint/joint.csv").lines().count(), 442);
}

#[test]
fn experiments_are_reproducible() {
    let dir = setup();
    let d = dir.path();
    let cfg = format!("experiment = \"fig-density\"\nseeds = [0, 1]\nout = \"report\"\n\n{INTERVAL}");
    fs::write(d.join("exp.toml"), cfg).unwrap();
    let listing = ok(d, &["experiment", "--config", "exp.toml"]);
    assert_eq!(listing.lines().count(), 4);
    let first = read(d, "report/fig-density-aggregate.csv");
    let manifest = read(d, "report/manifest.toml");
    ok(d, &["experiment", "--config", "exp.toml", "--out", "again"]);
    assert_eq!(first, read(d, "again/fig-density-aggregate.csv"));
    assert_eq!(manifest, read(d, "again/manifest.toml"));
    ok(d, &["experiment", "--config", "exp.toml", "--seed", "7", "--out", "single"]);
    assert!(d.join("single/fig-density-seed7.csv").is_file());
}

fn error_line(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap().trim().to_string()
}

#[test]
fn failures_are_one_machine_readable_line() {
    let dir = setup();
    let d = dir.path();
    let out = hdt(d, &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out).starts_with("error kind=usage message="));
    let out = hdt(d, &["dataset", "d3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = hdt(d, &["density", "--input", "data/d1.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_line(&out).starts_with("error kind=invalid-input"), "{}", error_line(&out));
    let out = hdt(d, &["density", "--config", "sequence.toml", "--input", "missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let out = hdt(d, &["regress", "--mode", "ridge", "--config", "sequence.toml", "--input", "data/d1.csv"]);
    assert_eq!(error_line(&out).split_whitespace().nth(1), Some("kind=unsupported"));
    fs::write(d.join("bad.toml"), "experiment = \"fig-density\"\nseeds = []\n").unwrap();
    let out = hdt(d, &["experiment", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out).lines().count(), 1);
}
