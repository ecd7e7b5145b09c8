use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tearfilm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tearfilm"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = tearfilm(dir, args);
    let log = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(out.status.success(), "{args:?} failed:\n{log}");
    log
}

fn small_dataset(dir: &Path, name: &str, seed: &str) {
    ok(
        dir,
        &[
            "gen-dataset",
            "--model",
            "ode",
            "--count",
            "24",
            "--seed",
            seed,
            "--out",
            name,
        ],
    );
}

#[test]
fn simulate_ode_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("p.json"),
        r#"{"h0_um": 3.5, "f0_pct": 0.2, "ts_s": 12, "thinning_um_per_min": 10, "b1_per_s": 0.3, "b2_per_s": 0.5}"#,
    )
    .unwrap();
    ok(
        dir.path(),
        &["simulate-ode", "--params", "p.json", "--out", "sim"],
    );
    let csv = fs::read_to_string(dir.path().join("sim/solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,h,c,f,I"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 601);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[600][0], 1.0);
    assert_eq!((rows[0][1], rows[0][2], rows[0][4]), (1.0, 1.0, 1.0));
    assert!(rows[600][1] < 1.0, "evaporation thins the film");
}

#[test]
fn simulate_pde_with_fields() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("p.json"),
        r#"{"h0_um": 3.5, "f0_pct": 0.2, "ts_s": 12, "thinning_um_per_min": 15, "glob_radius_mm": 0.1, "dsigma0_uN_per_m": 10}"#,
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "simulate-pde",
            "--params",
            "p.json",
            "--nr",
            "32",
            "--out",
            "sim",
            "--full-fields",
        ],
    );
    let csv = fs::read_to_string(dir.path().join("sim/solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 602);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sim/fields.json")).unwrap())
            .unwrap();
    let shape: Vec<u64> = meta["shape"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    let bytes = fs::metadata(dir.path().join("sim/fields.f64"))
        .unwrap()
        .len();
    assert_eq!(shape[1..], [32, 4]);
    assert_eq!(bytes, 8 * shape.iter().product::<u64>());
}

#[test]
fn gen_dataset_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path(), "a", "11");
    small_dataset(dir.path(), "b", "11");
    small_dataset(dir.path(), "c", "12");
    let manifest = |d: &str| fs::read(dir.path().join(d).join("manifest.json")).unwrap();
    assert_eq!(manifest("a"), manifest("b"));
    assert_ne!(manifest("a"), manifest("c"));
    for f in [
        "inputs.f64",
        "outputs_h.f64",
        "outputs_c.f64",
        "params.f64",
        "flags.json",
    ] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
}

#[test]
fn train_defaults_log_every_epoch_then_evaluate_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d, "ds", "3");
    let log = ok(
        d,
        &[
            "train", "--kind", "pca", "--target", "h", "--data", "ds", "--out", "m.ckpt",
        ],
    );
    let epochs = log
        .lines()
        .filter(|l| l.contains("epoch ") && l.contains("train_loss"))
        .count();
    assert_eq!(epochs, 1000);
    assert!(
        log.contains("\"epochs\":1000")
            && log.contains("\"lr\":0.001")
            && log.contains("\"alpha\":1.6")
    );
    let history = fs::read_to_string(d.join("m.ckpt.loss.csv")).unwrap();
    assert_eq!(history.lines().count(), 1001);

    ok(
        d,
        &[
            "evaluate", "--ckpt", "m.ckpt", "--data", "ds", "--split", "test", "--out", "ev",
        ],
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("ev/report.json")).unwrap()).unwrap();
    let cases = report["summary"]["cases"].as_u64().unwrap() as usize;
    assert!(cases > 0);
    assert_eq!(
        fs::read_to_string(d.join("ev/cases.csv"))
            .unwrap()
            .lines()
            .count(),
        cases + 1
    );

    fs::write(
        d.join("flat.csv"),
        "time_seconds,intensity\n0,0.5\n3.5,0.5\n7,0.5\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "predict", "--ckpt", "m.ckpt", "--input", "flat.csv", "--out", "pred.csv",
        ],
    );
    let pred = fs::read_to_string(d.join("pred.csv")).unwrap();
    assert_eq!(pred.lines().next(), Some("t,h"));
    assert_eq!(pred.lines().count(), 602);
}

#[test]
fn config_file_supplies_options() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d, "ds", "5");
    fs::write(d.join("cfg.json"), r#"{"train": {"kind": "pcax", "target": "c", "data": "ds", "epochs": 7, "out": "file.ckpt"}}"#).unwrap();
    let log = ok(
        d,
        &[
            "--config",
            "cfg.json",
            "train",
            "--epochs",
            "4",
            "--out",
            "flag.ckpt",
        ],
    );
    assert_eq!(log.lines().filter(|l| l.contains("train_loss")).count(), 4);
    assert!(d.join("flag.ckpt").exists() && !d.join("file.ckpt").exists());

    fs::write(d.join("flat.csv"), "0,1\n1,1\n").unwrap();
    let out = tearfilm(
        d,
        &[
            "predict",
            "--ckpt",
            "flag.ckpt",
            "--input",
            "flat.csv",
            "--out",
            "p.csv",
        ],
    );
    assert!(!out.status.success(), "missing --ext must fail");
    ok(
        d,
        &[
            "predict",
            "--ckpt",
            "flag.ckpt",
            "--input",
            "flat.csv",
            "--ext",
            "4,0.1,20",
            "--out",
            "p.csv",
        ],
    );
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.json"), "{\"h0_um\": 3}").unwrap();
    fs::write(d.join("cfg.json"), "{\"epochz\": 3}").unwrap();
    fs::write(d.join("junk.ckpt"), b"not a checkpoint").unwrap();
    fs::write(d.join("in.csv"), "0,1\n1,1\n").unwrap();
    for args in [
        &["simulate-ode", "--params", "bad.json", "--out", "x"][..],
        &["simulate-ode", "--params", "missing.json", "--out", "x"],
        &["train", "--unknown-flag"],
        &[
            "--config", "cfg.json", "train", "--kind", "pca", "--target", "h", "--data", "d",
            "--out", "m",
        ],
        &[
            "gen-dataset",
            "--model",
            "sde",
            "--count",
            "3",
            "--out",
            "x",
        ],
        &[
            "predict",
            "--ckpt",
            "junk.ckpt",
            "--input",
            "in.csv",
            "--out",
            "p.csv",
        ],
        &[
            "evaluate",
            "--ckpt",
            "junk.ckpt",
            "--data",
            "nowhere",
            "--out",
            "e",
        ],
    ] {
        let out = tearfilm(d, args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}
