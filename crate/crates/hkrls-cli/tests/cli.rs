//! End-to-end tests of the compiled binary, including the determinism
//! criterion: identical config and seed must produce byte-identical CSV
//! reports once the timing column is masked.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hkrls"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// report.csv with the train_seconds column blanked out.
fn masked_report(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("report.csv")).expect("report.csv exists");
    text.lines()
        .map(|line| {
            let mut cells: Vec<&str> = line.split(',').collect();
            if cells.len() > 1 && cells[1] != "train_seconds" {
                cells[1] = "'t'";
            }
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

#[test]
fn criterion_8_same_seed_gives_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir1 = tmp.path().join("run1");
    let dir2 = tmp.path().join("run2");
    let out1 = run(&[
        "compare",
        "--preset",
        "table1-small",
        "--out",
        dir1.to_str().unwrap(),
    ]);
    assert!(out1.status.success(), "first run failed: {}", stderr(&out1));
    let out2 = run(&[
        "compare",
        "--preset",
        "table1-small",
        "--out",
        dir2.to_str().unwrap(),
    ]);
    assert!(out2.status.success(), "second run failed: {}", stderr(&out2));
    let a = masked_report(&dir1);
    let b = masked_report(&dir2);
    assert_eq!(a, b, "reports differ beyond the timing column");
    assert!(dir1.join("report.md").exists());
    println!("PASS criterion 8: byte-identical reports (timing column excluded)");
}

#[test]
fn different_seed_changes_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir1 = tmp.path().join("a");
    let dir2 = tmp.path().join("b");
    let ok1 = run(&[
        "compare", "--preset", "table1-small", "--out", dir1.to_str().unwrap(),
    ]);
    let ok2 = run(&[
        "compare", "--preset", "table1-small", "--seed", "9", "--out", dir2.to_str().unwrap(),
    ]);
    assert!(ok1.status.success() && ok2.status.success());
    assert_ne!(masked_report(&dir1), masked_report(&dir2));
}

#[test]
fn fit_then_predict_reproduces_training_value() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("model.hkm");
    let out = run(&[
        "fit",
        "--dataset",
        "synth2d",
        "--counts",
        "20,22",
        "--ranges",
        "0.1:6.0,0.1:9.0",
        "--sigma-levels",
        "0.6,0.8",
        "--jitter",
        "0",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "fit failed: {}", stderr(&out));

    // query the first grid point (0.1, 0.1)
    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--query",
        "0.1,0.1",
    ]);
    assert!(out.status.success(), "predict failed: {}", stderr(&out));
    let value: f64 = stdout(&out).trim().parse().expect("numeric prediction");
    let expected = 0.1_f64.sin() * 0.05_f64.cos();
    assert!(
        (value - expected).abs() <= 1e-6,
        "prediction {value} differs from training value {expected}"
    );

    // save/load round trip keeps predictions bitwise: run predict twice
    let again = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--query",
        "0.1,0.1",
    ]);
    assert_eq!(stdout(&out), stdout(&again));
}

#[test]
fn predict_with_wrong_arity_reports_axis_count() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("model.hkm");
    let out = run(&[
        "fit", "--dataset", "synth2d", "--counts", "8,8", "--sigma-levels", "1,1",
        "--out", model.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&["predict", "--model", model.to_str().unwrap(), "--query", "1.0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("expects 2"), "missing axis count in: {err}");
}

#[test]
fn corrupt_model_file_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("broken.hkm");
    std::fs::write(&model, b"garbage").unwrap();
    let out = run(&["predict", "--model", model.to_str().unwrap(), "--query", "1,2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("format"), "unexpected: {}", stderr(&out));
}

#[test]
fn cost_table_prints_expected_row() {
    let out = run(&["cost-table", "--m", "2,2", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("2x2,12,16,0.75"), "got: {text}");

    let out = run(&["cost-table", "--m", "116,120", "--format", "csv"]);
    assert!(stdout(&out).contains("116x120,1629120,193766400,"));

    let out = run(&["cost-table", "--m", "1"]);
    assert_eq!(out.status.code(), Some(2), "usage error expected");
}

#[test]
fn empty_method_list_is_a_usage_error() {
    let out = run(&["synth2d", "--counts", "10,10", "--methods", ""]);
    assert_eq!(out.status.code(), Some(2));

    // a config file without methods fails validation the same way
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.toml");
    std::fs::write(
        &cfg,
        "[dataset]\nkind = \"synth2d\"\ncounts = [8, 8]\n\n[split]\nseed = 1\n",
    )
    .unwrap();
    let out = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no methods"), "got: {}", stderr(&out));
}

#[test]
fn missing_dataset_file_is_a_usage_error() {
    let out = run(&[
        "grid-csv",
        "--path",
        "/nonexistent/data.csv",
        "--methods",
        "hkrls",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_sensor_sample_loads_with_published_shape() {
    let path = repo_root().join("crates/hkrls-cli/data/intel_sample.csv");
    let data = hkrls::datasets::load_grid_csv(&path).expect("sample parses");
    assert_eq!(data.axes().len(), 2);
    assert_eq!(data.axis_len(0), 52);
    assert_eq!(data.axis_len(1), 100);
    let max = data.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(max <= 25.0, "sample exceeds the documented 25 ceiling: {max}");
}

#[test]
fn preset_listing_names_all_shipped_presets() {
    let out = run(&["compare", "--list"]);
    let text = stdout(&out);
    for name in [
        "synth2d-paper",
        "synth3d-paper",
        "table1-small",
        "table2-2d-small",
        "intel-sample",
        "polyculture-sample",
    ] {
        assert!(text.contains(name), "missing preset {name}");
    }
}

#[test]
fn residual_files_are_written_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("res");
    let out = run(&[
        "synth2d",
        "--counts",
        "12,12",
        "--methods",
        "hkrls,krls",
        "--residuals",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["residuals-hkrls.csv", "residuals-krls.csv"] {
        let text = std::fs::read_to_string(dir.join(name)).expect("residual file");
        assert!(text.starts_with("x0,x1,actual,predicted,abs_error"));
        assert!(text.lines().count() > 1);
    }
}
