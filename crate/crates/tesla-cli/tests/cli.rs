//! End-to-end tests against the compiled binary: exit codes, stderr
//! shape, artifact contents, and the full generate/train/evaluate/
//! calibrate pipeline on a small synthetic data set.

use std::process::{Command, Output};

fn tesla(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tesla"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is one JSON object")
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

#[test]
fn bins_json_pins_the_reference_partition() {
    let out = tesla(&["bins", "--n", "12", "--json"]);
    let value = stdout_json(&out);
    assert_eq!(value["alpha"], serde_json::json!([1, 6, 10, 12, 13]));
    assert_eq!(value["widths"], serde_json::json!([5, 4, 2, 1]));
    assert_eq!(value["bins"], 4);
    assert_eq!(value["mode"], "log");
}

#[test]
fn bins_table_shows_one_row_per_bin() {
    let out = tesla(&["bins", "--n", "12"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].contains("window 12"));
    assert!(lines[0].contains("4 bins"));
    // Four data rows under the column header.
    assert_eq!(lines.len(), 6);
    assert!(lines[2].trim_start().starts_with('1'));
    assert!(lines[5].contains("12"), "newest bin covers position 12: {}", lines[5]);
}

#[test]
fn bins_uniform_mode_balances_widths() {
    let out = tesla(&["bins", "--n", "12", "--binning", "uniform", "--json"]);
    let value = stdout_json(&out);
    let widths: Vec<u64> = value["widths"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_u64().unwrap())
        .collect();
    assert_eq!(widths, vec![3, 3, 3, 3]);
}

#[test]
fn degenerate_window_is_a_usage_error() {
    let out = tesla(&["bins", "--n", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_text(&out).starts_with("window_too_small:"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = tesla(&["bins", "--n", "12", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_refuses_splits_that_cannot_hold_out_sensors() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("data.csv");
    let out = tesla(&["generate", "--sensors", "2", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_text(&out).starts_with("too_few_sensors:"));
    assert!(!out_path.exists());
}

#[test]
fn missing_checkpoint_is_a_data_error() {
    let out = tesla(&["evaluate", "--checkpoint", "absent.json", "--data", "absent.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_text(&out).starts_with("io_error:"));
}

#[test]
fn bad_variant_is_a_usage_error() {
    let out = tesla(&["profile", "--variant", "quadratic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_text(&out).starts_with("invalid_config:"));
}

#[test]
fn profile_json_reports_cost_stages() {
    let out = tesla(&["profile", "--n", "12", "--d", "8", "--heads", "2"]);
    let value = stdout_json(&out);
    assert_eq!(value["params"], 336);
    assert_eq!(value["flops"]["attention_scores"], 256);
    assert_eq!(value["attention_core_flops"], 512);
    assert_eq!(value["config"]["n"], 12);
    assert!(value["memory"]["training"]["total_bytes"].as_u64().unwrap() > 0);
}

#[test]
fn profile_csv_is_plot_friendly() {
    let out = tesla(&["profile", "--n", "12", "--d", "8", "--heads", "2", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "quantity,value");
    assert!(lines.iter().any(|l| l.starts_with("flops_total,")));
    assert!(lines.contains(&"params,336"));
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 2);
        cells[1].parse::<u64>().unwrap();
    }
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    std::fs::write(&config_path, r#"{"n": 24, "d": 4, "heads": 2, "seed": 9}"#).unwrap();
    let out = tesla(&[
        "profile",
        "--config",
        config_path.to_str().unwrap(),
        "--n",
        "12",
    ]);
    let value = stdout_json(&out);
    assert_eq!(value["config"]["n"], 12, "flag wins over file");
    assert_eq!(value["config"]["d"], 4, "file wins over default");
    assert_eq!(value["config"]["seed"], 9);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.json");
    std::fs::write(&config_path, r#"{"window": 24}"#).unwrap();
    let out = tesla(&["profile", "--config", config_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_text(&out).starts_with("invalid_config:"));
}

#[test]
fn pipeline_trains_evaluates_and_calibrates() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let checkpoint = dir.path().join("model.json");
    let trace = dir.path().join("trace.csv");
    let report_path = dir.path().join("report.json");
    let calibrated = dir.path().join("calibrated.csv");

    let out = tesla(&[
        "generate",
        "--sensors",
        "3",
        "--len",
        "700",
        "--seed",
        "4",
        "--out",
        data.to_str().unwrap(),
    ]);
    let summary = stdout_json(&out);
    assert_eq!(summary["rows"], 3 * 700);

    let out = tesla(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        checkpoint.to_str().unwrap(),
        "--trace-out",
        trace.to_str().unwrap(),
        "--n",
        "12",
        "--d",
        "4",
        "--heads",
        "2",
        "--epochs",
        "3",
        "--seed",
        "4",
    ]);
    let summary = stdout_json(&out);
    assert_eq!(summary["config"]["variant"], "tesla");
    // Three sensors leave one for training; cleaning trims a few of its
    // 700 - 12 + 1 possible windows.
    let train_windows = summary["train_windows"].as_u64().unwrap();
    assert!((600..=689).contains(&train_windows), "windows {train_windows}");
    assert_eq!(summary["validation_sensor"], "s02");
    let best_epoch = summary["best_epoch"].as_u64().unwrap();
    assert!((1..=3).contains(&best_epoch));

    let trace_text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(trace_text.lines().count(), 4, "header plus one row per epoch");
    assert!(trace_text.starts_with("epoch,train_mse,val_rmse,val_mae,seconds\n"));

    let checkpoint_value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&checkpoint).unwrap()).unwrap();
    assert_eq!(checkpoint_value["provenance"]["seed"], 4);
    assert_eq!(checkpoint_value["provenance"]["n"], 12);

    let out = tesla(&[
        "evaluate",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    stdout_json(&out);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let rmse_model = report["report"]["rmse_model"].as_f64().unwrap();
    let rmse_raw = report["report"]["rmse_raw"].as_f64().unwrap();
    assert!(rmse_model.is_finite() && rmse_model > 0.0);
    assert!(
        rmse_model < rmse_raw,
        "calibration should beat raw readings: {rmse_model} vs {rmse_raw}"
    );
    assert_eq!(report["test_sensor"], "s03");

    let out = tesla(&[
        "calibrate",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        calibrated.to_str().unwrap(),
    ]);
    let summary = stdout_json(&out);
    assert_eq!(summary["rows_in"], 3 * 700);
    assert_eq!(summary["rows_out"], 3 * 700);
    assert!(summary["warmup_rows"].as_u64().unwrap() >= 3 * 11);

    let calibrated_text = std::fs::read_to_string(&calibrated).unwrap();
    let lines: Vec<&str> = calibrated_text.lines().collect();
    assert_eq!(lines.len(), 1 + 3 * 700, "header plus one row per input row");
    assert_eq!(lines[0], "timestamp,sensor_id,raw,calibrated,warmup");
    assert!(lines[1].ends_with(",true"), "first row of a sensor is warmup");
    let calibrated_line = lines
        .iter()
        .find(|l| l.ends_with(",false"))
        .expect("calibration starts once the window fills");
    let cells: Vec<&str> = calibrated_line.split(',').collect();
    assert_eq!(cells.len(), 5);
    cells[3].parse::<f64>().expect("calibrated cell is numeric");
}

#[test]
fn train_rejects_windows_longer_than_the_series() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let checkpoint = dir.path().join("model.json");
    let out = tesla(&[
        "generate",
        "--sensors",
        "3",
        "--len",
        "30",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = tesla(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        checkpoint.to_str().unwrap(),
        "--n",
        "60",
        "--d",
        "4",
        "--heads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_text(&out).starts_with("empty_training_set:"));
}
