//! Subcommand implementations. Each command prints a one-object JSON
//! summary to stdout and writes its artifacts (CSV, checkpoints,
//! reports) to the paths given on the command line; artifacts embed the
//! fully resolved run configuration.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::path::Path;

use serde_json::json;

use tesla::binning::{bin_layout, log_bin_count, uniform_layout, BinLayout, BinMode};
use tesla::data::{
    clean, load_csv, make_windows, split_by_sensor, synth_generate, Feature, SeriesPair,
    SynthConfig, WindowSample,
};
use tesla::metrics::{count_flops, count_params, estimate_memory, Phase};
use tesla::model::{CalibrationModel, Checkpoint};
use tesla::numerics::AdamHyper;
use tesla::training::{self, TrainOutcome};
use tesla::{Error, Result};

use crate::config::{CommonArgs, RunConfig};

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None if text.ends_with('\n') => print!("{text}"),
        None => println!("{text}"),
    }
    Ok(())
}

pub fn generate(
    common: &CommonArgs,
    sensors: Option<usize>,
    len: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut run = RunConfig::resolve(common)?;
    run.sensors = sensors.unwrap_or(run.sensors);
    run.len = len.unwrap_or(run.len);
    let synth = SynthConfig {
        seed: run.seed,
        sensors: run.sensors,
        len: run.len,
        ..SynthConfig::default()
    };
    let csv = synth_generate(&synth)?;
    std::fs::write(out, &csv)?;
    let rows = csv.lines().count() - 1;
    println!(
        "{}",
        json!({
            "command": "generate",
            "out": out,
            "rows": rows,
            "config": run.provenance(),
        })
    );
    Ok(())
}

/// Load, clean, and split a paired CSV, returning the cleaned series and
/// the split plan.
fn prepare(data: &Path, feature: Feature) -> Result<(Vec<SeriesPair>, tesla::data::SplitPlan)> {
    let records = load_csv(data, feature)?;
    let (pairs, _) = clean(&records)?;
    let plan = split_by_sensor(&pairs)?;
    Ok((pairs, plan))
}

fn windows_for(pairs: &[SeriesPair], ids: &[String], n: usize) -> Result<Vec<WindowSample>> {
    let mut windows = Vec::new();
    for pair in pairs.iter().filter(|p| ids.contains(&p.sensor_id)) {
        windows.extend(make_windows(pair, n)?);
    }
    Ok(windows)
}

fn run_training(run: &RunConfig, data: &Path) -> Result<(TrainOutcome, usize, usize, String)> {
    let (pairs, plan) = prepare(data, run.feature)?;
    let train_windows = windows_for(&pairs, &plan.train, run.n)?;
    let val_windows = windows_for(&pairs, std::slice::from_ref(&plan.validation), run.n)?;
    if train_windows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let train_config = run.train_config();
    let model =
        CalibrationModel::new(run.variant, &run.model_config(), run.seed, train_config.hyper)?;
    let outcome = training::train(model, &train_windows, &val_windows, &train_config)?;
    Ok((outcome, train_windows.len(), val_windows.len(), plan.validation))
}

pub fn train(
    common: &CommonArgs,
    data: &Path,
    out: &Path,
    trace_out: Option<&Path>,
) -> Result<()> {
    let run = RunConfig::resolve(common)?;
    let (outcome, train_count, val_count, validation_sensor) = run_training(&run, data)?;
    let checkpoint = Checkpoint::from_model(
        &outcome.model,
        &run.model_config(),
        outcome.standardization,
        Some(run.provenance()),
    );
    checkpoint.save(out)?;
    if let Some(path) = trace_out {
        std::fs::write(path, outcome.trace.to_csv())?;
    }
    let best = &outcome.trace.epochs[outcome.best_epoch - 1];
    println!(
        "{}",
        json!({
            "command": "train",
            "out": out,
            "trace_out": trace_out,
            "data": data,
            "train_windows": train_count,
            "validation_windows": val_count,
            "validation_sensor": validation_sensor,
            "best_epoch": outcome.best_epoch,
            "best_val_rmse": best.val_rmse,
            "config": run.provenance(),
        })
    );
    Ok(())
}

fn checkpoint_feature(checkpoint: &Checkpoint) -> Feature {
    checkpoint
        .provenance
        .as_ref()
        .and_then(|v| v.get("feature"))
        .and_then(|f| f.as_str())
        .and_then(|s| s.parse().ok())
        .unwrap_or(Feature::Pm10)
}

pub fn evaluate(checkpoint_path: &Path, data: &Path, out: Option<&Path>) -> Result<()> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let model = checkpoint.to_model(AdamHyper::default())?;
    let feature = checkpoint_feature(&checkpoint);
    let (pairs, plan) = prepare(data, feature)?;
    let test_pair = pairs
        .iter()
        .find(|p| p.sensor_id == plan.test)
        .expect("split plan names an existing sensor");
    let windows = make_windows(test_pair, checkpoint.config.n)?;
    let report = training::evaluate(&model, &checkpoint.standardization, &windows)?;
    let artifact = json!({
        "command": "evaluate",
        "checkpoint": checkpoint_path,
        "data": data,
        "variant": checkpoint.variant,
        "feature": feature,
        "test_sensor": plan.test,
        "report": &report,
        "config": checkpoint.provenance,
    });
    let text = serde_json::to_string_pretty(&artifact)?;
    write_or_print(out, &text)?;
    if out.is_some() {
        println!(
            "{}",
            json!({
                "command": "evaluate",
                "out": out,
                "samples": report.samples,
                "rmse_model": report.rmse_model,
                "rmse_raw": report.rmse_raw,
            })
        );
    }
    Ok(())
}

pub fn calibrate(checkpoint_path: &Path, data: &Path, out: &Path) -> Result<()> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let model = checkpoint.to_model(AdamHyper::default())?;
    let feature = checkpoint_feature(&checkpoint);
    let n = checkpoint.config.n;
    let records = load_csv(data, feature)?;

    let mut buffers: HashMap<String, VecDeque<f64>> = HashMap::new();
    let mut output = String::from("timestamp,sensor_id,raw,calibrated,warmup\n");
    let mut warmup_rows = 0usize;
    let mut calibrated_rows = 0usize;
    let mut window = Vec::with_capacity(n);
    for record in &records {
        let buffer = buffers.entry(record.sensor_id.clone()).or_default();
        let valid = record
            .lowcost
            .map(|v| v.is_finite() && v >= 0.0)
            .unwrap_or(false);
        if valid {
            if buffer.len() == n {
                buffer.pop_front();
            }
            buffer.push_back(record.lowcost.unwrap());
        }
        let warmup = buffer.len() < n;
        let calibrated = if !warmup && valid {
            window.clear();
            window.extend(buffer.iter().copied());
            Some(training::calibrated_prediction(
                &model,
                &checkpoint.standardization,
                &window,
            )?)
        } else {
            None
        };
        if warmup {
            warmup_rows += 1;
        }
        if calibrated.is_some() {
            calibrated_rows += 1;
        }
        output.push_str(&record.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string());
        output.push(',');
        output.push_str(&record.sensor_id);
        output.push(',');
        if let Some(raw) = record.lowcost {
            output.push_str(&format!("{raw:.3}"));
        }
        output.push(',');
        if let Some(value) = calibrated {
            output.push_str(&format!("{value:.3}"));
        }
        output.push(',');
        output.push_str(if warmup { "true" } else { "false" });
        output.push('\n');
    }
    std::fs::write(out, &output)?;
    println!(
        "{}",
        json!({
            "command": "calibrate",
            "out": out,
            "rows_in": records.len(),
            "rows_out": records.len(),
            "warmup_rows": warmup_rows,
            "calibrated_rows": calibrated_rows,
            "config": checkpoint.provenance,
        })
    );
    Ok(())
}

fn layout_for(n: usize, mode: BinMode) -> Result<BinLayout> {
    match mode {
        BinMode::Log => bin_layout(n),
        BinMode::Uniform => uniform_layout(n, log_bin_count(n)),
    }
}

pub fn bins(n: usize, binning: &str, json_output: bool) -> Result<()> {
    let mode: BinMode = binning.parse()?;
    let layout = layout_for(n, mode)?;
    if json_output {
        println!(
            "{}",
            json!({
                "n": layout.n(),
                "mode": layout.mode(),
                "bins": layout.bins(),
                "alpha": layout.alpha(),
                "widths": layout.widths(),
            })
        );
        return Ok(());
    }
    println!("window {n}, {mode} schedule, {} bins", layout.bins());
    println!("{:>4} {:>9} {:>8} {:>6}", "bin", "first", "last", "width");
    for j in 0..layout.bins() {
        let range = layout.token_range(j);
        // Positions are reported 1-based, oldest reading first.
        println!(
            "{:>4} {:>9} {:>8} {:>6}",
            j + 1,
            range.start + 1,
            range.end,
            range.len()
        );
    }
    Ok(())
}

pub fn profile(common: &CommonArgs, format: &str, out: Option<&Path>) -> Result<()> {
    let run = RunConfig::resolve(common)?;
    let model_config = run.model_config();
    let flops = count_flops(run.variant, &model_config);
    let params = count_params(run.variant, &model_config);
    let inference = estimate_memory(run.variant, &model_config, Phase::Inference);
    let training_memory = estimate_memory(run.variant, &model_config, Phase::Training);
    let text = match format {
        "json" => {
            let artifact = json!({
                "command": "profile",
                "params": params,
                "flops": flops,
                "attention_core_flops": flops.attention_core(),
                "memory": { "inference": inference, "training": training_memory },
                "config": run.provenance(),
            });
            serde_json::to_string_pretty(&artifact)?
        }
        "csv" => {
            let mut rows = String::from("quantity,value\n");
            let mut push = |name: &str, value: u64| {
                rows.push_str(&format!("{name},{value}\n"));
            };
            push("params", params);
            push("flops_embedding", flops.embedding);
            push("flops_binning", flops.binning);
            push("flops_qkv_projection", flops.qkv_projection);
            push("flops_attention_scores", flops.attention_scores);
            push("flops_attention_apply", flops.attention_apply);
            push("flops_softmax", flops.softmax);
            push("flops_aggregation", flops.aggregation);
            push("flops_total", flops.total);
            push("flops_attention_core", flops.attention_core());
            push("memory_inference_bytes", inference.total_bytes);
            push("memory_training_bytes", training_memory.total_bytes);
            rows
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown profile format '{other}' (expected json or csv)"
            )))
        }
    };
    write_or_print(out, &text)?;
    Ok(())
}
