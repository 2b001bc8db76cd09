//! Accuracy metrics, shared-class detection metrics, and run reports.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::IncrementalStream;
use crate::error::{Error, Result};
use crate::model::{predict, ModelParams};

/// Fraction of exact matches.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::InvalidShape(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("accuracy of zero samples".into()));
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

fn check_step(stream: &IncrementalStream, t: usize) -> Result<()> {
    if t == 0 || t > stream.num_steps() {
        return Err(Error::InvalidStep {
            step: t,
            steps: stream.num_steps(),
        });
    }
    Ok(())
}

/// (predictions, truth) over labeled samples of steps `1..=t` passing `keep`.
fn collect(
    params: &ModelParams,
    stream: &IncrementalStream,
    t: usize,
    keep: impl Fn(usize) -> bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for step in &stream.steps[..t] {
        let idx: Vec<usize> = step
            .hidden_labels
            .iter()
            .enumerate()
            .filter_map(|(i, y)| y.filter(|&y| keep(y)).map(|_| i))
            .collect();
        if idx.is_empty() {
            continue;
        }
        preds.extend(predict(params, &step.features.select_rows(&idx))?);
        truth.extend(idx.iter().map(|&i| step.hidden_labels[i].expect("filtered")));
    }
    Ok((preds, truth))
}

fn accuracy_or_none(preds: &[usize], truth: &[usize]) -> Result<Option<f64>> {
    if truth.is_empty() {
        return Ok(None);
    }
    accuracy(preds, truth).map(Some)
}

/// Accuracy over the union of labeled target samples of steps `1..=t`.
///
/// Predictions are argmax over all source classes. `None` when no sample in
/// range carries a label.
pub fn step_level_accuracy(params: &ModelParams, stream: &IncrementalStream, t: usize) -> Result<Option<f64>> {
    check_step(stream, t)?;
    let (p, y) = collect(params, stream, t, |_| true)?;
    accuracy_or_none(&p, &y)
}

/// Accuracy on samples whose truth is one of step 1's classes, using data of steps `1..=t`.
pub fn s1_accuracy(params: &ModelParams, stream: &IncrementalStream, t: usize) -> Result<Option<f64>> {
    check_step(stream, t)?;
    let first = &stream.steps[0].true_classes;
    let (p, y) = collect(params, stream, t, |k| first.contains(&k))?;
    accuracy_or_none(&p, &y)
}

/// Detection recall (SCD) and precision (TCD) of a detected class set.
pub fn scd_tcd(detected: &BTreeSet<usize>, truth: &BTreeSet<usize>) -> Result<(f64, f64)> {
    if truth.is_empty() {
        return Err(Error::InvalidInput("empty ground-truth class set".into()));
    }
    let hit = detected.intersection(truth).count() as f64;
    let scd = hit / truth.len() as f64;
    let tcd = if detected.is_empty() {
        0.0
    } else {
        hit / detected.len() as f64
    };
    Ok((scd, tcd))
}

/// Per-epoch mean losses summarized for a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub first_epoch_total: f64,
    pub last_epoch_total: f64,
    pub last_epoch_ce: f64,
    pub last_epoch_con: f64,
    pub last_epoch_dis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step_index: usize,
    pub detected_classes: Vec<usize>,
    pub true_classes: Vec<usize>,
    pub step_level_accuracy: Option<f64>,
    pub s1_accuracy: Option<f64>,
    pub scd_accuracy: f64,
    pub tcd_accuracy: f64,
    pub accuracy_drop_from_step1: Option<f64>,
    pub pseudo_accuracy: Option<f64>,
    pub bank_size_after: usize,
    pub loss_summary: Option<LossSummary>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub per_step: Vec<StepReport>,
    pub final_accuracy: Option<f64>,
    pub final_s1_accuracy: Option<f64>,
    pub config_echo: serde_json::Value,
    pub seed: u64,
}

impl RunReport {
    /// Checks the report-level identities between final and per-step metrics.
    pub fn check_invariants(&self) -> Result<()> {
        let last = self
            .per_step
            .last()
            .ok_or_else(|| Error::InvalidInput("report has no steps".into()))?;
        if self.final_accuracy != last.step_level_accuracy {
            return Err(Error::InvalidInput(
                "final_accuracy differs from the last step-level accuracy".into(),
            ));
        }
        if self.final_s1_accuracy != last.s1_accuracy {
            return Err(Error::InvalidInput(
                "final_s1_accuracy differs from the last S-1 accuracy".into(),
            ));
        }
        let base = self.per_step[0].s1_accuracy;
        for s in &self.per_step {
            let expect = base.zip(s.s1_accuracy).map(|(a, b)| a - b);
            if s.accuracy_drop_from_step1 != expect {
                return Err(Error::InvalidInput(format!(
                    "step {}: accuracy drop is not s1(1) - s1(t)",
                    s.step_index
                )));
            }
        }
        Ok(())
    }
}

/// Names of the per-step metrics written to `metrics.csv`, in column order.
pub const METRIC_KINDS: [&str; 5] = [
    "step_level_accuracy",
    "s1_accuracy",
    "scd_accuracy",
    "tcd_accuracy",
    "accuracy_drop_from_step1",
];

fn metric_values(s: &StepReport) -> [Option<f64>; 5] {
    [
        s.step_level_accuracy,
        s.s1_accuracy,
        Some(s.scd_accuracy),
        Some(s.tcd_accuracy),
        s.accuracy_drop_from_step1,
    ]
}

/// Serializes the report; identical reports give identical bytes.
pub fn report_json(report: &RunReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::json("report.json", e))?;
    s.push('\n');
    Ok(s)
}

/// Writes `report.json` and a long-format `metrics.csv` (`step,metric,value`).
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    report.check_invariants()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    std::fs::write(&json_path, report_json(report)?).map_err(|e| Error::io(&json_path, e))?;

    let csv_path = dir.join("metrics.csv");
    let mut out = String::from("step,metric,value\n");
    for s in &report.per_step {
        for (name, v) in METRIC_KINDS.iter().zip(metric_values(s)) {
            let v = v.map(|x| format!("{x}")).unwrap_or_default();
            out.push_str(&format!("{},{name},{v}\n", s.step_index));
        }
    }
    std::fs::write(&csv_path, out).map_err(|e| Error::io(&csv_path, e))?;
    Ok(vec![json_path, csv_path])
}
