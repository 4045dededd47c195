//! Aggregates a run directory into final success rates per
//! `(task, method, ablation)` and the improvement ratio of the decomposed
//! reward over the best baseline. Only the metrics CSVs and `spec.conf` are
//! read, so the summary can always be regenerated.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vlreward_core::env::TaskId;
use vlreward_core::math::{mean, sample_std};
use vlreward_core::reward::RewardMode;
use vlreward_core::trainer::MetricsRow;

use crate::config::{ExperimentSpec, RunKey, Variant};
use crate::error::{LabError, LabResult};
use crate::fixtures::read_text;

/// Outcome of one seed's metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SeedStatus {
    /// Final evaluation success rate.
    Complete(f64),
    /// Missing file, or the budget was not reached.
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub method: String,
    pub ablation: String,
    /// Final success rate of each complete seed, in seed order.
    pub finals: Vec<f64>,
    /// Seeds without a complete metrics file.
    pub incomplete_seeds: Vec<u64>,
    pub mean: Option<f64>,
    /// Sample standard deviation; needs two complete seeds.
    pub std: Option<f64>,
}

impl SummaryRow {
    pub fn is_complete(&self) -> bool {
        self.incomplete_seeds.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    /// Mean over tasks of `mean(decomposed) / max(mean(baseline))`.
    pub ratio: Option<f64>,
    pub per_task: Vec<(String, f64)>,
    /// Tasks left out because every baseline scored zero.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub rows: Vec<SummaryRow>,
    pub improvement: Option<Improvement>,
}

impl Summary {
    pub fn row(&self, task: TaskId, method: RewardMode, variant: Variant) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.task == task.as_str() && r.method == method.as_str() && r.ablation == variant.as_str())
    }

    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(SummaryRow::is_complete)
    }
}

pub fn read_metrics(path: &Path) -> LabResult<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| LabError::format(path, e.to_string()))?;
    reader.deserialize().map(|r| r.map_err(|e| LabError::format(path, e.to_string()))).collect()
}

/// Status of one run given its budget.
pub fn seed_status(path: &Path, budget: usize) -> LabResult<SeedStatus> {
    if !path.exists() {
        return Ok(SeedStatus::Incomplete);
    }
    let rows = read_metrics(path)?;
    Ok(match rows.last() {
        Some(last) if last.env_steps >= budget => SeedStatus::Complete(last.eval_success_rate),
        _ => SeedStatus::Incomplete,
    })
}

/// Builds the summary of `dir` without writing anything.
pub fn compute(dir: &Path) -> LabResult<Summary> {
    let spec = ExperimentSpec::parse(&read_text(&dir.join("spec.conf"))?)?;
    let budget = spec.train.total_env_steps;
    let mut rows: Vec<SummaryRow> = Vec::new();
    let runs = spec.runs();
    for cell in runs.chunks(spec.seeds.len()) {
        let RunKey { task, method, variant, .. } = cell[0];
        let mut finals = Vec::new();
        let mut incomplete_seeds = Vec::new();
        for key in cell {
            match seed_status(&dir.join(key.rel_dir()).join("metrics.csv"), budget)? {
                SeedStatus::Complete(v) => finals.push(v),
                SeedStatus::Incomplete => incomplete_seeds.push(key.seed),
            }
        }
        let m = (!finals.is_empty()).then(|| mean(&finals));
        let s = (finals.len() >= 2).then(|| sample_std(&finals));
        rows.push(SummaryRow {
            task: task.to_string(),
            method: method.to_string(),
            ablation: variant.to_string(),
            finals,
            incomplete_seeds,
            mean: m,
            std: s,
        });
    }
    let mut summary = Summary { name: spec.name.clone(), rows, improvement: None };
    summary.improvement = improvement(&spec, &summary);
    Ok(summary)
}

fn improvement(spec: &ExperimentSpec, summary: &Summary) -> Option<Improvement> {
    let baselines: Vec<RewardMode> = spec.methods.iter().copied().filter(|m| *m != RewardMode::Decomposed).collect();
    if !spec.methods.contains(&RewardMode::Decomposed) || baselines.is_empty() {
        return None;
    }
    let mut per_task = Vec::new();
    let mut skipped = Vec::new();
    for &task in &spec.tasks {
        let ours = summary.row(task, RewardMode::Decomposed, Variant::None).and_then(|r| r.mean);
        let best = baselines
            .iter()
            .filter_map(|&m| summary.row(task, m, Variant::None).and_then(|r| r.mean))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        match (ours, best) {
            (Some(o), Some(b)) if b > 0.0 => per_task.push((task.to_string(), o / b)),
            _ => skipped.push(task.to_string()),
        }
    }
    let ratios: Vec<f64> = per_task.iter().map(|(_, r)| *r).collect();
    let ratio = (!ratios.is_empty()).then(|| mean(&ratios));
    Some(Improvement { ratio, per_task, skipped })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

/// Markdown table of the summary.
pub fn render(summary: &Summary) -> String {
    let mut s = format!("# {}\n\n", summary.name);
    s.push_str("| task | method | ablation | seeds | mean | std | status |\n");
    s.push_str("|---|---|---|---|---|---|---|\n");
    for r in &summary.rows {
        let status = if r.is_complete() {
            "complete".to_string()
        } else {
            let seeds: Vec<String> = r.incomplete_seeds.iter().map(u64::to_string).collect();
            format!("INCOMPLETE (seeds {})", seeds.join(","))
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.task,
            r.method,
            r.ablation,
            r.finals.len(),
            fmt_opt(r.mean),
            fmt_opt(r.std),
            status
        );
    }
    if let Some(imp) = &summary.improvement {
        let _ = write!(
            s,
            "\nimprovement ratio (decomposed / best baseline, mean of per-task ratios): {}",
            fmt_opt(imp.ratio)
        );
        if !imp.skipped.is_empty() {
            let _ = write!(s, "; skipped (no positive baseline mean): {}", imp.skipped.join(", "));
        }
        s.push('\n');
    }
    s
}

/// Computes the summary and writes `summary.md` and `summary.json` into
/// `dir`. Re-running on an unchanged directory rewrites identical bytes.
pub fn summarize(dir: &Path) -> LabResult<Summary> {
    let summary = compute(dir)?;
    let md = dir.join("summary.md");
    std::fs::write(&md, render(&summary)).map_err(|e| LabError::io(&md, e))?;
    let js = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    std::fs::write(&js, text).map_err(|e| LabError::io(&js, e))?;
    Ok(summary)
}
