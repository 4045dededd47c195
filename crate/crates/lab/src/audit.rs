//! Line-delimited JSON logs: label decisions and trajectory dumps, and the
//! cross-check run by the `label-audit` command.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vlreward_core::env::{success, TaskId, Trajectory};
use vlreward_core::label::LabelSource;
use vlreward_core::trainer::LabelRecord;

use crate::checkpoint::read_buffer;
use crate::error::{LabError, LabResult};
use crate::fixtures::read_text;

/// One line of `labels.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelLogLine {
    pub trajectory_id: u64,
    /// `null` when the trajectory stayed unlabeled.
    pub source: Option<LabelSource>,
    pub success: Option<bool>,
    pub raw_response: Option<String>,
    pub error: Option<String>,
}

impl From<&LabelRecord> for LabelLogLine {
    fn from(r: &LabelRecord) -> Self {
        LabelLogLine {
            trajectory_id: r.trajectory_id,
            source: r.decision.as_ref().map(|d| d.source),
            success: r.decision.as_ref().map(|d| d.success),
            raw_response: r.decision.as_ref().and_then(|d| d.raw_response.clone()),
            error: r.error.clone(),
        }
    }
}

/// One line of `trajectories.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub id: u64,
    pub task: TaskId,
    pub trajectory: Trajectory,
}

pub fn write_jsonl<T: Serialize>(out: &mut impl Write, item: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, item)?;
    out.write_all(b"\n")
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> LabResult<Vec<T>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| LabError::format(path, format!("line {}: {e}", i + 1))))
        .collect()
}

/// Outcome of auditing one run directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub labeled: usize,
    pub unlabeled: usize,
    pub positives: usize,
    /// Labels compared against the terminal state of dumped trajectories.
    pub checked: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Buffer pairs whose trajectory was not labeled successful.
    pub provenance_violations: usize,
}

/// Audits a run directory: labels against dumped trajectories (when
/// `trajectories.jsonl` exists) and buffer provenance (when `buffer.ckpt`
/// exists).
pub fn audit_run(dir: &Path) -> LabResult<AuditReport> {
    let labels: Vec<LabelLogLine> = read_jsonl(&dir.join("labels.jsonl"))?;
    let mut report = AuditReport::default();
    let mut positive_ids = BTreeSet::new();
    let mut by_id = BTreeMap::new();
    for l in &labels {
        match l.success {
            Some(s) => {
                report.labeled += 1;
                if s {
                    report.positives += 1;
                    positive_ids.insert(l.trajectory_id);
                }
                by_id.insert(l.trajectory_id, s);
            }
            None => report.unlabeled += 1,
        }
    }
    let traj_path = dir.join("trajectories.jsonl");
    if traj_path.exists() {
        for t in read_jsonl::<TrajectoryLine>(&traj_path)? {
            let (Some(&label), Some(terminal)) = (by_id.get(&t.id), t.trajectory.terminal()) else { continue };
            let truth = success(terminal);
            report.checked += 1;
            report.false_positives += usize::from(label && !truth);
            report.false_negatives += usize::from(!label && truth);
        }
    }
    let buf_path = dir.join("buffer.ckpt");
    if buf_path.exists() {
        let buf = read_buffer(&read_text(&buf_path)?).map_err(|m| LabError::format(&buf_path, m))?;
        report.provenance_violations = buf.iter().filter(|p| !positive_ids.contains(&p.trajectory_id)).count();
    }
    Ok(report)
}
