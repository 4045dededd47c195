//! Shipped fixtures and the text formats they use.
//!
//! * prompt table: `prompt<TAB>event` per line;
//! * failure prompts: `task-id<TAB>prompt` per line, order kept;
//! * decompositions: one JSON object per line (`task`, `subgoals`,
//!   `failures`, `source`), keyed by the exact task string.
//!
//! All three accept blank lines; the two tab-separated files also accept
//! `#` comment lines.

use std::collections::BTreeMap;
use std::path::Path;

use vlreward_core::decompose::SubgoalDecomposition;
use vlreward_core::embedding::parse_prompt_table;
use vlreward_core::env::TaskId;

use crate::config::FixtureRef;
use crate::error::{LabError, LabResult};

pub const PROMPTS_TSV: &str = include_str!("../fixtures/prompts.tsv");
pub const DECOMPOSITIONS_JSONL: &str = include_str!("../fixtures/decompositions.jsonl");
pub const FAILURES_TSV: &str = include_str!("../fixtures/failures.tsv");

pub fn read_text(path: &Path) -> LabResult<String> {
    std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))
}

/// Contents of a fixture reference.
pub fn load(fixture: &FixtureRef, builtin: &'static str) -> LabResult<String> {
    match fixture {
        FixtureRef::Builtin => Ok(builtin.to_string()),
        FixtureRef::Path(p) => {
            std::fs::read_to_string(p).map_err(|e| LabError::Fixture(format!("{}: {e}", p.display())))
        }
    }
}

pub fn parse_decompositions(text: &str) -> LabResult<BTreeMap<String, SubgoalDecomposition>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let dec: SubgoalDecomposition =
            serde_json::from_str(line).map_err(|e| LabError::Fixture(format!("decomposition line {}: {e}", i + 1)))?;
        dec.validate()?;
        if out.insert(dec.task.clone(), dec).is_some() {
            return Err(LabError::Fixture(format!("decomposition line {}: task listed twice", i + 1)));
        }
    }
    Ok(out)
}

pub fn write_decompositions<'a>(decs: impl IntoIterator<Item = &'a SubgoalDecomposition>) -> String {
    decs.into_iter().map(|d| serde_json::to_string(d).expect("decomposition serializes") + "\n").collect()
}

/// Failure prompts per task id.
pub fn parse_failures(text: &str) -> LabResult<BTreeMap<TaskId, Vec<String>>> {
    let mut out: BTreeMap<TaskId, Vec<String>> = BTreeMap::new();
    for (task, prompt) in parse_prompt_table(text)? {
        let task: TaskId = task.parse()?;
        out.entry(task).or_default().push(prompt);
    }
    Ok(out)
}
