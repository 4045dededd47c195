//! Sub-goal decompositions of a coarse instruction and the prompt sets built
//! from them.
//!
//! A decomposition comes either from a stored fixture or from an external
//! language model asked with [`INSTRUCTION_TEMPLATE`]; failure prompts are
//! always supplied by the caller from human-authored configuration.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::Encoder;
use crate::error::{invalid, Error, Result};
use crate::reward::PromptSet;

/// Version of [`INSTRUCTION_TEMPLATE`]; bump whenever the wording changes.
pub const INSTRUCTION_TEMPLATE_VERSION: u32 = 1;

/// Request sent to the language model; `{task}` is replaced by the instruction.
pub const INSTRUCTION_TEMPLATE: &str = "You are controlling a robot arm with a single gripper in a tabletop \
simulation. Break the instruction \"{task}\" into the short ordered sequence of sub-goals the robot hand \
must achieve, thinking step by step. Describe each sub-goal as one sentence that starts with \"the robot hand\" \
and answer only with a numbered list such as \"1. ...\" with one sub-goal per line.";

pub fn render_instruction(task: &str) -> String {
    INSTRUCTION_TEMPLATE.replace("{task}", task)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionSource {
    Fixture,
    Live,
}

/// How [`decompose`] may obtain a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecomposeMode {
    /// Stored decompositions only.
    Fixture,
    /// Stored decompositions first, then the language model.
    Live,
}

impl FromStr for DecomposeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixture" => Ok(DecomposeMode::Fixture),
            "live" => Ok(DecomposeMode::Live),
            _ => Err(invalid(format!("unknown decomposition mode {s:?}"))),
        }
    }
}

impl fmt::Display for DecomposeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecomposeMode::Fixture => "fixture",
            DecomposeMode::Live => "live",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgoalDecomposition {
    pub task: String,
    pub subgoals: Vec<String>,
    pub failures: Vec<String>,
    pub source: DecompositionSource,
}

impl SubgoalDecomposition {
    pub fn validate(&self) -> Result<()> {
        if self.task.trim().is_empty() {
            return Err(invalid("decomposition has an empty task"));
        }
        if self.subgoals.is_empty() {
            return Err(invalid(format!("decomposition of {:?} has no sub-goals", self.task)));
        }
        if self.subgoals.iter().chain(&self.failures).any(|s| s.trim().is_empty()) {
            return Err(invalid(format!("decomposition of {:?} has an empty prompt", self.task)));
        }
        Ok(())
    }
}

/// Text-completion endpoint of a language model.
pub trait LlmClient {
    fn complete(&mut self, prompt: &str) -> Result<String>;
}

/// Storage of decompositions keyed by the exact task string.
pub trait DecompositionStore {
    fn get(&self, task: &str) -> Option<SubgoalDecomposition>;
    fn put(&mut self, dec: SubgoalDecomposition) -> Result<()>;
}

/// Finds the items of a numbered list (`1. a 2. b` or one item per line).
///
/// Markers must count up from 1 and be followed by whitespace; anything
/// before the first marker is ignored, and an item ends at the next marker or
/// the end of its line.
pub fn parse_numbered_list(text: &str) -> Result<Vec<String>> {
    let bytes = text.as_bytes();
    let mut markers: Vec<(usize, usize)> = Vec::new(); // (marker start, content start)
    let mut expected = 1usize;
    let mut i = 0;
    while i < bytes.len() {
        let at_boundary = i == 0 || bytes[i - 1].is_ascii_whitespace();
        if at_boundary && bytes[i].is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            let followed =
                j + 1 < bytes.len() && (bytes[j] == b'.' || bytes[j] == b')') && bytes[j + 1].is_ascii_whitespace();
            if followed && text[i..j].parse::<usize>().ok() == Some(expected) {
                markers.push((i, j + 1));
                expected += 1;
                i = j + 1;
                continue;
            }
            i = j;
            continue;
        }
        i += 1;
    }
    if markers.is_empty() {
        return Err(Error::Parse { raw: text.into() });
    }
    let mut items = Vec::with_capacity(markers.len());
    for (k, &(_, content)) in markers.iter().enumerate() {
        let end = markers.get(k + 1).map_or(text.len(), |m| m.0);
        let chunk = &text[content..end];
        let line = chunk.trim_start().lines().next().unwrap_or("").trim();
        if line.is_empty() {
            return Err(Error::Parse { raw: text.into() });
        }
        items.push(line.to_string());
    }
    Ok(items)
}

/// Looks up or generates the decomposition of `task`.
///
/// Fixture mode never touches `client`. Live mode returns a stored entry when
/// present, and otherwise asks the client, parses its numbered list and
/// stores the result. `failures` are attached to freshly generated entries.
pub fn decompose(
    task: &str,
    mode: DecomposeMode,
    store: &mut dyn DecompositionStore,
    client: Option<&mut dyn LlmClient>,
    failures: &[String],
) -> Result<SubgoalDecomposition> {
    if task.trim().is_empty() {
        return Err(invalid("empty task"));
    }
    if let Some(dec) = store.get(task) {
        return Ok(dec);
    }
    match mode {
        DecomposeMode::Fixture => Err(Error::NotFound(format!("no stored decomposition for {task:?}"))),
        DecomposeMode::Live => {
            let client = client.ok_or_else(|| Error::Transport("no language model client configured".into()))?;
            let raw = client.complete(&render_instruction(task))?;
            let subgoals = parse_numbered_list(&raw)?;
            let dec = SubgoalDecomposition {
                task: task.to_string(),
                subgoals,
                failures: failures.to_vec(),
                source: DecompositionSource::Live,
            };
            dec.validate()?;
            store.put(dec.clone())?;
            Ok(dec)
        }
    }
}

fn dedup_keep_order(list: &[String], what: &str, warnings: &mut Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(list.len());
    for s in list {
        if out.contains(s) {
            warnings.push(format!("dropped duplicate {what} prompt {s:?}"));
        } else {
            out.push(s.clone());
        }
    }
    out
}

/// Embeds sub-goals as positives, failures as negatives and `coarse` as the
/// coarse prompt. Duplicates are dropped (first occurrence wins) and reported
/// in the returned warnings.
pub fn build_prompt_set<E: Encoder + ?Sized>(
    dec: &SubgoalDecomposition,
    encoder: &E,
    coarse: &str,
) -> Result<(PromptSet, Vec<String>)> {
    dec.validate()?;
    let mut warnings = Vec::new();
    let subgoals = dedup_keep_order(&dec.subgoals, "sub-goal", &mut warnings);
    let failures = dedup_keep_order(&dec.failures, "failure", &mut warnings);
    let embed = |list: Vec<String>| -> Result<Vec<_>> {
        list.into_iter()
            .map(|p| {
                let z = encoder.encode_text(&p)?;
                Ok((p, z))
            })
            .collect()
    };
    let coarse = (coarse.to_string(), encoder.encode_text(coarse)?);
    let set = PromptSet::new(embed(subgoals)?, embed(failures)?, Some(coarse))?;
    Ok((set, warnings))
}
