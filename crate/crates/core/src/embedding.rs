//! Text and video-segment encoders sharing one embedding space.
//!
//! [`SyntheticEncoder`] stands in for a pretrained video-text model: every
//! canonical event owns a pseudo-random unit anchor derived from its name, a
//! prompt embeds to the anchor of the event it describes, and a window of
//! frames embeds to the frequency-weighted mix of the anchors of the events
//! tagged on those frames.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math;

/// Event name reserved for the "nothing is happening" anchor.
pub const IDLE_EVENT: &str = "idle";

/// A unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `values` onto the unit sphere.
    pub fn from_raw(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("embedding".into()));
        }
        math::normalized(&values).map(Embedding).ok_or_else(|| invalid("cannot normalize a zero vector"))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        math::dot(&self.0, &other.0)
    }
}

/// One environment frame: a feature vector plus the canonical events that hold
/// at that frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameFeature {
    pub values: Vec<f64>,
    pub event_tags: BTreeSet<String>,
}

impl FrameFeature {
    pub fn has(&self, event: &str) -> bool {
        self.event_tags.contains(event)
    }
}

/// Common interface of text and video-segment encoders.
///
/// Implementations are immutable once built, so a shared reference can be
/// used from several threads.
pub trait Encoder {
    /// Embedding dimension.
    fn dim(&self) -> usize;

    fn encode_text(&self, prompt: &str) -> Result<Embedding>;

    /// Embeds a window of consecutive frames.
    fn encode_segment(&self, frames: &[FrameFeature]) -> Result<Embedding>;
}

/// Parses the prompt-to-event table: one `prompt<TAB>event` pair per line.
///
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_prompt_table(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (prompt, event) = line
            .split_once('\t')
            .ok_or_else(|| invalid(format!("line {}: expected `prompt<TAB>event`", lineno + 1)))?;
        let (prompt, event) = (prompt.trim(), event.trim());
        if prompt.is_empty() || event.is_empty() || event.contains('\t') {
            return Err(invalid(format!("line {}: malformed entry", lineno + 1)));
        }
        out.push((prompt.to_string(), event.to_string()));
    }
    Ok(out)
}

/// Deterministic synthetic backend.
#[derive(Debug, Clone)]
pub struct SyntheticEncoder {
    dim: usize,
    seed: u64,
    idle_weight: f64,
    prompt_to_event: BTreeMap<String, String>,
    anchors: BTreeMap<String, Embedding>,
}

impl SyntheticEncoder {
    pub const DEFAULT_DIM: usize = 64;
    pub const DEFAULT_SEED: u64 = 0x5eed_a11c;
    /// Weight of the idle anchor mixed into every segment embedding.
    pub const IDLE_WEIGHT: f64 = 0.1;

    pub fn new(dim: usize, seed: u64, table: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("embedding dimension must be positive"));
        }
        let mut enc = SyntheticEncoder {
            dim,
            seed,
            idle_weight: Self::IDLE_WEIGHT,
            prompt_to_event: BTreeMap::new(),
            anchors: BTreeMap::new(),
        };
        for (prompt, event) in table {
            if let Some(prev) = enc.prompt_to_event.get(&prompt) {
                if *prev != event {
                    return Err(invalid(format!("prompt {prompt:?} mapped to both {prev} and {event}")));
                }
            }
            enc.prompt_to_event.insert(prompt, event);
        }
        let events: BTreeSet<String> =
            enc.prompt_to_event.values().cloned().chain(core::iter::once(IDLE_EVENT.to_string())).collect();
        for event in events {
            let a = enc.make_anchor(&event);
            enc.anchors.insert(event, a);
        }
        Ok(enc)
    }

    /// Builds the encoder with the default dimension and seed.
    pub fn with_table(table: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        Self::new(Self::DEFAULT_DIM, Self::DEFAULT_SEED, table)
    }

    /// Event a prompt is declared to describe, if any.
    pub fn event_of(&self, prompt: &str) -> Option<&str> {
        self.prompt_to_event.get(prompt).map(String::as_str)
    }

    pub fn prompts(&self) -> impl Iterator<Item = (&str, &str)> {
        self.prompt_to_event.iter().map(|(p, e)| (p.as_str(), e.as_str()))
    }

    /// Anchor vector of an event name.
    pub fn anchor(&self, event: &str) -> Embedding {
        match self.anchors.get(event) {
            Some(a) => a.clone(),
            None => self.make_anchor(event),
        }
    }

    pub fn idle_anchor(&self) -> Embedding {
        self.anchor(IDLE_EVENT)
    }

    fn make_anchor(&self, name: &str) -> Embedding {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(name.as_bytes()) ^ self.seed);
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Ok(e) = Embedding::from_raw(v) {
                return e;
            }
        }
    }
}

impl Encoder for SyntheticEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_text(&self, prompt: &str) -> Result<Embedding> {
        if prompt.trim().is_empty() {
            return Err(invalid("empty prompt"));
        }
        Ok(match self.event_of(prompt) {
            Some(event) => self.anchor(event),
            // Unlisted prompts get their own direction, aligned with no event.
            None => self.make_anchor(&format!("prompt:{prompt}")),
        })
    }

    fn encode_segment(&self, frames: &[FrameFeature]) -> Result<Embedding> {
        if frames.is_empty() {
            return Err(invalid("empty frame window"));
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for f in frames {
            for tag in &f.event_tags {
                *counts.entry(tag.as_str()).or_default() += 1;
            }
        }
        let idle = self.idle_anchor();
        if counts.is_empty() {
            return Ok(idle);
        }
        let n = frames.len() as f64;
        let mut acc: Vec<f64> = idle.as_slice().iter().map(|x| x * self.idle_weight).collect();
        for (tag, c) in counts {
            let a = self.anchor(tag);
            let w = c as f64 / n;
            for (o, x) in acc.iter_mut().zip(a.as_slice()) {
                *o += w * x;
            }
        }
        Embedding::from_raw(acc)
    }
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn enc() -> SyntheticEncoder {
        SyntheticEncoder::with_table(vec![
            ("the robot hand approaches the door's handle".into(), "door-approach-handle".into()),
            ("the robot hand grasps the door's handle".into(), "door-grasp-handle".into()),
            ("open the door".into(), "door-open".into()),
        ])
        .unwrap()
    }

    fn frame(tags: &[&str]) -> FrameFeature {
        FrameFeature { values: vec![0.0], event_tags: tags.iter().map(|t| t.to_string()).collect() }
    }

    #[test]
    fn text_encoding_is_deterministic_and_unit() {
        let e = enc();
        let a = e.encode_text("the robot hand grasps the handle").unwrap();
        let b = e.encode_text("the robot hand grasps the handle").unwrap();
        assert_eq!(a, b);
        assert!((math::norm(a.as_slice()) - 1.0).abs() < 1e-12);
        assert_eq!(a.dim(), 64);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let e = enc();
        assert!(matches!(e.encode_text(""), Err(Error::InvalidArgument(_))));
        assert!(matches!(e.encode_segment(&[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn untagged_window_is_the_idle_anchor() {
        let e = enc();
        let seg = e.encode_segment(&[frame(&[]), frame(&[])]).unwrap();
        assert_eq!(seg, e.idle_anchor());
    }

    #[test]
    fn repeated_frames_equal_single_frame() {
        let e = enc();
        let f = frame(&["door-approach-handle", "door-grasp-handle"]);
        let once = e.encode_segment(core::slice::from_ref(&f)).unwrap();
        let many = e.encode_segment(&vec![f; 16]).unwrap();
        assert_eq!(once, many);
    }

    #[test]
    fn separate_instances_agree_bitwise() {
        let a = enc().encode_text("open the door").unwrap();
        let b = enc().encode_text("open the door").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conflicting_table_entries_fail() {
        let r = SyntheticEncoder::with_table(vec![("p".into(), "a".into()), ("p".into(), "b".into())]);
        assert!(r.is_err());
    }

    #[test]
    fn table_parser_skips_comments_and_rejects_garbage() {
        let t = parse_prompt_table("# header\n\nopen the door\tdoor-open\r\n").unwrap();
        assert_eq!(t, vec![("open the door".to_string(), "door-open".to_string())]);
        assert!(parse_prompt_table("no tab here\n").is_err());
        assert!(parse_prompt_table("\tevent\n").is_err());
    }
}
