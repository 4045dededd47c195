//! Success labeling of a trajectory's final observation.
//!
//! Two labelers exist: the environment's ground-truth predicate, optionally
//! corrupted by symmetric label noise, and a two-message query to an external
//! vision-language model that must answer with `1` (success) or `0`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::FrameFeature;
use crate::env::TaskId;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Oracle,
    OracleNoised,
    Vlm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDecision {
    pub success: bool,
    pub source: LabelSource,
    /// Model reply; present exactly when `source` is [`LabelSource::Vlm`].
    pub raw_response: Option<String>,
}

/// Ground-truth label flipped with probability `error_rate`.
///
/// One uniform draw is consumed per call whatever the rate, so runs with
/// different rates stay aligned on the labeler's random stream.
pub fn label_oracle<R: Rng + ?Sized>(env_truth: bool, error_rate: f64, rng: &mut R) -> Result<LabelDecision> {
    if !(0.0..0.5).contains(&error_rate) {
        return Err(invalid(format!("error rate must be in [0, 0.5), got {error_rate}")));
    }
    let flip = rng.random::<f64>() < error_rate;
    Ok(LabelDecision {
        success: env_truth != flip,
        source: if error_rate == 0.0 { LabelSource::Oracle } else { LabelSource::OracleNoised },
        raw_response: None,
    })
}

/// Question sent together with the final observation.
pub const VLM_QUERY: &str = "What is the output of this image?";

/// Context message defining what counts as success, e.g. for
/// `"the door is open"`.
pub fn vlm_context_prompt(success_condition: &str) -> String {
    format!(
        "Consider the following image; this is a simulation environment. In this image, {success_condition}. \
         We define it when {success_condition}, the output is 1. Otherwise, the output is 0."
    )
}

/// Plain-language success condition of a task.
pub fn success_condition(task: TaskId) -> &'static str {
    match task {
        TaskId::DoorOpen => "the door is open",
        TaskId::DoorClose => "the door is closed",
        TaskId::DrawerOpen => "the drawer is open",
        TaskId::DrawerClose => "the drawer is closed",
        TaskId::WindowOpen => "the window is open",
        TaskId::WindowClose => "the window is closed",
        TaskId::ButtonPress => "the button is pressed",
        TaskId::FaucetOpen => "the faucet is open",
        TaskId::PushBall => "the ball is in the goal",
    }
}

/// One message of a vision-language conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VlmMessage {
    pub text: String,
    pub image: Option<FrameFeature>,
}

/// A vision-language model endpoint.
pub trait VisionClient {
    /// Sends the conversation and returns the final reply as free text.
    fn ask(&mut self, messages: &[VlmMessage]) -> Result<String>;
}

/// Extracts the verdict: the last whitespace-separated token made only of
/// digits (ignoring surrounding punctuation) must be `0` or `1`.
pub fn parse_label_response(raw: &str) -> Result<bool> {
    let last_digits = raw
        .split_whitespace()
        .map(|tok| tok.trim_matches(|c: char| !c.is_alphanumeric()))
        .rfind(|tok| !tok.is_empty() && tok.chars().all(|c| c.is_ascii_digit()));
    match last_digits {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        _ => Err(Error::Parse { raw: raw.into() }),
    }
}

/// Asks the model whether `final_image` shows success.
///
/// Transport failures are passed through; an unusable reply is a
/// [`Error::Parse`] carrying the raw text, never a silent failure label.
pub fn label_vlm<C: VisionClient + ?Sized>(
    final_image: &FrameFeature,
    context_prompt: &str,
    query: &str,
    reference_image: Option<&FrameFeature>,
    client: &mut C,
) -> Result<LabelDecision> {
    let messages = vec![
        VlmMessage { text: context_prompt.into(), image: reference_image.cloned() },
        VlmMessage { text: query.into(), image: Some(final_image.clone()) },
    ];
    let raw = client.ask(&messages)?;
    let success = parse_label_response(&raw)?;
    Ok(LabelDecision { success, source: LabelSource::Vlm, raw_response: Some(raw) })
}

/// Scripted client replaying canned replies in order; handy in tests.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    pub replies: Vec<Result<String>>,
    pub calls: Vec<Vec<VlmMessage>>,
}

impl VisionClient for ReplayClient {
    fn ask(&mut self, messages: &[VlmMessage]) -> Result<String> {
        self.calls.push(messages.to_vec());
        if self.replies.is_empty() {
            return Err(Error::Transport("no scripted reply left".into()));
        }
        self.replies.remove(0)
    }
}
