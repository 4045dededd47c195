//! The decomposed contrastive reward and the baseline reward shapes.
//!
//! The decomposed reward of a video segment `z_v` contrasts its best-matching
//! sub-goal prompt against the failure prompts:
//!
//! ```text
//! r = max_l exp(z_v·z_l/τ) / (max_l exp(z_v·z_l/τ) + Σ_n exp(z_v·z_n/τ))
//!   = 1 / (1 + Σ_n exp((z_v·z_n − p*)/τ)),   p* = max_l z_v·z_l
//! ```
//!
//! Everything is evaluated on logits in log-sum-exp form so that tiny
//! temperatures cannot overflow.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, Encoder, FrameFeature};
use crate::error::{invalid, Error, Result};
use crate::math::log_sum_exp;

/// Which reward shape drives learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Sub-goal positives against failure negatives over sliding windows.
    Decomposed,
    /// Per-frame cosine to the coarse instruction.
    SinglePrompt,
    /// Whole-trajectory cosine to the coarse instruction, paid at the end.
    FinalSegment,
}

impl RewardMode {
    pub const ALL: [RewardMode; 3] = [RewardMode::Decomposed, RewardMode::SinglePrompt, RewardMode::FinalSegment];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardMode::Decomposed => "decomposed",
            RewardMode::SinglePrompt => "single_prompt",
            RewardMode::FinalSegment => "final_segment",
        }
    }
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RewardMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown reward mode {s:?}")))
    }
}

/// Reward hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Temperature applied to every logit.
    pub tau: f64,
    /// Window length in frames.
    pub window: usize,
    /// Window stride in frames, `1 <= stride <= window`.
    pub stride: usize,
    /// Added to the terminal reward of a trajectory labeled successful.
    pub success_bonus: f64,
    pub reward_mode: RewardMode,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { tau: 0.1, window: 16, stride: 4, success_bonus: 100.0, reward_mode: RewardMode::Decomposed }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if self.stride == 0 || self.stride > self.window {
            return Err(invalid(format!(
                "need 1 <= stride <= window, got stride {} window {}",
                self.stride, self.window
            )));
        }
        if !self.success_bonus.is_finite() {
            return Err(invalid("success bonus must be finite"));
        }
        Ok(())
    }
}

/// Positive sub-goal prompts, negative failure prompts and the coarse
/// instruction, each with its embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    positives: Vec<(String, Embedding)>,
    negatives: Vec<(String, Embedding)>,
    coarse: Option<(String, Embedding)>,
}

impl PromptSet {
    pub fn new(
        positives: Vec<(String, Embedding)>,
        negatives: Vec<(String, Embedding)>,
        coarse: Option<(String, Embedding)>,
    ) -> Result<Self> {
        if positives.is_empty() {
            return Err(invalid("prompt set needs at least one positive"));
        }
        for (name, list) in [("positive", &positives), ("negative", &negatives)] {
            for (i, (p, _)) in list.iter().enumerate() {
                if list[..i].iter().any(|(q, _)| q == p) {
                    return Err(invalid(format!("duplicate {name} prompt {p:?}")));
                }
            }
        }
        Ok(PromptSet { positives, negatives, coarse })
    }

    pub fn positives(&self) -> &[(String, Embedding)] {
        &self.positives
    }

    pub fn negatives(&self) -> &[(String, Embedding)] {
        &self.negatives
    }

    pub fn coarse(&self) -> Option<&(String, Embedding)> {
        self.coarse.as_ref()
    }

    fn coarse_embedding(&self) -> Result<&Embedding> {
        self.coarse.as_ref().map(|(_, e)| e).ok_or_else(|| invalid("prompt set has no coarse prompt"))
    }

    /// The same set without failure prompts.
    pub fn without_negatives(&self) -> PromptSet {
        PromptSet { negatives: Vec::new(), ..self.clone() }
    }

    /// Replaces the sub-goal positives by the coarse prompt alone.
    pub fn collapsed_to_coarse(&self) -> Result<PromptSet> {
        let coarse = self.coarse.clone().ok_or_else(|| invalid("prompt set has no coarse prompt"))?;
        Ok(PromptSet { positives: vec![coarse], ..self.clone() })
    }
}

/// Per-step rewards of one trajectory and the window scores they came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTrace {
    /// One entry per observation `o_0 ..= o_T`.
    pub per_step: Vec<f64>,
    /// `(window start frame, raw score)` for every scored window.
    pub window_scores: Vec<(usize, f64)>,
    /// Whether the terminal success bonus has been added.
    pub bonus_applied: bool,
}

/// `exp(z_v·z_pos/τ) / (exp(z_v·z_pos/τ) + Σ exp(z_v·z_neg/τ))`.
pub fn nce_similarity(z_v: &Embedding, z_pos: &Embedding, z_negs: &[Embedding], tau: f64) -> f64 {
    let pos = z_v.dot(z_pos);
    let negs: Vec<f64> = z_negs.iter().map(|n| z_v.dot(n)).collect();
    contrast_score(pos, &negs, tau)
}

/// `1 / (1 + Σ exp((n_i − p)/τ))` without overflow. Empty `negs` gives exactly 1.
pub fn contrast_score(pos: f64, negs: &[f64], tau: f64) -> f64 {
    if negs.is_empty() {
        return 1.0;
    }
    let l = log_sum_exp(negs.iter().map(|n| (n - pos) / tau));
    // 1 / (1 + e^l) = sigmoid(-l)
    if l > 0.0 {
        let e = libm::exp(-l);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + libm::exp(l))
    }
}

/// Decomposed reward from raw logits (dot products, before temperature).
///
/// The best positive is the first index attaining the maximum. With no
/// negatives the remaining positives form the contrast set.
pub fn decomposed_from_logits(positives: &[f64], negatives: &[f64], tau: f64) -> Result<f64> {
    if positives.is_empty() {
        return Err(invalid("decomposed reward needs at least one positive"));
    }
    let mut best = 0;
    for (i, p) in positives.iter().enumerate() {
        if *p > positives[best] {
            best = i;
        }
    }
    let p_star = positives[best];
    if negatives.is_empty() {
        let rest: Vec<f64> = positives.iter().enumerate().filter(|(i, _)| *i != best).map(|(_, p)| *p).collect();
        Ok(contrast_score(p_star, &rest, tau))
    } else {
        Ok(contrast_score(p_star, negatives, tau))
    }
}

pub fn decomposed_reward(z_v: &Embedding, prompts: &PromptSet, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    let pos: Vec<f64> = prompts.positives.iter().map(|(_, z)| z_v.dot(z)).collect();
    let neg: Vec<f64> = prompts.negatives.iter().map(|(_, z)| z_v.dot(z)).collect();
    decomposed_from_logits(&pos, &neg, tau)
}

/// Placement of one scored window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlacement {
    /// Frames `frames.start .. frames.end` are embedded.
    pub frames: Range<usize>,
    /// Per-step entries that receive this window's score.
    pub assigned: Range<usize>,
}

/// Lays out windows over a trajectory of `len` frames.
///
/// Full windows start at `0, s, 2s, …` while they fit. A window ending at
/// frame `t` pays entries `t-s+1 ..= t`, and the first window also pays the
/// entries before that. Frames left after the last full window form one
/// shorter window starting at the next stride position. A trajectory shorter
/// than the window is a single window.
pub fn window_plan(len: usize, window: usize, stride: usize) -> Vec<WindowPlacement> {
    assert!(stride >= 1 && stride <= window, "need 1 <= stride <= window");
    if len == 0 {
        return Vec::new();
    }
    if len <= window {
        return vec![WindowPlacement { frames: 0..len, assigned: 0..len }];
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + window <= len {
        let end = start + window;
        let assigned = if start == 0 { 0..end } else { end - stride..end };
        out.push(WindowPlacement { frames: start..end, assigned });
        start += stride;
    }
    let covered = out.last().map_or(0, |w| w.assigned.end);
    if covered < len {
        out.push(WindowPlacement { frames: start..len, assigned: covered..len });
    }
    out
}

/// Decomposed reward over sliding windows.
pub fn window_rewards<E: Encoder + ?Sized>(
    frames: &[FrameFeature],
    prompts: &PromptSet,
    cfg: &RewardConfig,
    encoder: &E,
) -> Result<RewardTrace> {
    if frames.is_empty() {
        return Err(invalid("empty trajectory"));
    }
    cfg.validate()?;
    let mut per_step = vec![0.0; frames.len()];
    let mut window_scores = Vec::new();
    for w in window_plan(frames.len(), cfg.window, cfg.stride) {
        let z_v = encoder.encode_segment(&frames[w.frames.clone()])?;
        let r = decomposed_reward(&z_v, prompts, cfg.tau)?;
        per_step[w.assigned].iter_mut().for_each(|x| *x = r);
        window_scores.push((w.frames.start, r));
    }
    Ok(RewardTrace { per_step, window_scores, bonus_applied: false })
}

/// Cosine between one frame's embedding and the coarse instruction.
pub fn single_prompt_reward<E: Encoder + ?Sized>(
    frame: &FrameFeature,
    prompts: &PromptSet,
    encoder: &E,
) -> Result<f64> {
    let coarse = prompts.coarse_embedding()?;
    let z = encoder.encode_segment(core::slice::from_ref(frame))?;
    Ok(z.dot(coarse))
}

/// Per-frame [`single_prompt_reward`] over a whole trajectory.
pub fn single_prompt_trace<E: Encoder + ?Sized>(
    frames: &[FrameFeature],
    prompts: &PromptSet,
    encoder: &E,
) -> Result<RewardTrace> {
    let per_step = frames.iter().map(|f| single_prompt_reward(f, prompts, encoder)).collect::<Result<Vec<_>>>()?;
    let window_scores = per_step.iter().copied().enumerate().collect();
    Ok(RewardTrace { per_step, window_scores, bonus_applied: false })
}

/// Zero everywhere except the last entry, which holds the cosine between the
/// whole-trajectory embedding and the coarse instruction.
pub fn final_segment_reward<E: Encoder + ?Sized>(
    frames: &[FrameFeature],
    prompts: &PromptSet,
    encoder: &E,
) -> Result<RewardTrace> {
    if frames.is_empty() {
        return Err(invalid("empty trajectory"));
    }
    let coarse = prompts.coarse_embedding()?;
    let r = encoder.encode_segment(frames)?.dot(coarse);
    let mut per_step = vec![0.0; frames.len()];
    *per_step.last_mut().expect("nonempty") = r;
    Ok(RewardTrace { per_step, window_scores: vec![(0, r)], bonus_applied: false })
}

/// Dispatches on `cfg.reward_mode`.
pub fn compute_trace<E: Encoder + ?Sized>(
    frames: &[FrameFeature],
    prompts: &PromptSet,
    cfg: &RewardConfig,
    encoder: &E,
) -> Result<RewardTrace> {
    match cfg.reward_mode {
        RewardMode::Decomposed => window_rewards(frames, prompts, cfg, encoder),
        RewardMode::SinglePrompt => single_prompt_trace(frames, prompts, encoder),
        RewardMode::FinalSegment => final_segment_reward(frames, prompts, encoder),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn e(v: &[f64]) -> Embedding {
        Embedding::from_raw(v.to_vec()).unwrap()
    }

    fn named(list: &[&[f64]]) -> Vec<(String, Embedding)> {
        list.iter().enumerate().map(|(i, v)| (alloc::format!("p{i}"), e(v))).collect()
    }

    #[test]
    fn nce_empty_negatives_is_one() {
        assert_eq!(nce_similarity(&e(&[1.0, 0.0]), &e(&[0.0, 1.0]), &[], 0.1), 1.0);
    }

    #[test]
    fn nce_identical_negative_is_half() {
        let zp = e(&[0.6, 0.8]);
        for tau in [1e-3, 0.1, 7.0] {
            assert_eq!(nce_similarity(&e(&[1.0, 0.0]), &zp, core::slice::from_ref(&zp), tau), 0.5);
        }
    }

    #[test]
    fn single_positive_without_negatives_is_one() {
        let ps = PromptSet::new(named(&[&[1.0, 0.0]]), vec![], None).unwrap();
        assert_eq!(decomposed_reward(&e(&[0.0, 1.0]), &ps, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn cold_temperature_saturates() {
        let r = decomposed_from_logits(&[0.9], &[0.1], 1e-3).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prompt_set_rejects_empty_and_duplicates() {
        assert!(PromptSet::new(vec![], vec![], None).is_err());
        let dup = vec![("a".to_string(), e(&[1.0])), ("a".to_string(), e(&[1.0]))];
        assert!(PromptSet::new(dup, vec![], None).is_err());
        assert!(decomposed_from_logits(&[], &[], 1.0).is_err());
    }

    #[test]
    fn tie_goes_to_first_positive() {
        // Both positives tie; the fallback contrast is the other, giving 1/2.
        let r = decomposed_from_logits(&[0.3, 0.3], &[], 0.1).unwrap();
        assert_eq!(r, 0.5);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut c = RewardConfig::default();
        assert!(c.validate().is_ok());
        c.stride = 17;
        assert!(c.validate().is_err());
        c.stride = 0;
        assert!(c.validate().is_err());
        let c = RewardConfig { tau: 0.0, ..RewardConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn window_plan_short_trajectory_is_single_window() {
        let p = window_plan(7, 16, 4);
        assert_eq!(p, vec![WindowPlacement { frames: 0..7, assigned: 0..7 }]);
    }

    #[test]
    fn reward_mode_round_trips_through_str() {
        for m in RewardMode::ALL {
            assert_eq!(m.as_str().parse::<RewardMode>().unwrap(), m);
        }
        assert!("clip".parse::<RewardMode>().is_err());
    }

    #[test]
    fn baselines_need_a_coarse_prompt() {
        let enc = crate::embedding::SyntheticEncoder::with_table(vec![]).unwrap();
        let ps = PromptSet::new(named(&[&[1.0; 64]]), vec![], None).unwrap();
        let f = FrameFeature::default();
        assert!(single_prompt_reward(&f, &ps, &enc).is_err());
        assert!(final_segment_reward(&[f], &ps, &enc).is_err());
    }
}
