//! Success replay buffer, terminal reward correction and the imitation term
//! `λ Σ_{(s,a)∈D_E} −log π(a|s)` added to the policy loss.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{observe, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::label::LabelDecision;
use crate::policy::Policy;
use crate::reward::RewardConfig;

/// One `(state, action)` pair harvested from a successful trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessPair {
    pub trajectory_id: u64,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
}

/// Bounded FIFO store of pairs from trajectories labeled successful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessBuffer {
    capacity: usize,
    pairs: VecDeque<SuccessPair>,
}

impl SuccessBuffer {
    pub const DEFAULT_CAPACITY: usize = 50_000;

    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("buffer capacity must be positive"));
        }
        Ok(SuccessBuffer { capacity, pairs: VecDeque::new() })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Appends a pair, evicting the oldest one when full.
    pub fn push(&mut self, pair: SuccessPair) {
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(pair);
    }

    pub fn iter(&self) -> impl Iterator<Item = &SuccessPair> {
        self.pairs.iter()
    }

    /// Uniform sample with replacement; empty when the buffer is empty.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<SuccessPair> {
        if self.pairs.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| self.pairs[rng.random_range(0..self.pairs.len())].clone()).collect()
    }
}

/// Applies the self-imitation bookkeeping for one finished trajectory.
///
/// On a positive label every `(o_t, a_t)` pair enters the buffer and the final
/// per-step reward gains `cfg.success_bonus`. Negative labels, and
/// trajectories that already received the bonus, are left untouched. Returns
/// whether anything was recorded.
pub fn record_if_success(
    traj: &mut Trajectory,
    trajectory_id: u64,
    label: &LabelDecision,
    buf: &mut SuccessBuffer,
    cfg: &RewardConfig,
) -> Result<bool> {
    if !traj.is_consistent() {
        return Err(invalid("trajectory is incomplete"));
    }
    if !label.success || traj.reward_trace.bonus_applied {
        return Ok(false);
    }
    let last = traj.reward_trace.per_step.last_mut().ok_or_else(|| invalid("trajectory has no reward trace"))?;
    *last += cfg.success_bonus;
    traj.reward_trace.bonus_applied = true;
    for (obs, action) in traj.observations.iter().zip(&traj.actions) {
        buf.push(SuccessPair { trajectory_id, state: observe(obs), action: action.clone() });
    }
    Ok(true)
}

/// `Σ −log π(a|s)` over the batch; zero for an empty batch.
pub fn regularization_loss<P: Policy + ?Sized>(policy: &P, batch: &[SuccessPair]) -> Result<f64> {
    let mut total = 0.0;
    for p in batch {
        let lp = policy.log_prob(&p.state, &p.action);
        if !lp.is_finite() {
            return Err(Error::Numeric("log-probability of a success pair".into()));
        }
        total -= lp;
    }
    Ok(total)
}

/// Adds `scale · ∇_θ Σ −log π(a|s)` to `grad` and returns the loss.
pub fn regularization_grad<P: Policy + ?Sized>(
    policy: &P,
    batch: &[SuccessPair],
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let mut total = 0.0;
    for p in batch {
        let lp = policy.accumulate_log_prob_grad(&p.state, &p.action, -scale, grad);
        if !lp.is_finite() {
            return Err(Error::Numeric("log-probability of a success pair".into()));
        }
        total -= lp;
    }
    Ok(total)
}

/// `rl_loss + λ · reg`.
pub fn combined_loss(rl_loss: f64, reg: f64, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(invalid("lambda must be non-negative"));
    }
    if lambda == 0.0 {
        return Ok(rl_loss);
    }
    Ok(rl_loss + lambda * reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::FrameFeature;
    use crate::env::{reset, TaskId};
    use crate::label::LabelSource;
    use crate::policy::LinearGaussianPolicy;
    use crate::reward::RewardTrace;
    use alloc::vec;

    fn traj(steps: usize, terminal_reward: f64) -> Trajectory {
        let s = reset(TaskId::DoorOpen, 0);
        let mut per_step = vec![0.0; steps + 1];
        per_step[steps] = terminal_reward;
        Trajectory {
            observations: vec![s; steps + 1],
            actions: (0..steps).map(|i| vec![i as f64, 0.0, 0.0]).collect(),
            frames: vec![FrameFeature::default(); steps + 1],
            reward_trace: RewardTrace { per_step, window_scores: vec![], bonus_applied: false },
        }
    }

    fn label(success: bool) -> LabelDecision {
        LabelDecision { success, source: LabelSource::Oracle, raw_response: None }
    }

    #[test]
    fn failure_changes_nothing() {
        let mut t = traj(5, 0.8);
        let before = t.clone();
        let mut buf = SuccessBuffer::new(10).unwrap();
        assert!(!record_if_success(&mut t, 1, &label(false), &mut buf, &RewardConfig::default()).unwrap());
        assert_eq!(t, before);
        assert!(buf.is_empty());
    }

    #[test]
    fn success_adds_bonus_once() {
        let mut t = traj(5, 0.8);
        let mut buf = SuccessBuffer::new(100).unwrap();
        let cfg = RewardConfig::default();
        assert!(record_if_success(&mut t, 1, &label(true), &mut buf, &cfg).unwrap());
        assert_eq!(*t.reward_trace.per_step.last().unwrap(), 0.8 + 100.0);
        assert!(!record_if_success(&mut t, 1, &label(true), &mut buf, &cfg).unwrap());
        assert_eq!(*t.reward_trace.per_step.last().unwrap(), 0.8 + 100.0);
        assert_eq!(buf.len(), 5);
    }

    #[test]
    fn fifo_keeps_latest_pairs() {
        let mut t = traj(12, 0.0);
        let mut buf = SuccessBuffer::new(10).unwrap();
        record_if_success(&mut t, 7, &label(true), &mut buf, &RewardConfig::default()).unwrap();
        assert_eq!(buf.len(), 10);
        let firsts: Vec<f64> = buf.iter().map(|p| p.action[0]).collect();
        assert_eq!(firsts, (2..12).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn loss_basics() {
        // 1-d policy with mean 0 and std chosen so that density at a=0 is 0.5
        let sigma = 1.0 / (0.5 * libm::sqrt(2.0 * core::f64::consts::PI));
        let pol = LinearGaussianPolicy::new(1, 1, vec![0.0], vec![libm::log(sigma)]);
        let pair = SuccessPair { trajectory_id: 0, state: vec![1.0], action: vec![0.0] };
        assert_eq!(regularization_loss(&pol, &[]).unwrap(), 0.0);
        let one = regularization_loss(&pol, core::slice::from_ref(&pair)).unwrap();
        assert!((one - core::f64::consts::LN_2).abs() < 1e-12);
        let two = regularization_loss(&pol, &[pair.clone(), pair]).unwrap();
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn combined_loss_arithmetic() {
        assert_eq!(combined_loss(2.0, 0.5, 1.0).unwrap(), 2.5);
        assert_eq!(combined_loss(2.0, 123.0, 0.0).unwrap(), 2.0);
        assert!(combined_loss(2.0, 0.5, -1.0).is_err());
    }
}
