//! Terminal correction, buffer provenance and the imitation regularizer.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlreward_core::embedding::FrameFeature;
use vlreward_core::env::{observe, reset, step, TaskId, Trajectory};
use vlreward_core::label::{label_oracle, LabelDecision, LabelSource};
use vlreward_core::policy::{LinearGaussianPolicy, Policy};
use vlreward_core::reward::{RewardConfig, RewardTrace};
use vlreward_core::selfimitate::{
    combined_loss, record_if_success, regularization_grad, regularization_loss, SuccessBuffer, SuccessPair,
};

fn random_trajectory(rng: &mut ChaCha8Rng, len: usize) -> Trajectory {
    let mut s = reset(TaskId::ALL[rng.random_range(0..9)], rng.random());
    let mut traj =
        Trajectory { observations: vec![s.clone()], frames: vec![FrameFeature::default()], ..Default::default() };
    for _ in 0..len {
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let st = step(&s, &a);
        traj.actions.push(a);
        traj.observations.push(st.state.clone());
        traj.frames.push(st.frame);
        s = st.state;
    }
    let per_step = (0..=len).map(|_| rng.random::<f64>()).collect();
    traj.reward_trace = RewardTrace { per_step, window_scores: vec![], bonus_applied: false };
    traj
}

fn label(success: bool) -> LabelDecision {
    LabelDecision { success, source: LabelSource::Oracle, raw_response: None }
}

#[test]
fn provenance_holds_over_1000_fuzzed_trajectories() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let cfg = RewardConfig::default();
    let mut buf = SuccessBuffer::new(SuccessBuffer::DEFAULT_CAPACITY).unwrap();
    let mut succeeded = BTreeSet::new();
    for id in 0..1000u64 {
        let len = rng.random_range(1..40);
        let mut traj = random_trajectory(&mut rng, len);
        let truth = rng.random::<bool>();
        let decision = label_oracle(truth, 0.2, &mut rng).unwrap();
        let before = traj.clone();
        let len_before = buf.len();
        let recorded = record_if_success(&mut traj, id, &decision, &mut buf, &cfg).unwrap();
        assert_eq!(recorded, decision.success);
        if decision.success {
            succeeded.insert(id);
            let last = before.reward_trace.per_step.len() - 1;
            assert_eq!(traj.reward_trace.per_step[last], before.reward_trace.per_step[last] + 100.0);
            assert_eq!(traj.reward_trace.per_step[..last], before.reward_trace.per_step[..last]);
            assert_eq!(buf.len(), len_before + traj.len());
            // A second positive label changes nothing.
            let again = traj.clone();
            assert!(!record_if_success(&mut traj, id, &label(true), &mut buf, &cfg).unwrap());
            assert_eq!(traj, again);
            assert_eq!(buf.len(), len_before + traj.len());
        } else {
            assert_eq!(traj, before);
            assert_eq!(buf.len(), len_before);
        }
    }
    assert!(succeeded.len() > 300 && succeeded.len() < 700);
    assert!(buf.iter().all(|p| succeeded.contains(&p.trajectory_id)));
}

#[test]
fn terminal_reward_gains_exactly_the_bonus() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut traj = random_trajectory(&mut rng, 5);
    *traj.reward_trace.per_step.last_mut().unwrap() = 0.8;
    let mut buf = SuccessBuffer::new(100).unwrap();
    record_if_success(&mut traj, 0, &label(true), &mut buf, &RewardConfig::default()).unwrap();
    assert_eq!(*traj.reward_trace.per_step.last().unwrap(), 100.8);
    assert!(traj.reward_trace.bonus_applied);
}

#[test]
fn full_buffer_keeps_the_latest_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut traj = random_trajectory(&mut rng, 12);
    let mut buf = SuccessBuffer::new(10).unwrap();
    record_if_success(&mut traj, 9, &label(true), &mut buf, &RewardConfig::default()).unwrap();
    assert_eq!(buf.len(), 10);
    let kept: Vec<Vec<f64>> = buf.iter().map(|p| p.state.clone()).collect();
    let want: Vec<Vec<f64>> = traj.observations[2..12].iter().map(observe).collect();
    assert_eq!(kept, want);
    assert_eq!(buf.iter().map(|p| &p.action).collect::<Vec<_>>(), traj.actions[2..].iter().collect::<Vec<_>>());
}

/// `a ~ N(w·s, exp(ℓ)²)` with parameters `(w, ℓ)`.
fn toy_policy(w: f64, log_std: f64) -> LinearGaussianPolicy {
    LinearGaussianPolicy::new(1, 1, vec![w], vec![log_std])
}

fn pair(s: f64, a: f64) -> SuccessPair {
    SuccessPair { trajectory_id: 0, state: vec![s], action: vec![a] }
}

#[test]
fn loss_examples() {
    let p = toy_policy(0.3, -0.2);
    assert_eq!(regularization_loss(&p, &[]).unwrap(), 0.0);
    // Density 1/2 at the mean: σ = 2 / sqrt(2π).
    let sigma = 2.0 / (2.0 * std::f64::consts::PI).sqrt();
    let half = toy_policy(1.0, sigma.ln());
    let one = regularization_loss(&half, &[pair(0.7, 0.7)]).unwrap();
    assert!((one - 2.0_f64.ln()).abs() < 1e-12);
    let two = regularization_loss(&half, &[pair(0.7, 0.7), pair(0.7, 0.7)]).unwrap();
    assert_eq!(two, 2.0 * one);
}

#[test]
fn combined_loss_arithmetic() {
    assert_eq!(combined_loss(2.0, 0.5, 1.0).unwrap(), 2.5);
    assert_eq!(combined_loss(2.0, 0.5, 0.0).unwrap(), 2.0);
    for (rl, reg) in [(0.1, 0.2), (-3.7, 1e-9), (1e6, 123.456)] {
        assert_eq!(combined_loss(rl, reg, 1.0).unwrap(), rl + reg);
    }
    assert!(combined_loss(1.0, 1.0, -0.1).is_err());
}

fn batch() -> Vec<SuccessPair> {
    vec![pair(0.5, 0.9), pair(-1.0, 0.1), pair(2.0, 1.5), pair(0.3, -0.4)]
}

#[test]
fn regularizer_gradient_matches_central_differences() {
    let b = batch();
    for (w, ls) in [(0.2, -0.3), (-0.7, 0.1), (1.3, -1.2)] {
        let p = toy_policy(w, ls);
        let mut g = vec![0.0; 2];
        regularization_grad(&p, &b, 1.0, &mut g).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut hi = p.params();
            let mut lo = p.params();
            hi[i] += h;
            lo[i] -= h;
            let (mut ph, mut pl) = (p.clone(), p.clone());
            ph.set_params(&hi);
            pl.set_params(&lo);
            let fd = (regularization_loss(&ph, &b).unwrap() - regularization_loss(&pl, &b).unwrap()) / (2.0 * h);
            let rel = (g[i] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-4, "param {i}: analytic {} vs fd {fd}", g[i]);
        }
    }
}

#[test]
fn one_small_step_raises_the_batch_log_likelihood() {
    let b = batch();
    let mut p = toy_policy(-0.4, 0.3);
    let before: f64 = b.iter().map(|q| p.log_prob(&q.state, &q.action)).sum();
    let mut g = vec![0.0; 2];
    regularization_grad(&p, &b, 1.0, &mut g).unwrap();
    let params: Vec<f64> = p.params().iter().zip(&g).map(|(x, d)| x - 1e-3 * d).collect();
    p.set_params(&params);
    let after: f64 = b.iter().map(|q| p.log_prob(&q.state, &q.action)).sum();
    assert!(after > before, "{before} -> {after}");
}
