//! The learning loop: roll out, score with the selected reward, label and
//! self-imitate, then update a clipped-surrogate actor-critic whose actor loss
//! carries the `λ · −log π(a|s)` imitation term.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{Encoder, FrameFeature};
use crate::env::{observe, Environment, TaskId, Trajectory, ACTION_DIM, HORIZON, OBS_DIM};
use crate::error::{invalid, Error, Result};
use crate::label::{label_oracle, label_vlm, LabelDecision, LabelSource, VisionClient};
use crate::nn::{clip_grad_norm, Adam, Mlp};
use crate::policy::{Critic, GaussianMlpPolicy, MlpCritic, Policy};
use crate::reward::{compute_trace, PromptSet, RewardConfig};
use crate::selfimitate::{combined_loss, record_if_success, regularization_grad, SuccessBuffer, SuccessPair};

/// Which labeler feeds self-imitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelerMode {
    /// Environment success predicate.
    GroundTruth,
    /// Ground truth flipped with the given probability.
    Noised(f64),
    /// External vision-language model.
    Vlm,
}

/// Components removed for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ablations {
    /// No labeling, no terminal bonus, no imitation term.
    pub no_selfimitation: bool,
    /// Failure prompts dropped from the prompt set.
    pub no_failure_guidance: bool,
    /// Sub-goal prompts replaced by the coarse instruction.
    pub no_cot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: TaskId,
    pub seed: u64,
    pub reward: RewardConfig,
    /// Discount factor.
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Weight of the imitation term.
    pub lambda_reg: f64,
    pub total_env_steps: usize,
    pub eval_episodes: usize,
    /// Environment steps between evaluations.
    pub eval_interval: usize,
    pub labeler: LabelerMode,
    pub ablations: Ablations,
    pub buffer_capacity: usize,
    /// Environment steps collected per policy iteration.
    pub rollout_steps: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub clip_ratio: f64,
    pub max_grad_norm: f64,
    pub hidden: usize,
    pub init_log_std: f64,
    /// Weight of the entropy bonus in the actor loss.
    pub entropy_coef: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: TaskId::DoorOpen,
            seed: 0,
            reward: RewardConfig::default(),
            gamma: 0.95,
            gae_lambda: 0.95,
            lambda_reg: 1.0,
            total_env_steps: 200_000,
            eval_episodes: 20,
            eval_interval: 10_000,
            labeler: LabelerMode::GroundTruth,
            ablations: Ablations::default(),
            buffer_capacity: SuccessBuffer::DEFAULT_CAPACITY,
            rollout_steps: 2_000,
            epochs: 4,
            minibatch: 250,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            clip_ratio: 0.2,
            max_grad_norm: 1.0,
            hidden: 32,
            init_log_std: -0.5,
            entropy_coef: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.reward.validate()?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(invalid("gae_lambda must lie in [0, 1]"));
        }
        if !(self.lambda_reg >= 0.0) {
            return Err(invalid("lambda_reg must be non-negative"));
        }
        if self.eval_episodes == 0 {
            return Err(invalid("eval_episodes must be at least 1"));
        }
        if self.rollout_steps == 0 || self.minibatch == 0 || self.epochs == 0 || self.hidden == 0 {
            return Err(invalid("rollout_steps, minibatch, epochs and hidden must be positive"));
        }
        if self.eval_interval == 0 || self.buffer_capacity == 0 {
            return Err(invalid("eval_interval and buffer_capacity must be positive"));
        }
        if let LabelerMode::Noised(e) = self.labeler {
            if !(0.0..0.5).contains(&e) {
                return Err(invalid("labeler error rate must lie in [0, 0.5)"));
            }
        }
        Ok(())
    }

    pub fn self_imitation(&self) -> bool {
        !self.ablations.no_selfimitation
    }

    /// Imitation weight after ablations.
    pub fn effective_lambda(&self) -> f64 {
        if self.ablations.no_selfimitation {
            0.0
        } else {
            self.lambda_reg
        }
    }

    /// Applies the prompt ablations.
    pub fn effective_prompts(&self, prompts: &PromptSet) -> Result<PromptSet> {
        let mut p = prompts.clone();
        if self.ablations.no_cot {
            p = p.collapsed_to_coarse()?;
        }
        if self.ablations.no_failure_guidance {
            p = p.without_negatives();
        }
        Ok(p)
    }
}

/// Decides whether a finished episode succeeded.
pub trait Labeler {
    fn label(&mut self, env: &dyn Environment, final_frame: &FrameFeature) -> Result<LabelDecision>;
}

/// Ground-truth labeler with optional symmetric noise, drawing from its own
/// random stream.
#[derive(Debug, Clone)]
pub struct OracleLabeler {
    error_rate: Option<f64>,
    rng: ChaCha8Rng,
}

impl OracleLabeler {
    pub fn ground_truth() -> Self {
        OracleLabeler { error_rate: None, rng: ChaCha8Rng::seed_from_u64(0) }
    }

    pub fn noised(error_rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&error_rate) {
            return Err(invalid("error rate must lie in [0, 0.5)"));
        }
        Ok(OracleLabeler { error_rate: Some(error_rate), rng: ChaCha8Rng::seed_from_u64(seed ^ LABEL_SALT) })
    }
}

impl Labeler for OracleLabeler {
    fn label(&mut self, env: &dyn Environment, _final_frame: &FrameFeature) -> Result<LabelDecision> {
        let truth = env.ground_truth_success();
        match self.error_rate {
            None => Ok(LabelDecision { success: truth, source: LabelSource::Oracle, raw_response: None }),
            Some(e) => label_oracle(truth, e, &mut self.rng),
        }
    }
}

/// Labeler backed by a vision-language model.
pub struct VlmLabeler<C> {
    pub client: C,
    pub context_prompt: String,
    pub query: String,
}

impl<C: VisionClient> Labeler for VlmLabeler<C> {
    fn label(&mut self, _env: &dyn Environment, final_frame: &FrameFeature) -> Result<LabelDecision> {
        label_vlm(final_frame, &self.context_prompt, &self.query, None, &mut self.client)
    }
}

/// One labeling outcome, for audit logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub trajectory_id: u64,
    pub decision: Option<LabelDecision>,
    /// Error text when the trajectory stayed unlabeled.
    pub error: Option<String>,
}

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub env_steps: usize,
    pub eval_success_rate: f64,
    pub rl_loss: f64,
    pub reg_loss: f64,
    pub buffer_size: usize,
    pub labeler_positives: usize,
}

/// Loss components of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Losses {
    pub rl_loss: f64,
    pub reg_loss: f64,
    pub critic_loss: f64,
    pub total: f64,
}

/// A transition prepared for the policy update.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub value_target: f64,
}

/// Hyper-parameters of [`update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateParams {
    pub lambda: f64,
    pub clip_ratio: f64,
    pub max_grad_norm: f64,
    pub entropy_coef: f64,
}

/// Optimizer state of the learner.
#[derive(Debug, Clone)]
pub struct Learner {
    pub policy: GaussianMlpPolicy,
    pub critic: MlpCritic,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

impl Learner {
    pub fn new(cfg: &TrainConfig, rng: &mut dyn RngCore) -> Self {
        let h = cfg.hidden;
        let policy = GaussianMlpPolicy::new(Mlp::new(&[OBS_DIM, h, h, ACTION_DIM], 0.01, rng), cfg.init_log_std);
        let critic = MlpCritic { net: Mlp::new(&[OBS_DIM, h, h, 1], 1.0, rng) };
        let actor_opt = Adam::new(policy.num_params(), cfg.actor_lr);
        let critic_opt = Adam::new(critic.num_params(), cfg.critic_lr);
        Learner { policy, critic, actor_opt, critic_opt }
    }
}

/// One gradient step on the critic (squared error to the value targets) and
/// on the actor (clipped surrogate plus `λ` times the mean imitation term).
pub fn update<P: Policy + ?Sized, C: Critic + ?Sized>(
    policy: &mut P,
    critic: &mut C,
    actor_opt: &mut Adam,
    critic_opt: &mut Adam,
    batch: &[Sample],
    reg_batch: &[SuccessPair],
    hp: &UpdateParams,
) -> Result<Losses> {
    if batch.is_empty() {
        return Err(invalid("empty update batch"));
    }
    let n = batch.len() as f64;
    let mut grad = vec![0.0; policy.num_params()];
    let mut rl_loss = 0.0;
    for s in batch {
        let mut obj = 0.0;
        policy.accumulate_log_prob_grad_by(
            &s.state,
            &s.action,
            &mut |lp| {
                let ratio = libm::exp(lp - s.old_log_prob);
                let clipped = ratio.clamp(1.0 - hp.clip_ratio, 1.0 + hp.clip_ratio);
                let (unclipped_obj, clipped_obj) = (ratio * s.advantage, clipped * s.advantage);
                obj = unclipped_obj.min(clipped_obj);
                // d(-ratio*A)/dθ = -A * ratio * dlogπ/dθ; zero where the clip is active
                if unclipped_obj <= clipped_obj {
                    -s.advantage * ratio / n
                } else {
                    0.0
                }
            },
            &mut grad,
        );
        rl_loss -= obj / n;
    }
    let mut reg_loss = 0.0;
    if hp.lambda > 0.0 && !reg_batch.is_empty() {
        let m = reg_batch.len() as f64;
        reg_loss = regularization_grad(policy, reg_batch, hp.lambda / m, &mut grad)? / m;
    }
    if hp.entropy_coef > 0.0 {
        let h = policy.accumulate_entropy_grad(-hp.entropy_coef, &mut grad);
        rl_loss -= hp.entropy_coef * h;
    }
    let total = combined_loss(rl_loss, reg_loss, hp.lambda)?;
    if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::AbortRun(format!("non-finite actor loss (rl {rl_loss}, reg {reg_loss})")));
    }
    clip_grad_norm(&mut grad, hp.max_grad_norm);
    let mut params = policy.params();
    actor_opt.step(&mut params, &grad);
    policy.set_params(&params);

    let mut cgrad = vec![0.0; critic.num_params()];
    let mut critic_loss = 0.0;
    for s in batch {
        critic.accumulate_value_grad_by(
            &s.state,
            &mut |v| {
                let err = v - s.value_target;
                critic_loss += 0.5 * err * err / n;
                err / n
            },
            &mut cgrad,
        );
    }
    if !critic_loss.is_finite() {
        return Err(Error::AbortRun(format!("non-finite critic loss {critic_loss}")));
    }
    clip_grad_norm(&mut cgrad, hp.max_grad_norm);
    critic_opt.step(critic.params_mut(), &cgrad);
    Ok(Losses { rl_loss, reg_loss, critic_loss, total })
}

/// Generalized advantage estimates and value targets for one trajectory.
///
/// `rewards[t]` is the reward of transition `t`; `values` holds `V(o_0..=o_T)`.
/// A `terminated` episode does not bootstrap from its last observation.
pub fn advantages(rewards: &[f64], values: &[f64], terminated: bool, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let t_len = rewards.len();
    assert_eq!(values.len(), t_len + 1);
    let mut adv = vec![0.0; t_len];
    let mut next = 0.0;
    for t in (0..t_len).rev() {
        let last = t + 1 == t_len;
        let boot = if last && terminated { 0.0 } else { values[t + 1] };
        let delta = rewards[t] + gamma * boot - values[t];
        next = delta + if last { 0.0 } else { gamma * lambda * next };
        adv[t] = next;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, targets)
}

/// A rollout together with its bookkeeping.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub trajectory: Trajectory,
    pub log_probs: Vec<f64>,
    /// Ended by the environment before the horizon.
    pub terminated: bool,
}

/// Runs one episode with actions sampled from `policy` and scores it with
/// the configured reward. Ground truth is not consulted.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollout<P: Policy + ?Sized, E: Encoder + ?Sized>(
    env: &mut dyn Environment,
    policy: &P,
    prompts: &PromptSet,
    reward: &RewardConfig,
    encoder: &E,
    episode_seed: u64,
    rng: &mut dyn RngCore,
) -> Result<Rollout> {
    let first = env.reset(episode_seed);
    let mut traj = Trajectory { observations: vec![env.state().clone()], frames: vec![first], ..Default::default() };
    let mut log_probs = Vec::new();
    let mut done = false;
    while !done {
        let obs = observe(env.state());
        let action = policy.sample(&obs, rng);
        log_probs.push(policy.log_prob(&obs, &action));
        let (frame, d) = env.step(&action);
        done = d;
        traj.actions.push(action);
        traj.observations.push(env.state().clone());
        traj.frames.push(frame);
    }
    traj.reward_trace = compute_trace(&traj.frames, prompts, reward, encoder)?;
    let terminated = traj.len() < HORIZON;
    Ok(Rollout { trajectory: traj, log_probs, terminated })
}

/// Fraction of `episodes` rollouts, with actions sampled from `policy`, whose
/// final state satisfies the ground-truth success predicate. Episode layouts
/// and action noise both derive from `seed`, so repeated calls agree.
pub fn evaluate<P: Policy + ?Sized>(policy: &P, env: &mut dyn Environment, episodes: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ EVAL_SALT, u64::MAX));
    evaluate_with(&mut |s: &[f64]| policy.sample(s, &mut rng), env, episodes, seed)
}

/// [`evaluate`] for an arbitrary state-to-action controller.
pub fn evaluate_with(
    act: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    env: &mut dyn Environment,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    if episodes == 0 {
        return Err(invalid("need at least one evaluation episode"));
    }
    let mut wins = 0usize;
    for i in 0..episodes {
        env.reset(eval_seed(seed, i as u64));
        loop {
            let (_, done) = env.step(&act(&observe(env.state())));
            if done {
                break;
            }
        }
        if env.ground_truth_success() {
            wins += 1;
        }
    }
    Ok(wins as f64 / episodes as f64)
}

const EVAL_SALT: u64 = 0xe7a1_0000_0000_0000;
const LABEL_SALT: u64 = 0x1abe_1000_0000_0000;

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_add(0x632b_e59b_d9b3_e37f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn train_seed(run_seed: u64, episode: u64) -> u64 {
    mix(run_seed, episode)
}

pub fn eval_seed(run_seed: u64, episode: u64) -> u64 {
    mix(run_seed ^ EVAL_SALT, episode)
}

/// Final state of a run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub learner: Learner,
    pub buffer: SuccessBuffer,
    pub metrics: Vec<MetricsRow>,
    pub unlabeled: usize,
}

/// Callbacks invoked while training.
pub trait TrainObserver {
    fn on_metrics(&mut self, _row: &MetricsRow) {}
    fn on_label(&mut self, _record: &LabelRecord) {}
    fn on_trajectory(&mut self, _id: u64, _traj: &Trajectory) {}
}

impl TrainObserver for () {}

/// Trains one `(task, configuration, seed)` run.
///
/// `env` is used for data collection and is only asked for ground truth by
/// `labeler`; `eval_env` serves the evaluations. With self-imitation ablated
/// the labeler is never invoked.
#[allow(clippy::too_many_arguments)]
pub fn train<E: Encoder + ?Sized>(
    cfg: &TrainConfig,
    prompts: &PromptSet,
    encoder: &E,
    env: &mut dyn Environment,
    eval_env: &mut dyn Environment,
    mut labeler: Option<&mut dyn Labeler>,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let prompts = cfg.effective_prompts(prompts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut learner = Learner::new(cfg, &mut rng);
    let mut buffer = SuccessBuffer::new(cfg.buffer_capacity)?;
    let hp = UpdateParams {
        lambda: cfg.effective_lambda(),
        clip_ratio: cfg.clip_ratio,
        max_grad_norm: cfg.max_grad_norm,
        entropy_coef: cfg.entropy_coef,
    };
    if !cfg.self_imitation() {
        labeler = None;
    } else if labeler.is_none() {
        return Err(invalid("self-imitation needs a labeler"));
    }

    let mut metrics = Vec::new();
    let mut env_steps = 0usize;
    let mut episode = 0u64;
    let mut positives = 0usize;
    let mut unlabeled = 0usize;
    let mut next_eval = cfg.eval_interval.min(cfg.total_env_steps);
    let mut last = Losses::default();

    while env_steps < cfg.total_env_steps {
        let mut samples: Vec<Sample> = Vec::with_capacity(cfg.rollout_steps + HORIZON);
        while samples.len() < cfg.rollout_steps && env_steps < cfg.total_env_steps {
            let id = episode;
            let mut ro = collect_rollout(
                env,
                &learner.policy,
                &prompts,
                &cfg.reward,
                encoder,
                train_seed(cfg.seed, id),
                &mut rng,
            )?;
            episode += 1;
            env_steps += ro.trajectory.len();

            if let Some(lab) = labeler.as_deref_mut() {
                let final_frame = ro.trajectory.frames.last().expect("nonempty").clone();
                let record = match lab.label(&*env, &final_frame) {
                    Ok(decision) => {
                        if decision.success {
                            positives += 1;
                        }
                        record_if_success(&mut ro.trajectory, id, &decision, &mut buffer, &cfg.reward)?;
                        LabelRecord { trajectory_id: id, decision: Some(decision), error: None }
                    }
                    Err(e @ (Error::Parse { .. } | Error::Transport(_))) => {
                        unlabeled += 1;
                        LabelRecord { trajectory_id: id, decision: None, error: Some(format!("{e}")) }
                    }
                    Err(e) => return Err(e),
                };
                observer.on_label(&record);
            }
            observer.on_trajectory(id, &ro.trajectory);

            let traj = &ro.trajectory;
            let states: Vec<Vec<f64>> = traj.observations.iter().map(observe).collect();
            let values: Vec<f64> = states.iter().map(|s| learner.critic.value(s)).collect();
            let rewards = &traj.reward_trace.per_step[1..];
            let (adv, targets) = advantages(rewards, &values, ro.terminated, cfg.gamma, cfg.gae_lambda);
            for t in 0..traj.len() {
                samples.push(Sample {
                    state: states[t].clone(),
                    action: traj.actions[t].clone(),
                    old_log_prob: ro.log_probs[t],
                    advantage: adv[t],
                    value_target: targets[t],
                });
            }
        }

        normalize_advantages(&mut samples);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.minibatch) {
                let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
                let reg_batch = if hp.lambda > 0.0 { buffer.sample(batch.len(), &mut rng) } else { Vec::new() };
                let Learner { policy, critic, actor_opt, critic_opt } = &mut learner;
                last = update(policy, critic, actor_opt, critic_opt, &batch, &reg_batch, &hp)?;
            }
        }

        while env_steps >= next_eval && next_eval > 0 {
            let rate = evaluate(&learner.policy, eval_env, cfg.eval_episodes, cfg.seed)?;
            let row = MetricsRow {
                env_steps: next_eval,
                eval_success_rate: rate,
                rl_loss: last.rl_loss,
                reg_loss: last.reg_loss,
                buffer_size: buffer.len(),
                labeler_positives: positives,
            };
            observer.on_metrics(&row);
            metrics.push(row);
            if next_eval >= cfg.total_env_steps {
                next_eval = 0;
            } else {
                next_eval = (next_eval + cfg.eval_interval).min(cfg.total_env_steps);
            }
        }
    }
    Ok(TrainOutcome { learner, buffer, metrics, unlabeled })
}

fn normalize_advantages(samples: &mut [Sample]) {
    if samples.len() < 2 {
        return;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean) * (s.advantage - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var) + 1e-8;
    for s in samples {
        s.advantage = (s.advantage - mean) / std;
    }
}

/// Boxed labeler for a configuration; the VLM labeler needs a client and is
/// built by the caller instead.
pub fn oracle_labeler(cfg: &TrainConfig) -> Option<Box<dyn Labeler>> {
    match cfg.labeler {
        LabelerMode::GroundTruth => Some(Box::new(OracleLabeler::ground_truth())),
        LabelerMode::Noised(e) => OracleLabeler::noised(e, cfg.seed).ok().map(|l| Box::new(l) as Box<dyn Labeler>),
        LabelerMode::Vlm => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_bad_values_are_not() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { gamma: 1.0, ..TrainConfig::default() },
            TrainConfig { lambda_reg: -1.0, ..TrainConfig::default() },
            TrainConfig { eval_episodes: 0, ..TrainConfig::default() },
            TrainConfig { minibatch: 0, ..TrainConfig::default() },
            TrainConfig { labeler: LabelerMode::Noised(0.5), ..TrainConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn seed_streams_are_disjoint() {
        let train: Vec<u64> = (0..100).map(|i| train_seed(7, i)).collect();
        let eval: Vec<u64> = (0..100).map(|i| eval_seed(7, i)).collect();
        assert!(train.iter().all(|s| !eval.contains(s)));
        assert_ne!(train_seed(7, 0), train_seed(8, 0));
    }

    #[test]
    fn advantages_are_standardized() {
        let mut s: Vec<Sample> = [1.0, 2.0, 3.0, 6.0]
            .iter()
            .map(|a| Sample { state: vec![], action: vec![], old_log_prob: 0.0, advantage: *a, value_target: 0.0 })
            .collect();
        normalize_advantages(&mut s);
        let m: f64 = s.iter().map(|x| x.advantage).sum::<f64>() / 4.0;
        let v: f64 = s.iter().map(|x| x.advantage * x.advantage).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn self_imitation_without_labeler_is_refused() {
        let cfg = TrainConfig { total_env_steps: 10, ..TrainConfig::default() };
        let enc =
            crate::embedding::SyntheticEncoder::with_table(alloc::vec![("open the door".into(), "door-open".into())])
                .unwrap();
        let z = enc.encode_text("open the door").unwrap();
        let prompts = PromptSet::new(alloc::vec![("open the door".into(), z)], Vec::new(), None).unwrap();
        let mut env = crate::env::ToyEnv::new(TaskId::DoorOpen);
        let mut eval = crate::env::ToyEnv::new(TaskId::DoorOpen);
        let r = train(&cfg, &prompts, &enc, &mut env, &mut eval, None, &mut ());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn losses_blow_up_into_abort() {
        let cfg = TrainConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let Learner { mut policy, mut critic, mut actor_opt, mut critic_opt } = Learner::new(&cfg, &mut rng);
        let batch = alloc::vec![Sample {
            state: alloc::vec![f64::NAN; OBS_DIM],
            action: alloc::vec![0.0; ACTION_DIM],
            old_log_prob: 0.0,
            advantage: 1.0,
            value_target: 0.0,
        }];
        let hp = UpdateParams { lambda: 1.0, clip_ratio: 0.2, max_grad_norm: 1.0, entropy_coef: 0.0 };
        let r = update(&mut policy, &mut critic, &mut actor_opt, &mut critic_opt, &batch, &[], &hp);
        assert!(matches!(r, Err(Error::AbortRun(_))));
    }
}
