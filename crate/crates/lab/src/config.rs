//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment line, keys are unique and
//! unknown keys are rejected. Lists are comma separated. Every key is listed
//! in `docs/config.md`.

use std::fmt::Write as _;
use std::str::FromStr;

use vlreward_core::decompose::DecomposeMode;
use vlreward_core::env::TaskId;
use vlreward_core::reward::RewardMode;
use vlreward_core::trainer::{Ablations, LabelerMode, TrainConfig};

use crate::error::{LabError, LabResult};

/// Reads `key = value` lines; duplicate keys and malformed lines are errors.
pub fn parse_pairs(text: &str) -> LabResult<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| LabError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(LabError::Config(format!("line {}: empty key", i + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(LabError::Config(format!("line {}: duplicate key `{k}`", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn typed<T: FromStr>(key: &str, v: &str) -> LabResult<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| LabError::Config(format!("`{key}`: cannot parse {v:?}: {e}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> LabResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| typed(key, s)).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// One entry of the ablation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ablation {
    NoSelfImitation,
    NoFailureGuidance,
    NoCot,
    LabelerNoise,
    BaselinesWithSelfImitation,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::NoSelfImitation,
        Ablation::NoFailureGuidance,
        Ablation::NoCot,
        Ablation::LabelerNoise,
        Ablation::BaselinesWithSelfImitation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::NoSelfImitation => "no_selfimitation",
            Ablation::NoFailureGuidance => "no_failure_guidance",
            Ablation::NoCot => "no_cot",
            Ablation::LabelerNoise => "labeler_noise",
            Ablation::BaselinesWithSelfImitation => "baselines_with_selfimitation",
        }
    }

    /// Whether the ablation is defined for `method`: the baselines variant
    /// only touches baselines, every other entry only the decomposed reward.
    pub fn applies_to(self, method: RewardMode) -> bool {
        match self {
            Ablation::BaselinesWithSelfImitation => method != RewardMode::Decomposed,
            _ => method == RewardMode::Decomposed,
        }
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| format!("unknown ablation {s:?}"))
    }
}

/// A run variant: the unmodified method or one ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    None,
    Ablated(Ablation),
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::None => "none",
            Variant::Ablated(a) => a.as_str(),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "none" {
            Ok(Variant::None)
        } else {
            s.parse().map(Variant::Ablated)
        }
    }
}

/// Success labeler used by self-imitation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseLabeler {
    GroundTruth,
    Vlm,
}

impl std::fmt::Display for BaseLabeler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BaseLabeler::GroundTruth => "ground_truth",
            BaseLabeler::Vlm => "vlm",
        })
    }
}

impl FromStr for BaseLabeler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ground_truth" => Ok(BaseLabeler::GroundTruth),
            "vlm" => Ok(BaseLabeler::Vlm),
            _ => Err(format!("unknown labeler {s:?}")),
        }
    }
}

/// Where a fixture comes from: compiled in, or a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixtureRef {
    Builtin,
    Path(std::path::PathBuf),
}

impl std::fmt::Display for FixtureRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FixtureRef::Builtin => f.write_str("builtin"),
            FixtureRef::Path(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for FixtureRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "" => Err("empty fixture reference".into()),
            "builtin" => Ok(FixtureRef::Builtin),
            p => Ok(FixtureRef::Path(p.into())),
        }
    }
}

/// The comparison and ablation matrix of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub tasks: Vec<TaskId>,
    pub methods: Vec<RewardMode>,
    pub ablations: Vec<Ablation>,
    /// Error rate used by the `labeler_noise` ablation.
    pub labeler_noise: f64,
    pub seeds: Vec<u64>,
    pub labeler: BaseLabeler,
    pub decompose_mode: DecomposeMode,
    /// Encoder backend; only `synthetic` ships.
    pub encoder: String,
    pub encoder_dim: usize,
    pub encoder_seed: u64,
    pub prompt_table: FixtureRef,
    pub decompositions: FixtureRef,
    pub failures: FixtureRef,
    pub dump_trajectories: bool,
    pub checkpoint: bool,
    /// Training settings shared by every run; `task`, `seed`, `labeler` and
    /// `ablations` are filled in per run.
    pub train: TrainConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "experiment".into(),
            tasks: vec![TaskId::DoorOpen],
            methods: vec![RewardMode::Decomposed],
            ablations: Vec::new(),
            labeler_noise: 0.2,
            seeds: vec![0, 1, 2],
            labeler: BaseLabeler::GroundTruth,
            decompose_mode: DecomposeMode::Fixture,
            encoder: "synthetic".into(),
            encoder_dim: vlreward_core::embedding::SyntheticEncoder::DEFAULT_DIM,
            encoder_seed: vlreward_core::embedding::SyntheticEncoder::DEFAULT_SEED,
            prompt_table: FixtureRef::Builtin,
            decompositions: FixtureRef::Builtin,
            failures: FixtureRef::Builtin,
            dump_trajectories: false,
            checkpoint: false,
            train: TrainConfig::default(),
        }
    }
}

/// One cell of the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunKey {
    pub task: TaskId,
    pub method: RewardMode,
    pub variant: Variant,
    pub seed: u64,
}

impl RunKey {
    /// Directory of the run relative to the experiment root.
    pub fn rel_dir(&self) -> std::path::PathBuf {
        ["runs", self.task.as_str(), self.method.as_str(), self.variant.as_str(), &format!("seed-{}", self.seed)]
            .iter()
            .collect()
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> LabResult<Self> {
        let mut spec = ExperimentSpec::default();
        for (k, v) in parse_pairs(text)? {
            spec.set(&k, &v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn set(&mut self, k: &str, v: &str) -> LabResult<()> {
        let t = &mut self.train;
        match k {
            "name" => self.name = v.to_string(),
            "tasks" => self.tasks = list(k, v)?,
            "methods" => self.methods = list(k, v)?,
            "ablations" => self.ablations = list(k, v)?,
            "labeler_noise" => self.labeler_noise = typed(k, v)?,
            "seeds" => self.seeds = list(k, v)?,
            "labeler" => self.labeler = typed(k, v)?,
            "decompose_mode" => self.decompose_mode = typed(k, v)?,
            "encoder" => self.encoder = v.to_string(),
            "encoder_dim" => self.encoder_dim = typed(k, v)?,
            "encoder_seed" => self.encoder_seed = typed(k, v)?,
            "prompt_table" => self.prompt_table = typed(k, v)?,
            "decompositions" => self.decompositions = typed(k, v)?,
            "failures" => self.failures = typed(k, v)?,
            "dump_trajectories" => self.dump_trajectories = typed(k, v)?,
            "checkpoint" => self.checkpoint = typed(k, v)?,
            "tau" => t.reward.tau = typed(k, v)?,
            "window" => t.reward.window = typed(k, v)?,
            "stride" => t.reward.stride = typed(k, v)?,
            "success_bonus" => t.reward.success_bonus = typed(k, v)?,
            "gamma" => t.gamma = typed(k, v)?,
            "gae_lambda" => t.gae_lambda = typed(k, v)?,
            "lambda_reg" => t.lambda_reg = typed(k, v)?,
            "total_env_steps" => t.total_env_steps = typed(k, v)?,
            "eval_episodes" => t.eval_episodes = typed(k, v)?,
            "eval_interval" => t.eval_interval = typed(k, v)?,
            "buffer_capacity" => t.buffer_capacity = typed(k, v)?,
            "rollout_steps" => t.rollout_steps = typed(k, v)?,
            "epochs" => t.epochs = typed(k, v)?,
            "minibatch" => t.minibatch = typed(k, v)?,
            "actor_lr" => t.actor_lr = typed(k, v)?,
            "critic_lr" => t.critic_lr = typed(k, v)?,
            "clip_ratio" => t.clip_ratio = typed(k, v)?,
            "max_grad_norm" => t.max_grad_norm = typed(k, v)?,
            "hidden" => t.hidden = typed(k, v)?,
            "init_log_std" => t.init_log_std = typed(k, v)?,
            "entropy_coef" => t.entropy_coef = typed(k, v)?,
            _ => return Err(LabError::Config(format!("unknown key `{k}`"))),
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` reproduces the spec.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", self.name.clone());
        kv("tasks", join(&self.tasks));
        kv("methods", join(&self.methods));
        kv("ablations", join(&self.ablations));
        kv("labeler_noise", self.labeler_noise.to_string());
        kv("seeds", join(&self.seeds));
        kv("labeler", self.labeler.to_string());
        kv("decompose_mode", self.decompose_mode.to_string());
        kv("encoder", self.encoder.clone());
        kv("encoder_dim", self.encoder_dim.to_string());
        kv("encoder_seed", self.encoder_seed.to_string());
        kv("prompt_table", self.prompt_table.to_string());
        kv("decompositions", self.decompositions.to_string());
        kv("failures", self.failures.to_string());
        kv("dump_trajectories", self.dump_trajectories.to_string());
        kv("checkpoint", self.checkpoint.to_string());
        kv("tau", t.reward.tau.to_string());
        kv("window", t.reward.window.to_string());
        kv("stride", t.reward.stride.to_string());
        kv("success_bonus", t.reward.success_bonus.to_string());
        kv("gamma", t.gamma.to_string());
        kv("gae_lambda", t.gae_lambda.to_string());
        kv("lambda_reg", t.lambda_reg.to_string());
        kv("total_env_steps", t.total_env_steps.to_string());
        kv("eval_episodes", t.eval_episodes.to_string());
        kv("eval_interval", t.eval_interval.to_string());
        kv("buffer_capacity", t.buffer_capacity.to_string());
        kv("rollout_steps", t.rollout_steps.to_string());
        kv("epochs", t.epochs.to_string());
        kv("minibatch", t.minibatch.to_string());
        kv("actor_lr", t.actor_lr.to_string());
        kv("critic_lr", t.critic_lr.to_string());
        kv("clip_ratio", t.clip_ratio.to_string());
        kv("max_grad_norm", t.max_grad_norm.to_string());
        kv("hidden", t.hidden.to_string());
        kv("init_log_std", t.init_log_std.to_string());
        kv("entropy_coef", t.entropy_coef.to_string());
        s
    }

    pub fn validate(&self) -> LabResult<()> {
        let bad = |m: &str| Err(LabError::Config(m.to_string()));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be nonempty and contain no path separators");
        }
        if self.tasks.is_empty() || self.methods.is_empty() || self.seeds.is_empty() {
            return bad("tasks, methods and seeds must be nonempty");
        }
        for (what, dup) in [
            ("tasks", has_dup(&self.tasks)),
            ("methods", has_dup(&self.methods)),
            ("ablations", has_dup(&self.ablations)),
            ("seeds", has_dup(&self.seeds)),
        ] {
            if dup {
                return bad(&format!("{what} contains duplicates"));
            }
        }
        if !(0.0..0.5).contains(&self.labeler_noise) {
            return bad("labeler_noise must lie in [0, 0.5)");
        }
        if self.encoder != "synthetic" {
            return bad(&format!("unknown encoder backend {:?} (available: synthetic)", self.encoder));
        }
        if self.encoder_dim == 0 {
            return bad("encoder_dim must be positive");
        }
        self.train.validate()?;
        Ok(())
    }

    /// All runs of the matrix in a stable order. Ablations that do not apply
    /// to a method are skipped for it.
    pub fn runs(&self) -> Vec<RunKey> {
        let mut out = Vec::new();
        for &task in &self.tasks {
            for &method in &self.methods {
                let variants = std::iter::once(Variant::None)
                    .chain(self.ablations.iter().filter(|a| a.applies_to(method)).map(|&a| Variant::Ablated(a)));
                for variant in variants {
                    for &seed in &self.seeds {
                        out.push(RunKey { task, method, variant, seed });
                    }
                }
            }
        }
        out
    }

    /// Training configuration of one run.
    ///
    /// Baselines train without self-imitation unless granted it by the
    /// `baselines_with_selfimitation` variant.
    pub fn train_config(&self, key: &RunKey) -> TrainConfig {
        let mut cfg = self.train.clone();
        cfg.task = key.task;
        cfg.seed = key.seed;
        cfg.reward.reward_mode = key.method;
        cfg.labeler = match self.labeler {
            BaseLabeler::GroundTruth => LabelerMode::GroundTruth,
            BaseLabeler::Vlm => LabelerMode::Vlm,
        };
        cfg.ablations = Ablations { no_selfimitation: key.method != RewardMode::Decomposed, ..Ablations::default() };
        match key.variant {
            Variant::None => {}
            Variant::Ablated(Ablation::NoSelfImitation) => cfg.ablations.no_selfimitation = true,
            Variant::Ablated(Ablation::NoFailureGuidance) => cfg.ablations.no_failure_guidance = true,
            Variant::Ablated(Ablation::NoCot) => cfg.ablations.no_cot = true,
            Variant::Ablated(Ablation::LabelerNoise) => cfg.labeler = LabelerMode::Noised(self.labeler_noise),
            Variant::Ablated(Ablation::BaselinesWithSelfImitation) => cfg.ablations.no_selfimitation = false,
        }
        cfg
    }
}

fn has_dup<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().any(|(i, x)| v[..i].contains(x))
}

/// Resolved per-run configuration in the same flat format.
pub fn train_config_text(cfg: &TrainConfig) -> String {
    let labeler = match cfg.labeler {
        LabelerMode::GroundTruth => "ground_truth".to_string(),
        LabelerMode::Noised(e) => format!("noised:{e}"),
        LabelerMode::Vlm => "vlm".to_string(),
    };
    let r = &cfg.reward;
    let a = &cfg.ablations;
    [
        ("task", cfg.task.to_string()),
        ("seed", cfg.seed.to_string()),
        ("reward_mode", r.reward_mode.to_string()),
        ("tau", r.tau.to_string()),
        ("window", r.window.to_string()),
        ("stride", r.stride.to_string()),
        ("success_bonus", r.success_bonus.to_string()),
        ("labeler", labeler),
        ("no_selfimitation", a.no_selfimitation.to_string()),
        ("no_failure_guidance", a.no_failure_guidance.to_string()),
        ("no_cot", a.no_cot.to_string()),
        ("gamma", cfg.gamma.to_string()),
        ("gae_lambda", cfg.gae_lambda.to_string()),
        ("lambda_reg", cfg.lambda_reg.to_string()),
        ("effective_lambda", cfg.effective_lambda().to_string()),
        ("total_env_steps", cfg.total_env_steps.to_string()),
        ("eval_episodes", cfg.eval_episodes.to_string()),
        ("eval_interval", cfg.eval_interval.to_string()),
        ("buffer_capacity", cfg.buffer_capacity.to_string()),
        ("rollout_steps", cfg.rollout_steps.to_string()),
        ("epochs", cfg.epochs.to_string()),
        ("minibatch", cfg.minibatch.to_string()),
        ("actor_lr", cfg.actor_lr.to_string()),
        ("critic_lr", cfg.critic_lr.to_string()),
        ("clip_ratio", cfg.clip_ratio.to_string()),
        ("max_grad_norm", cfg.max_grad_norm.to_string()),
        ("hidden", cfg.hidden.to_string()),
        ("init_log_std", cfg.init_log_std.to_string()),
        ("entropy_coef", cfg.entropy_coef.to_string()),
    ]
    .iter()
    .map(|(k, v)| format!("{k} = {v}\n"))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        assert!(matches!(ExperimentSpec::parse("colour = blue\n"), Err(LabError::Config(_))));
        assert!(matches!(ExperimentSpec::parse("seeds = 1\nseeds = 2\n"), Err(LabError::Config(_))));
        assert!(matches!(ExperimentSpec::parse("just words\n"), Err(LabError::Config(_))));
        assert!(matches!(ExperimentSpec::parse("tau = hot\n"), Err(LabError::Config(_))));
    }

    #[test]
    fn defaults_and_comments() {
        let spec = ExperimentSpec::parse("# nothing but a comment\n\n").unwrap();
        assert_eq!(spec, ExperimentSpec::default());
        assert_eq!(spec.train.eval_episodes, 20);
        assert_eq!(spec.train.lambda_reg, 1.0);
        assert_eq!(spec.seeds.len(), 3);
    }

    #[test]
    fn round_trip_is_identity() {
        let text = "name = t\ntasks = door-open, drawer-open\nmethods = decomposed,single_prompt\n\
                    ablations = no_cot,labeler_noise\nlabeler_noise = 0.15\nseeds = 4,5\ntau = 0.07\n\
                    actor_lr = 0.0003\nprompt_table = /tmp/p.tsv\n";
        let spec = ExperimentSpec::parse(text).unwrap();
        let again = ExperimentSpec::parse(&spec.to_text()).unwrap();
        assert_eq!(spec, again);
        assert_eq!(spec.to_text(), again.to_text());
        assert_eq!(again.prompt_table, FixtureRef::Path("/tmp/p.tsv".into()));
    }

    #[test]
    fn matrix_respects_applicability() {
        let spec = ExperimentSpec::parse(
            "tasks = door-open\nmethods = decomposed,final_segment\nseeds = 0\n\
             ablations = no_cot,baselines_with_selfimitation\n",
        )
        .unwrap();
        let runs: Vec<_> = spec.runs().iter().map(|k| (k.method, k.variant)).collect();
        assert_eq!(
            runs,
            vec![
                (RewardMode::Decomposed, Variant::None),
                (RewardMode::Decomposed, Variant::Ablated(Ablation::NoCot)),
                (RewardMode::FinalSegment, Variant::None),
                (RewardMode::FinalSegment, Variant::Ablated(Ablation::BaselinesWithSelfImitation)),
            ]
        );
    }

    #[test]
    fn each_ablation_is_one_mutation() {
        let spec = ExperimentSpec::default();
        let key = |method, variant| RunKey { task: TaskId::DoorOpen, method, variant, seed: 0 };
        let full = spec.train_config(&key(RewardMode::Decomposed, Variant::None));
        assert!(full.self_imitation());
        let base = spec.train_config(&key(RewardMode::SinglePrompt, Variant::None));
        assert!(!base.self_imitation());
        let granted =
            spec.train_config(&key(RewardMode::SinglePrompt, Variant::Ablated(Ablation::BaselinesWithSelfImitation)));
        assert!(granted.self_imitation());
        for a in [Ablation::NoSelfImitation, Ablation::NoFailureGuidance, Ablation::NoCot, Ablation::LabelerNoise] {
            let c = spec.train_config(&key(RewardMode::Decomposed, Variant::Ablated(a)));
            let changed = [
                c.ablations.no_selfimitation != full.ablations.no_selfimitation,
                c.ablations.no_failure_guidance != full.ablations.no_failure_guidance,
                c.ablations.no_cot != full.ablations.no_cot,
                c.labeler != full.labeler,
            ];
            assert_eq!(changed.iter().filter(|&&x| x).count(), 1, "{a}");
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in ["tasks =\n", "labeler_noise = 0.5\n", "stride = 32\n", "encoder = clip\n", "seeds = 1,1\n"] {
            assert!(ExperimentSpec::parse(text).is_err(), "{text}");
        }
    }
}
