//! Runs an experiment matrix into a run directory.
//!
//! Layout (version [`LAYOUT_VERSION`]):
//!
//! ```text
//! <out>/<name>/
//!   LAYOUT                      layout version
//!   spec.conf                   resolved experiment configuration
//!   revision.txt                code revision stamp
//!   summary.md, summary.json    written by `summarize`
//!   runs/<task>/<method>/<ablation>/seed-<n>/
//!     config.conf               resolved training configuration
//!     metrics.csv               one row per evaluation
//!     labels.jsonl              label audit log (self-imitation runs)
//!     trajectories.jsonl        optional trajectory dump
//!     buffer.ckpt, policy.json, critic.json   optional checkpoints
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use vlreward_core::decompose::{build_prompt_set, decompose, DecomposeMode, LlmClient, SubgoalDecomposition};
use vlreward_core::embedding::{parse_prompt_table, Encoder, SyntheticEncoder};
use vlreward_core::env::{TaskId, ToyEnv, Trajectory};
use vlreward_core::label::{success_condition, vlm_context_prompt, VisionClient, VLM_QUERY};
use vlreward_core::reward::PromptSet;
use vlreward_core::trainer::{
    train, LabelRecord, Labeler, LabelerMode, MetricsRow, OracleLabeler, TrainConfig, TrainObserver, TrainOutcome,
    VlmLabeler,
};

use crate::audit::{write_jsonl, LabelLogLine, TrajectoryLine};
use crate::checkpoint::write_buffer;
use crate::clients::{self, Credentials};
use crate::config::{train_config_text, ExperimentSpec, FixtureRef, RunKey};
use crate::error::{LabError, LabResult};
use crate::fixtures::{self, parse_failures};
use crate::store::JsonlStore;

pub const LAYOUT_VERSION: u32 = 1;

/// Revision stamp recorded in every run directory.
pub fn revision() -> String {
    format!(
        "vlreward-lab {}\nsource {}\n",
        env!("CARGO_PKG_VERSION"),
        option_env!("VLREWARD_SOURCE_REVISION").unwrap_or("unknown")
    )
}

/// Everything a run needs that does not depend on the seed.
pub struct Prepared {
    pub encoder: SyntheticEncoder,
    pub prompts: BTreeMap<TaskId, PromptSet>,
    pub decompositions: BTreeMap<TaskId, SubgoalDecomposition>,
    pub warnings: Vec<String>,
}

/// Loads fixtures and builds one prompt set per task. Fails before any
/// training when a fixture is missing or incomplete.
pub fn prepare(spec: &ExperimentSpec, llm: Option<&mut dyn LlmClient>) -> LabResult<Prepared> {
    let table = parse_prompt_table(&fixtures::load(&spec.prompt_table, fixtures::PROMPTS_TSV)?)
        .map_err(|e| LabError::Fixture(format!("prompt table: {e}")))?;
    let encoder = SyntheticEncoder::new(spec.encoder_dim, spec.encoder_seed, table)?;
    let failures = parse_failures(&fixtures::load(&spec.failures, fixtures::FAILURES_TSV)?)?;
    let mut store = match &spec.decompositions {
        FixtureRef::Builtin => JsonlStore::in_memory(fixtures::DECOMPOSITIONS_JSONL)?,
        FixtureRef::Path(p) if spec.decompose_mode == DecomposeMode::Fixture && !p.exists() => {
            return Err(LabError::Fixture(format!("{}: no such decomposition cache", p.display())));
        }
        FixtureRef::Path(p) => JsonlStore::open(p)?,
    };

    let mut warnings = Vec::new();
    let mut mode = spec.decompose_mode;
    let mut llm = llm;
    if mode == DecomposeMode::Live && llm.is_none() {
        warnings.push("no language-model client available; decompositions come from the cache".into());
        mode = DecomposeMode::Fixture;
    }
    let mut prompts = BTreeMap::new();
    let mut decompositions = BTreeMap::new();
    for &task in &spec.tasks {
        let task_failures = failures.get(&task).cloned().unwrap_or_default();
        if task_failures.is_empty() {
            warnings.push(format!("{task}: no failure prompts configured"));
        }
        let client = llm.as_mut().map(|c| &mut **c as &mut dyn LlmClient);
        let dec = decompose(task.instruction(), mode, &mut store, client, &task_failures).map_err(|e| match e {
            vlreward_core::Error::NotFound(m) => LabError::Fixture(format!("{task}: {m}")),
            other => other.into(),
        })?;
        // Failure prompts always come from the failure file.
        let dec = SubgoalDecomposition { failures: task_failures, ..dec };
        for p in dec.subgoals.iter().chain(&dec.failures).map(String::as_str).chain([task.instruction()]) {
            if encoder.event_of(p).is_none() {
                warnings.push(format!("{task}: prompt {p:?} is not in the prompt table"));
            }
        }
        let (set, w) = build_prompt_set(&dec, &encoder, task.instruction())?;
        warnings.extend(w.into_iter().map(|w| format!("{task}: {w}")));
        prompts.insert(task, set);
        decompositions.insert(task, dec);
    }
    Ok(Prepared { encoder, prompts, decompositions, warnings })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    /// Runs executed concurrently.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 1 }
    }
}

/// Writes the per-run logs while training.
struct RunWriter {
    metrics: csv::Writer<File>,
    labels: Option<BufWriter<File>>,
    trajectories: Option<BufWriter<File>>,
    task: TaskId,
    error: Option<LabError>,
    dir: PathBuf,
}

impl RunWriter {
    fn note(&mut self, r: std::io::Result<()>, file: &str) {
        if let (Err(e), None) = (r, &self.error) {
            self.error = Some(LabError::io(self.dir.join(file), e));
        }
    }
}

impl TrainObserver for RunWriter {
    fn on_metrics(&mut self, row: &MetricsRow) {
        let r = self.metrics.serialize(row).and_then(|_| self.metrics.flush().map_err(Into::into));
        self.note(r.map_err(std::io::Error::other), "metrics.csv");
    }

    fn on_label(&mut self, record: &LabelRecord) {
        if let Some(w) = self.labels.as_mut() {
            let r = write_jsonl(w, &LabelLogLine::from(record));
            self.note(r, "labels.jsonl");
        }
    }

    fn on_trajectory(&mut self, id: u64, traj: &Trajectory) {
        if let Some(w) = self.trajectories.as_mut() {
            let line = TrajectoryLine { id, task: self.task, trajectory: traj.clone() };
            let r = write_jsonl(w, &line);
            self.note(r, "trajectories.jsonl");
        }
    }
}

fn create(path: &Path) -> LabResult<File> {
    File::create(path).map_err(|e| LabError::io(path, e))
}

fn write_file(path: &Path, text: &str) -> LabResult<()> {
    std::fs::write(path, text).map_err(|e| LabError::io(path, e))
}

/// Labeler for one run; `None` when self-imitation is ablated.
fn make_labeler(cfg: &TrainConfig, creds: Option<&Credentials>) -> LabResult<Option<Box<dyn Labeler + Send>>> {
    if !cfg.self_imitation() {
        return Ok(None);
    }
    Ok(Some(match cfg.labeler {
        LabelerMode::GroundTruth => Box::new(OracleLabeler::ground_truth()),
        LabelerMode::Noised(e) => Box::new(OracleLabeler::noised(e, cfg.seed)?),
        LabelerMode::Vlm => {
            let client = creds.and_then(clients::vision_client).ok_or_else(|| {
                LabError::Config(format!(
                    "the vlm labeler needs a build with the `live` feature and {} set",
                    clients::API_KEY_VAR
                ))
            })?;
            Box::new(VlmLabeler {
                client: BoxedVision(client),
                context_prompt: vlm_context_prompt(success_condition(cfg.task)),
                query: VLM_QUERY.to_string(),
            })
        }
    }))
}

struct BoxedVision(Box<dyn VisionClient + Send>);

impl VisionClient for BoxedVision {
    fn ask(&mut self, messages: &[vlreward_core::label::VlmMessage]) -> vlreward_core::Result<String> {
        self.0.ask(messages)
    }
}

/// Trains one cell of the matrix into `dir`.
pub fn run_one<E: Encoder + ?Sized>(
    spec: &ExperimentSpec,
    key: &RunKey,
    prompts: &PromptSet,
    encoder: &E,
    dir: &Path,
    creds: Option<&Credentials>,
) -> LabResult<TrainOutcome> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let cfg = spec.train_config(key);
    write_file(&dir.join("config.conf"), &train_config_text(&cfg))?;
    let mut labeler = make_labeler(&cfg, creds)?;
    let mut writer = RunWriter {
        metrics: csv::Writer::from_writer(create(&dir.join("metrics.csv"))?),
        labels: match labeler {
            Some(_) => Some(BufWriter::new(create(&dir.join("labels.jsonl"))?)),
            None => None,
        },
        trajectories: match spec.dump_trajectories {
            true => Some(BufWriter::new(create(&dir.join("trajectories.jsonl"))?)),
            false => None,
        },
        task: key.task,
        error: None,
        dir: dir.to_path_buf(),
    };
    let mut env = ToyEnv::new(key.task);
    let mut eval_env = ToyEnv::new(key.task);
    let labeler_ref = labeler.as_deref_mut().map(|l| l as &mut dyn Labeler);
    let result = train(&cfg, prompts, encoder, &mut env, &mut eval_env, labeler_ref, &mut writer);
    for w in [writer.labels.as_mut(), writer.trajectories.as_mut()].into_iter().flatten() {
        let r = w.flush();
        if let (Err(e), None) = (r, &writer.error) {
            writer.error = Some(LabError::io(dir, e));
        }
    }
    if let Some(e) = writer.error {
        return Err(e);
    }
    let outcome = result?;
    if spec.checkpoint {
        write_file(&dir.join("buffer.ckpt"), &write_buffer(&outcome.buffer))?;
        let policy = serde_json::to_string_pretty(&outcome.learner.policy).expect("policy serializes");
        write_file(&dir.join("policy.json"), &(policy + "\n"))?;
        let critic = serde_json::to_string_pretty(&outcome.learner.critic).expect("critic serializes");
        write_file(&dir.join("critic.json"), &(critic + "\n"))?;
    }
    Ok(outcome)
}

/// Prepares the run directory and executes every run of `spec`, then writes
/// the summary. A failing run does not stop the others; the first error is
/// returned after all runs finished.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path, opts: &RunOptions) -> LabResult<PathBuf> {
    spec.validate()?;
    let creds = Credentials::from_env();
    let mut llm = creds.as_ref().and_then(clients::llm_client);
    let prepared = prepare(spec, llm.as_deref_mut().map(|c| c as &mut dyn LlmClient))?;
    for w in &prepared.warnings {
        eprintln!("warning: {w}");
    }

    let root = out.join(&spec.name);
    std::fs::create_dir_all(&root).map_err(|e| LabError::io(&root, e))?;
    write_file(&root.join("LAYOUT"), &format!("{LAYOUT_VERSION}\n"))?;
    write_file(&root.join("spec.conf"), &spec.to_text())?;
    write_file(&root.join("revision.txt"), &revision())?;

    let runs = spec.runs();
    let next = AtomicUsize::new(0);
    let first_error: Mutex<Option<(usize, LabError)>> = Mutex::new(None);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(key) = runs.get(i) else { break };
        let dir = root.join(key.rel_dir());
        if let Err(e) = run_one(spec, key, &prepared.prompts[&key.task], &prepared.encoder, &dir, creds.as_ref()) {
            eprintln!("run {} failed: {e}", key.rel_dir().display());
            let mut slot = first_error.lock().expect("no panics while holding the lock");
            if slot.as_ref().is_none_or(|(j, _)| i < *j) {
                *slot = Some((i, e));
            }
        }
    };
    std::thread::scope(|s| {
        for _ in 1..opts.jobs.max(1) {
            s.spawn(worker);
        }
        worker();
    });
    crate::summary::summarize(&root)?;
    match first_error.into_inner().expect("workers finished") {
        Some((_, e)) => Err(e),
        None => Ok(root),
    }
}
