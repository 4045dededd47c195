use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vlreward_core::decompose::{decompose, DecomposeMode, LlmClient};
use vlreward_core::env::TaskId;
use vlreward_lab::audit::audit_run;
use vlreward_lab::clients::{self, Credentials};
use vlreward_lab::config::{ExperimentSpec, FixtureRef};
use vlreward_lab::fixtures::{self, parse_failures};
use vlreward_lab::runner::{run_experiment, RunOptions};
use vlreward_lab::store::JsonlStore;
use vlreward_lab::summary::{render, summarize};
use vlreward_lab::{LabError, LabResult};

/// Exit code when a summary lists incomplete runs.
const EXIT_INCOMPLETE: u8 = 8;

#[derive(Parser)]
#[command(name = "vlreward", version, about = "Decomposed contrastive reward laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every run of an experiment configuration.
    Run {
        config: PathBuf,
        /// Parent directory of the run directory.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Runs trained concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// (Re)write summary.md and summary.json of a run directory.
    Summarize { dir: PathBuf },
    /// Show, check or fill the decomposition cache.
    DecomposeCache {
        /// Cache file; the built-in fixture when omitted.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Failure-prompt file attached to new entries.
        #[arg(long)]
        failures: Option<PathBuf>,
        /// Restrict to these task ids (default: all).
        #[arg(long = "task")]
        tasks: Vec<TaskId>,
        /// Query the language model for missing entries.
        #[arg(long)]
        live: bool,
    },
    /// Check label logs against trajectory dumps and buffer provenance.
    LabelAudit { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> LabResult<u8> {
    match cmd {
        Command::Run { config, out, jobs } => {
            let spec = ExperimentSpec::parse(&fixtures::read_text(&config)?)?;
            let root = run_experiment(&spec, &out, &RunOptions { jobs })?;
            println!("{}", root.display());
            Ok(0)
        }
        Command::Summarize { dir } => {
            let summary = summarize(&dir)?;
            print!("{}", render(&summary));
            Ok(if summary.is_complete() { 0 } else { EXIT_INCOMPLETE })
        }
        Command::DecomposeCache { cache, failures, tasks, live } => decompose_cache(cache, failures, tasks, live),
        Command::LabelAudit { dir } => label_audit(&dir),
    }
}

fn decompose_cache(cache: Option<PathBuf>, failures: Option<PathBuf>, tasks: Vec<TaskId>, live: bool) -> LabResult<u8> {
    let mut store = match &cache {
        Some(p) => JsonlStore::open(p)?,
        None => JsonlStore::in_memory(fixtures::DECOMPOSITIONS_JSONL)?,
    };
    let failure_ref = failures.map_or(FixtureRef::Builtin, FixtureRef::Path);
    let failures = parse_failures(&fixtures::load(&failure_ref, fixtures::FAILURES_TSV)?)?;
    let mut mode = if live { DecomposeMode::Live } else { DecomposeMode::Fixture };
    let mut client = None;
    if live {
        client = Credentials::from_env().as_ref().and_then(clients::llm_client);
        if client.is_none() {
            eprintln!("warning: no language-model client (credentials or `live` feature missing); fixture mode");
            mode = DecomposeMode::Fixture;
        }
        if cache.is_none() {
            return Err(LabError::Config("--live needs --cache to store new entries".into()));
        }
    }
    let tasks = if tasks.is_empty() { TaskId::ALL.to_vec() } else { tasks };
    let mut missing = Vec::new();
    for task in tasks {
        let f = failures.get(&task).cloned().unwrap_or_default();
        let c = client.as_deref_mut().map(|c| c as &mut dyn LlmClient);
        match decompose(task.instruction(), mode, &mut store, c, &f) {
            Ok(dec) => println!("{}", serde_json::to_string(&dec).expect("decomposition serializes")),
            Err(vlreward_core::Error::NotFound(_)) => missing.push(task.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    if missing.is_empty() {
        Ok(0)
    } else {
        Err(LabError::Fixture(format!("no cached decomposition for: {}", missing.join(", "))))
    }
}

fn run_dirs(dir: &Path, out: &mut Vec<PathBuf>) -> LabResult<()> {
    if dir.join("labels.jsonl").exists() {
        out.push(dir.to_path_buf());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| LabError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    for e in entries {
        run_dirs(&e, out)?;
    }
    Ok(())
}

fn label_audit(dir: &Path) -> LabResult<u8> {
    let mut dirs = Vec::new();
    run_dirs(dir, &mut dirs)?;
    if dirs.is_empty() {
        return Err(LabError::Fixture(format!("no labels.jsonl below {}", dir.display())));
    }
    println!("run\tlabeled\tunlabeled\tpositives\tchecked\tfalse_pos\tfalse_neg\tprovenance_violations");
    let mut violations = 0;
    for d in dirs {
        let r = audit_run(&d)?;
        violations += r.provenance_violations;
        let rel = d.strip_prefix(dir).unwrap_or(&d);
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            rel.display(),
            r.labeled,
            r.unlabeled,
            r.positives,
            r.checked,
            r.false_positives,
            r.false_negatives,
            r.provenance_violations
        );
    }
    if violations > 0 {
        return Err(LabError::Audit(format!(
            "{violations} buffer pairs come from trajectories not labeled successful"
        )));
    }
    Ok(0)
}
