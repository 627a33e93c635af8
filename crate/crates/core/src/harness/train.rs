//! Training runs on disk.
//!
//! ```text
//! <out_dir>/manifest.json
//! <out_dir>/seed_<s>/metrics.csv
//! <out_dir>/seed_<s>/events.jsonl
//! <out_dir>/seed_<s>/checkpoints/iter_<n>.ckpt
//! <out_dir>/seed_<s>/final.ckpt
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Experiment, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::learner::{read_checkpoint, write_checkpoint, CheckpointEntry, PolicyHandle};
use crate::ued::{run_iteration, IterationMetrics, Learner, PpoLearner, TrainState};

pub const METRICS_COLUMNS: [&str; 12] = [
    "iteration",
    "num_blocks",
    "distance_to_goal",
    "passable_path_length",
    "solved_path_length",
    "regret_raw",
    "regret_clamped",
    "adversary_reward",
    "protagonist_return",
    "antagonist_return",
    "protagonist_success",
    "status",
];

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub code_version: String,
    pub strategy: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub experiment: Experiment,
    /// Run-relative path of each seed's final checkpoint, in seed order.
    pub final_checkpoints: Vec<PathBuf>,
    pub complete: bool,
}

impl Manifest {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("bad manifest {}: {e}", path.display())))
    }

    fn write(&self, run_dir: &Path) -> Result<()> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

pub fn seed_dir(run_dir: &Path, seed: u64) -> PathBuf {
    run_dir.join(format!("seed_{seed}"))
}

fn row(m: &IterationMetrics) -> Vec<String> {
    vec![
        m.iteration.to_string(),
        m.mean_num_blocks().to_string(),
        m.mean_distance_to_goal().to_string(),
        m.mean_passable_path_length().to_string(),
        m.solved_path_length.to_string(),
        m.mean_regret_raw().to_string(),
        m.mean_regret_clamped().to_string(),
        m.mean_adversary_reward().to_string(),
        m.mean_protagonist_return().to_string(),
        m.mean_antagonist_return().to_string(),
        m.protagonist_success_rate().to_string(),
        "ok".to_string(),
    ]
}

fn abort_row(iteration: u64, err: &Error) -> Vec<String> {
    let mut r = vec![iteration.to_string()];
    r.extend((1..METRICS_COLUMNS.len() - 1).map(|_| "NaN".to_string()));
    r.push(format!("abort: {err}"));
    r
}

/// Named entries for every network in a training state.
pub fn checkpoint_entries(state: &TrainState) -> Result<Vec<CheckpointEntry>> {
    let mut out = Vec::new();
    for (prefix, group) in [("agent", &state.agents), ("adversary", &state.adversaries)] {
        for (i, l) in group.iter().enumerate() {
            let (Some(policy), Some(optimizer)) = (l.policy(), l.optimizer()) else {
                return Err(Error::invalid(format!("{prefix}.{i} has no trainable network to save")));
            };
            out.push(CheckpointEntry {
                name: format!("{prefix}.{i}"),
                policy: policy.clone(),
                optimizer: optimizer.clone(),
            });
        }
    }
    Ok(out)
}

/// Rebuilds a training state from checkpoint entries written by [`checkpoint_entries`].
pub fn restore_state(exp: &Experiment, entries: Vec<CheckpointEntry>, seed: u64, iteration: u64) -> Result<TrainState> {
    let mut agents: Vec<Box<dyn Learner>> = Vec::new();
    let mut adversaries: Vec<Box<dyn Learner>> = Vec::new();
    for e in entries {
        let (group, optim, expected) = if e.name.starts_with("agent.") {
            let i = agents.len();
            (&mut agents, &exp.ued.agent_optim, exp.ued.agent_spec_for(i).clone())
        } else if e.name.starts_with("adversary.") {
            (
                &mut adversaries,
                &exp.ued.adversary_optim,
                exp.ued.adversary_spec.clone(),
            )
        } else {
            return Err(Error::Checkpoint(format!("unexpected entry `{}`", e.name)));
        };
        if e.policy.spec != expected {
            return Err(Error::Checkpoint(format!(
                "entry `{}` does not match the configured network",
                e.name
            )));
        }
        let mut l = PpoLearner::new(e.policy, optim.clone());
        l.optimizer = e.optimizer;
        group.push(Box::new(l));
    }
    let mut state = TrainState::from_learners(agents, adversaries, seed);
    state.iteration = iteration;
    Ok(state)
}

/// Protagonist network of a checkpoint, checked against an expected spec when one is given.
pub fn load_protagonist(path: &Path, expected: Option<&crate::learner::NetworkSpec>) -> Result<PolicyHandle> {
    let (_, entries) = read_checkpoint(path)?;
    let entry = entries
        .into_iter()
        .find(|e| e.name == "agent.0")
        .ok_or_else(|| Error::Checkpoint(format!("{} holds no agent.0 entry", path.display())))?;
    if let Some(spec) = expected {
        if &entry.policy.spec != spec {
            return Err(Error::Checkpoint(format!(
                "{}: protagonist network does not match the configuration",
                path.display()
            )));
        }
    }
    Ok(entry.policy)
}

struct SeedLog {
    metrics: csv::Writer<std::fs::File>,
    events: std::fs::File,
    started: Instant,
}

impl SeedLog {
    fn event(&mut self, kind: &str, extra: serde_json::Value) -> Result<()> {
        let mut v = serde_json::json!({ "event": kind, "elapsed_s": self.started.elapsed().as_secs_f64() });
        if let (Some(o), serde_json::Value::Object(x)) = (v.as_object_mut(), extra) {
            o.extend(x);
        }
        writeln!(self.events, "{v}").map_err(|e| Error::io("events.jsonl", e))
    }

    fn row(&mut self, r: &[String]) -> Result<()> {
        self.metrics.write_record(r)?;
        self.metrics.flush().map_err(|e| Error::io(METRICS_FILE, e))
    }
}

fn save(path: &Path, exp: &Experiment, state: &TrainState, seed: u64) -> Result<()> {
    let meta = serde_json::json!({
        "iteration": state.iteration,
        "seed": seed,
        "strategy": exp.ued.strategy.name(),
        "config_hash": exp.config_hash(),
    });
    write_checkpoint(path, &meta, &checkpoint_entries(state)?)
}

fn train_seed(exp: &Experiment, run_dir: &Path, seed: u64) -> Result<PathBuf> {
    let dir = seed_dir(run_dir, seed);
    let ckpt_dir = dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    let metrics_path = dir.join(METRICS_FILE);
    let events_path = dir.join("events.jsonl");
    let mut log = SeedLog {
        metrics: csv::Writer::from_path(&metrics_path)?,
        events: std::fs::File::create(&events_path).map_err(|e| Error::io(&events_path, e))?,
        started: Instant::now(),
    };
    log.metrics.write_record(METRICS_COLUMNS)?;
    log.event(
        "start",
        serde_json::json!({ "seed": seed, "iterations": exp.iterations }),
    )?;

    let mut state = TrainState::new(&exp.ued, seed)?;
    for _ in 0..exp.iterations {
        match run_iteration(&mut state, &exp.ued) {
            Ok(m) => log.row(&row(&m))?,
            Err(e) => {
                log.row(&abort_row(state.iteration, &e))?;
                log.event(
                    "abort",
                    serde_json::json!({ "iteration": state.iteration, "error": e.to_string() }),
                )?;
                return Err(e);
            }
        }
        if exp.checkpoint_every > 0 && state.iteration % exp.checkpoint_every == 0 {
            let p = ckpt_dir.join(format!("iter_{:06}.ckpt", state.iteration));
            save(&p, exp, &state, seed)?;
            log.event(
                "checkpoint",
                serde_json::json!({ "iteration": state.iteration, "path": p }),
            )?;
        }
    }
    let final_path = dir.join("final.ckpt");
    save(&final_path, exp, &state, seed)?;
    log.event("done", serde_json::json!({ "iteration": state.iteration }))?;
    Ok(final_path
        .strip_prefix(run_dir)
        .map(Path::to_path_buf)
        .unwrap_or(final_path))
}

/// Trains every seed of `exp`, `workers` seeds at a time, and writes the manifest.
pub fn train(exp: &Experiment, workers: usize) -> Result<Manifest> {
    let run_dir = &exp.out_dir;
    std::fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        strategy: exp.ued.strategy.name().to_string(),
        config_hash: exp.config_hash(),
        seeds: exp.seeds.clone(),
        experiment: exp.clone(),
        final_checkpoints: Vec::new(),
        complete: false,
    };
    manifest.write(run_dir)?;

    let workers = workers.clamp(1, exp.seeds.len());
    let mut results: Vec<Option<Result<PathBuf>>> = exp.seeds.iter().map(|_| None).collect();
    let size = exp.seeds.len().div_ceil(workers);
    std::thread::scope(|scope| {
        for (ci, chunk) in results.chunks_mut(size).enumerate() {
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(train_seed(exp, run_dir, exp.seeds[ci * size + k]));
                }
            });
        }
    });
    for r in results {
        manifest.final_checkpoints.push(r.expect("every seed ran")?);
    }
    manifest.complete = true;
    manifest.write(run_dir)?;
    Ok(manifest)
}
