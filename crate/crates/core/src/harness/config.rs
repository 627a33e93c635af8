//! Experiment configuration files.
//!
//! ```toml
//! schema_version = 1
//! strategy = "paired"
//! preset = "desk"                 # or "paper"
//! seeds = [1, 2, 3]
//! iterations = 200
//! checkpoint_every = 50           # 0 keeps only the final checkpoint
//! out_dir = "runs/paired"
//!
//! [networks]                      # agent_desk, agent_paper, adversary_desk, adversary_paper
//! protagonist = "agent_desk"
//! antagonist = "agent_desk"       # required by paired
//! adversary = "adversary_desk"
//!
//! [overrides]                     # any training-config field, merged over the preset
//! n_traj = 2
//! [overrides.agent_optim]
//! learning_rate = 1e-3
//!
//! [eval]
//! suite = "desk"
//! trials_per_map = 10
//! seeds = 5
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::designer::DesignConfig;
use crate::error::{Error, Result};
use crate::learner::NetworkSpec;
use crate::ued::{StrategyKind, UedConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkChoice {
    pub protagonist: Option<String>,
    pub antagonist: Option<String>,
    pub adversary: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    /// `desk`, `paper`, or a directory of `.map` files.
    pub suite: String,
    pub trials_per_map: usize,
    pub seeds: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            suite: "desk".into(),
            trials_per_map: 10,
            seeds: 5,
            seed: 0,
        }
    }
}

/// The file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub schema_version: u32,
    pub strategy: String,
    #[serde(default = "default_preset")]
    pub preset: Preset,
    pub seeds: Vec<u64>,
    pub iterations: u64,
    #[serde(default)]
    pub checkpoint_every: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub networks: NetworkChoice,
    #[serde(default)]
    pub overrides: Option<toml::Table>,
    #[serde(default)]
    pub eval: EvalSettings,
}

fn default_preset() -> Preset {
    Preset::Desk
}

/// A validated, fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub ued: UedConfig,
    pub preset: Preset,
    pub seeds: Vec<u64>,
    pub iterations: u64,
    pub checkpoint_every: u64,
    pub out_dir: PathBuf,
    pub eval: EvalSettings,
}

/// Command-line replacements applied before validation.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub seed: Option<u64>,
    pub strategy: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub iterations: Option<u64>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, cli: &CliOverrides) {
        if let Some(s) = cli.seed {
            self.seeds = vec![s];
        }
        if let Some(s) = &cli.strategy {
            self.strategy = s.clone();
        }
        if let Some(d) = &cli.out_dir {
            self.out_dir = Some(d.clone());
        }
        if let Some(n) = cli.iterations {
            self.iterations = n;
        }
    }

    pub fn resolve(&self) -> Result<Experiment> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        let strategy = StrategyKind::parse(&self.strategy).ok_or_else(|| {
            let known: Vec<_> = StrategyKind::ALL.iter().map(|k| k.name()).collect();
            Error::config(
                "strategy",
                format!(
                    "unknown strategy `{}`; expected one of {}",
                    self.strategy,
                    known.join(", ")
                ),
            )
        })?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be >= 1"));
        }
        if self.eval.trials_per_map == 0 || self.eval.seeds == 0 {
            return Err(Error::config("eval", "trials_per_map and seeds must be >= 1"));
        }

        let base = match self.preset {
            Preset::Desk => UedConfig::desk(strategy),
            Preset::Paper => UedConfig::paper(strategy),
        };
        let mut ued = merge_overrides(base, self.overrides.as_ref())?;
        let design = ued.design;
        let pick = |field: &str, name: Option<&String>, default: Option<NetworkSpec>| -> Result<Option<NetworkSpec>> {
            match name {
                None => Ok(default),
                Some(n) => network_preset(n, &design)
                    .map(Some)
                    .ok_or_else(|| Error::config(format!("networks.{field}"), format!("unknown network preset `{n}`"))),
            }
        };
        ued.agent_spec = pick(
            "protagonist",
            self.networks.protagonist.as_ref(),
            Some(ued.agent_spec.clone()),
        )?
        .expect("default present");
        ued.antagonist_spec = pick("antagonist", self.networks.antagonist.as_ref(), None)?;
        let default_adv = match self.preset {
            Preset::Desk => NetworkSpec::adversary_desk(design.width, design.height, design.total_steps()),
            Preset::Paper => NetworkSpec::adversary_paper(design.width, design.height, design.total_steps(), 128),
        };
        ued.adversary_spec =
            pick("adversary", self.networks.adversary.as_ref(), Some(default_adv))?.expect("default present");
        ued.validate()?;

        Ok(Experiment {
            ued,
            preset: self.preset,
            seeds: self.seeds.clone(),
            iterations: self.iterations,
            checkpoint_every: self.checkpoint_every,
            out_dir: self
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("runs").join(strategy.name())),
            eval: self.eval.clone(),
        })
    }
}

/// Named network presets; adversary presets are sized to the design grid.
pub fn network_preset(name: &str, design: &DesignConfig) -> Option<NetworkSpec> {
    let (w, h, steps) = (design.width, design.height, design.total_steps());
    match name {
        "agent_desk" => Some(NetworkSpec::agent_desk()),
        "agent_paper" => Some(NetworkSpec::agent_paper()),
        "adversary_desk" => Some(NetworkSpec::adversary_desk(w, h, steps)),
        "adversary_paper" => Some(NetworkSpec::adversary_paper(w, h, steps, 128)),
        _ => None,
    }
}

const RESERVED: [&str; 4] = ["strategy", "agent_spec", "antagonist_spec", "adversary_spec"];

fn merge(into: &mut serde_json::Value, from: serde_json::Value) {
    match (into, from) {
        (serde_json::Value::Object(a), serde_json::Value::Object(b)) => {
            for (k, v) in b {
                match a.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        a.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn merge_overrides(base: UedConfig, overrides: Option<&toml::Table>) -> Result<UedConfig> {
    let Some(table) = overrides else {
        return Ok(base);
    };
    for key in RESERVED {
        if table.contains_key(key) {
            let hint = if key == "strategy" {
                "the top-level `strategy`"
            } else {
                "[networks]"
            };
            return Err(Error::config(
                format!("overrides.{key}"),
                format!("set this through {hint}"),
            ));
        }
    }
    let mut value = serde_json::to_value(&base).expect("config serializes");
    let patch = serde_json::to_value(table).map_err(|e| Error::config("overrides", e.to_string()))?;
    merge(&mut value, patch);
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::config(format!("overrides.{path}"), e.into_inner().to_string())
    })
}

impl Experiment {
    /// SHA-256 of the canonical JSON of everything that affects results.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::json!({
            "ued": self.ued,
            "seeds": self.seeds,
            "iterations": self.iterations,
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}
