//! Environment-design training strategies and the outer training loop.

mod agents;
mod train;

pub use agents::{nav_input, run_nav_episode, GreedyLearner, Learner, PpoLearner, ScriptedLearner};
pub use train::{
    combined_pbt_iteration, dr_iteration, flexible_paired_iteration, minimax_iteration, paired_iteration,
    pbt_minimax_iteration, run_iteration, TrainState,
};

use serde::{Deserialize, Serialize};

use crate::designer::DesignConfig;
use crate::error::{Error, Result};
use crate::gridworld::GridMetrics;
use crate::learner::{NetworkSpec, OptimConfig, OptimizerKind};
use crate::regret::RegretEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    DomainRandomization,
    Minimax,
    MinimaxPbt,
    Paired,
    FlexiblePaired,
    CombinedPbt,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::DomainRandomization,
        StrategyKind::Minimax,
        StrategyKind::MinimaxPbt,
        StrategyKind::Paired,
        StrategyKind::FlexiblePaired,
        StrategyKind::CombinedPbt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::DomainRandomization => "domain_randomization",
            StrategyKind::Minimax => "minimax",
            StrategyKind::MinimaxPbt => "minimax_pbt",
            StrategyKind::Paired => "paired",
            StrategyKind::FlexiblePaired => "flexible_paired",
            StrategyKind::CombinedPbt => "combined_pbt",
        }
    }

    pub fn parse(s: &str) -> Option<StrategyKind> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Whether regret against an opponent agent is defined for this strategy.
    pub fn has_opponent(self) -> bool {
        matches!(
            self,
            StrategyKind::Paired | StrategyKind::FlexiblePaired | StrategyKind::CombinedPbt
        )
    }

    pub fn trains_adversary(self) -> bool {
        self != StrategyKind::DomainRandomization
    }
}

/// Reward the navigation agents train on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentSignal {
    /// The environment's own reward.
    Direct,
    /// Environment reward minus the opponent's best return spread evenly over the horizon.
    Regret,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UedConfig {
    pub strategy: StrategyKind,
    /// Maze size, block budget, and the protagonist's episode length.
    pub design: DesignConfig,
    pub antagonist_horizon: usize,
    pub envs_per_batch: usize,
    /// Trajectories per agent per environment where an estimate is batched.
    pub n_traj: usize,
    /// Clamp the adversary's regret reward at zero.
    pub clamp: bool,
    pub agent_signal: AgentSignal,
    /// Inclusive block-count range for domain randomization.
    pub dr_blocks: (usize, usize),
    pub agent_population: usize,
    pub adversary_population: usize,
    pub agent_spec: NetworkSpec,
    /// Network for the second agent of the two-agent strategies; required by PAIRED.
    pub antagonist_spec: Option<NetworkSpec>,
    pub adversary_spec: NetworkSpec,
    pub agent_optim: OptimConfig,
    pub adversary_optim: OptimConfig,
}

impl UedConfig {
    /// 15×15 mazes, 50 blocks, full-size networks, plain SGD at 1e-4.
    pub fn paper(strategy: StrategyKind) -> Self {
        let design = DesignConfig::paper();
        let pbt = matches!(strategy, StrategyKind::MinimaxPbt | StrategyKind::CombinedPbt);
        UedConfig {
            strategy,
            design,
            antagonist_horizon: design.horizon,
            envs_per_batch: 30,
            n_traj: 2,
            clamp: true,
            agent_signal: AgentSignal::Direct,
            dr_blocks: (0, design.block_budget),
            agent_population: if pbt { 3 } else { 1 },
            adversary_population: if pbt { 3 } else { 1 },
            agent_spec: NetworkSpec::agent_paper(),
            antagonist_spec: strategy.has_opponent().then(NetworkSpec::agent_paper),
            adversary_spec: NetworkSpec::adversary_paper(design.width, design.height, design.total_steps(), 128),
            agent_optim: OptimConfig::default(),
            adversary_optim: OptimConfig::default(),
        }
    }

    /// 9×9 mazes, 15 blocks, small networks, Adam.
    pub fn desk(strategy: StrategyKind) -> Self {
        let design = DesignConfig::desk();
        let agent_optim = OptimConfig {
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            workers_per_batch: 16,
            entropy_coef: 0.01,
            epochs: 2,
            minibatch_episodes: 8,
            ..OptimConfig::default()
        };
        let adversary_optim = OptimConfig {
            learning_rate: 3e-3,
            entropy_coef: 0.01,
            ..agent_optim.clone()
        };
        UedConfig {
            design,
            antagonist_horizon: design.horizon,
            envs_per_batch: agent_optim.workers_per_batch,
            dr_blocks: (0, design.block_budget),
            agent_spec: NetworkSpec::agent_desk(),
            antagonist_spec: strategy.has_opponent().then(NetworkSpec::agent_desk),
            adversary_spec: NetworkSpec::adversary_desk(design.width, design.height, design.total_steps()),
            agent_optim,
            adversary_optim,
            ..Self::paper(strategy)
        }
    }

    pub fn agents_needed(&self) -> usize {
        match self.strategy {
            StrategyKind::DomainRandomization | StrategyKind::Minimax => 1,
            StrategyKind::Paired | StrategyKind::FlexiblePaired => 2,
            StrategyKind::MinimaxPbt | StrategyKind::CombinedPbt => self.agent_population,
        }
    }

    /// Network of agent `i`.
    pub fn agent_spec_for(&self, i: usize) -> &NetworkSpec {
        match (&self.antagonist_spec, self.strategy) {
            (Some(spec), StrategyKind::Paired | StrategyKind::FlexiblePaired) if i == 1 => spec,
            _ => &self.agent_spec,
        }
    }

    pub fn adversaries_needed(&self) -> usize {
        match self.strategy {
            StrategyKind::MinimaxPbt | StrategyKind::CombinedPbt => self.adversary_population,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design
            .validate()
            .map_err(|e| Error::config("design", e.to_string()))?;
        if self.antagonist_horizon == 0 {
            return Err(Error::config("antagonist_horizon", "must be >= 1"));
        }
        if self.envs_per_batch == 0 {
            return Err(Error::config("envs_per_batch", "must be >= 1"));
        }
        if self.n_traj == 0 {
            return Err(Error::config("n_traj", "must be >= 1"));
        }
        let (lo, hi) = self.dr_blocks;
        if lo > hi || hi > self.design.block_budget || hi + 2 > self.design.free_tiles() {
            return Err(Error::config(
                "dr_blocks",
                format!("range [{lo}, {hi}] must lie within [0, {}]", self.design.block_budget),
            ));
        }
        if self.agent_population == 0 || self.adversary_population == 0 {
            return Err(Error::config("population", "population sizes must be >= 1"));
        }
        if self.strategy == StrategyKind::CombinedPbt && self.agent_population < 2 {
            return Err(Error::config(
                "agent_population",
                "combined_pbt needs at least 2 agents",
            ));
        }
        if self.agent_signal == AgentSignal::Regret && !self.strategy.has_opponent() {
            return Err(Error::config(
                "agent_signal",
                format!(
                    "regret signal needs an opponent agent; {} has none",
                    self.strategy.name()
                ),
            ));
        }
        self.agent_spec
            .validate()
            .map_err(|e| Error::config("agent_spec", e.to_string()))?;
        if self.agent_spec.n_actions != crate::gridworld::NavAction::COUNT {
            return Err(Error::config("agent_spec", "navigation agents have 3 actions"));
        }
        match &self.antagonist_spec {
            None if self.strategy == StrategyKind::Paired => {
                return Err(Error::config("antagonist_spec", "paired needs an antagonist network"));
            }
            Some(spec) => {
                spec.validate()
                    .map_err(|e| Error::config("antagonist_spec", e.to_string()))?;
                if spec.n_actions != crate::gridworld::NavAction::COUNT {
                    return Err(Error::config("antagonist_spec", "navigation agents have 3 actions"));
                }
            }
            None => {}
        }
        self.adversary_spec
            .validate()
            .map_err(|e| Error::config("adversary_spec", e.to_string()))?;
        if self.adversary_spec.n_actions != self.design.free_tiles()
            || self.adversary_spec.image != [crate::designer::DESIGN_CHANNELS, self.design.height, self.design.width]
        {
            return Err(Error::config(
                "adversary_spec",
                "adversary network does not match the design grid",
            ));
        }
        match self.adversary_spec.embedding {
            Some(e) if e.categories >= self.design.total_steps() => {}
            _ => {
                return Err(Error::config(
                    "adversary_spec",
                    "adversary needs a timestep embedding covering every placement step",
                ))
            }
        }
        if self.adversary_spec.raw_inputs != crate::designer::LATENT_DIM {
            return Err(Error::config(
                "adversary_spec",
                "adversary must receive the latent vector",
            ));
        }
        self.agent_optim.validate()?;
        self.adversary_optim.validate()?;
        Ok(())
    }
}

/// Outcome of one generated environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvRecord {
    pub metrics: GridMetrics,
    pub protagonist_solved: bool,
    pub protagonist_return: f64,
    pub antagonist_return: Option<f64>,
    pub regret: Option<RegretEstimate>,
    pub adversary_reward: Option<f64>,
    pub adversary_index: Option<usize>,
    pub agent_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub envs: Vec<EnvRecord>,
    pub solved_path_length: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl IterationMetrics {
    pub fn mean_num_blocks(&self) -> f64 {
        mean(self.envs.iter().map(|e| e.metrics.num_blocks as f64))
    }

    pub fn mean_distance_to_goal(&self) -> f64 {
        mean(self.envs.iter().map(|e| e.metrics.distance_to_goal as f64))
    }

    pub fn mean_passable_path_length(&self) -> f64 {
        mean(self.envs.iter().map(|e| e.metrics.passable_path_length as f64))
    }

    /// NaN when the strategy has no regret estimate.
    pub fn mean_regret_raw(&self) -> f64 {
        mean(self.envs.iter().filter_map(|e| e.regret.map(|r| r.raw)))
    }

    pub fn mean_regret_clamped(&self) -> f64 {
        mean(self.envs.iter().filter_map(|e| e.regret.map(|r| r.clamped)))
    }

    pub fn mean_adversary_reward(&self) -> f64 {
        mean(self.envs.iter().filter_map(|e| e.adversary_reward))
    }

    pub fn mean_protagonist_return(&self) -> f64 {
        mean(self.envs.iter().map(|e| e.protagonist_return))
    }

    pub fn mean_antagonist_return(&self) -> f64 {
        mean(self.envs.iter().filter_map(|e| e.antagonist_return))
    }

    pub fn protagonist_success_rate(&self) -> f64 {
        mean(self.envs.iter().map(|e| if e.protagonist_solved { 1.0 } else { 0.0 }))
    }
}

/// Largest passable path length among environments the protagonist solved; 0 if none.
pub fn solved_path_length(batch: &[(GridMetrics, bool)]) -> usize {
    batch
        .iter()
        .filter(|(_, solved)| *solved)
        .map(|(m, _)| m.passable_path_length)
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(path: usize) -> GridMetrics {
        GridMetrics {
            num_blocks: 0,
            distance_to_goal: path,
            passable_path_length: path,
        }
    }

    #[test]
    fn solved_path_length_cases() {
        assert_eq!(solved_path_length(&[(m(4), false), (m(9), false)]), 0);
        assert_eq!(solved_path_length(&[(m(3), true), (m(7), true), (m(12), false)]), 7);
        assert_eq!(solved_path_length(&[(m(0), false), (m(0), false)]), 0);
        assert_eq!(solved_path_length(&[]), 0);
    }

    #[test]
    fn presets_validate() {
        for k in StrategyKind::ALL {
            UedConfig::desk(k).validate().unwrap();
            UedConfig::paper(k).validate().unwrap();
            assert_eq!(StrategyKind::parse(k.name()), Some(k));
        }
        let mut c = UedConfig::desk(StrategyKind::Minimax);
        c.agent_signal = AgentSignal::Regret;
        assert!(matches!(c.validate(), Err(Error::Config { .. })));
        let mut p = UedConfig::desk(StrategyKind::Paired);
        p.antagonist_spec = None;
        assert!(matches!(p.validate(), Err(Error::Config { field, .. }) if field == "antagonist_spec"));
    }
}
