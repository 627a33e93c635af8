use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agents::{run_nav_episode, Learner, PpoLearner};
use super::{solved_path_length, AgentSignal, EnvRecord, IterationMetrics, StrategyKind, UedConfig};
use crate::designer::{design_rollout, random_design};
use crate::error::{Error, Result};
use crate::gridworld::{grid_metrics, Grid};
use crate::learner::{Episode, PolicyHandle, RolloutBatch};
use crate::regret::{apply_per_step_penalty, regret_batch, regret_pop, RegretEstimate};

// Stream tags keep every consumer of randomness independent of the others.
const TAG_INIT_AGENT: u64 = 1;
const TAG_INIT_ADVERSARY: u64 = 2;
const TAG_POPULATION: u64 = 3;
const TAG_DESIGN: u64 = 4;
const TAG_ADVERSARY_ACT: u64 = 5;
const TAG_EPISODE: u64 = 6;
const TAG_UPDATE_AGENT: u64 = 7;
const TAG_UPDATE_ADVERSARY: u64 = 8;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for the stream identified by `tags` under a run seed.
pub(crate) fn stream_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(seed), |acc, t| splitmix(acc ^ splitmix(*t)))
}

fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, tags))
}

/// Everything a strategy carries between iterations.
///
/// `agents[0]` is the protagonist. Under PAIRED `agents[1]` is the antagonist;
/// under the population strategies `agents` is the agent population.
/// `adversaries` holds one adversary, or the adversary population.
pub struct TrainState {
    pub agents: Vec<Box<dyn Learner>>,
    pub adversaries: Vec<Box<dyn Learner>>,
    pub iteration: u64,
    pub seed: u64,
}

impl TrainState {
    /// Freshly initialized networks for `cfg`'s strategy.
    pub fn new(cfg: &UedConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut agents: Vec<Box<dyn Learner>> = Vec::new();
        for i in 0..cfg.agents_needed() {
            let mut rng = stream(seed, &[TAG_INIT_AGENT, i as u64]);
            let p = PolicyHandle::init(cfg.agent_spec_for(i).clone(), &mut rng)?;
            agents.push(Box::new(PpoLearner::new(p, cfg.agent_optim.clone())));
        }
        let mut adversaries: Vec<Box<dyn Learner>> = Vec::new();
        for k in 0..cfg.adversaries_needed() {
            let mut rng = stream(seed, &[TAG_INIT_ADVERSARY, k as u64]);
            let p = PolicyHandle::init(cfg.adversary_spec.clone(), &mut rng)?;
            adversaries.push(Box::new(PpoLearner::new(p, cfg.adversary_optim.clone())));
        }
        Ok(TrainState {
            agents,
            adversaries,
            iteration: 0,
            seed,
        })
    }

    pub fn from_learners(agents: Vec<Box<dyn Learner>>, adversaries: Vec<Box<dyn Learner>>, seed: u64) -> Self {
        TrainState {
            agents,
            adversaries,
            iteration: 0,
            seed,
        }
    }

    pub fn protagonist(&self) -> &dyn Learner {
        self.agents[0].as_ref()
    }

    pub fn antagonist(&self) -> Option<&dyn Learner> {
        self.agents.get(1).map(|a| a.as_ref())
    }

    fn check(&self, cfg: &UedConfig) -> Result<()> {
        let need = |n: usize, have: usize, what: &str| {
            if have == 0 {
                Err(Error::invalid(format!("{what} population is empty")))
            } else if have != n {
                Err(Error::invalid(format!(
                    "{} needs {n} {what}(s), state holds {have}",
                    cfg.strategy.name()
                )))
            } else {
                Ok(())
            }
        };
        need(cfg.agents_needed(), self.agents.len(), "agent")?;
        need(cfg.adversaries_needed(), self.adversaries.len(), "adversary")?;
        if cfg.strategy == StrategyKind::CombinedPbt && self.agents.len() < 2 {
            return Err(Error::invalid("combined_pbt needs at least 2 agents"));
        }
        Ok(())
    }
}

/// One generated environment and who acts on it.
struct EnvDraw {
    grid: Grid,
    adversary: Option<(usize, Episode)>,
    agent_index: usize,
}

/// An agent's episodes on one environment.
struct Runs {
    episodes: Vec<Episode>,
    returns: Vec<f64>,
    solved: bool,
}

fn collect(agent: &mut dyn Learner, grid: &Grid, n: usize, seed: u64, it: u64, env: usize) -> Result<Runs> {
    let mut runs = Runs {
        episodes: Vec::with_capacity(n),
        returns: Vec::with_capacity(n),
        solved: false,
    };
    for j in 0..n {
        let mut rng = stream(seed, &[TAG_EPISODE, it, env as u64, j as u64]);
        let (ep, reached) = run_nav_episode(agent, grid, &mut rng)?;
        runs.returns.push(ep.undiscounted_return());
        runs.solved |= reached;
        runs.episodes.push(ep);
    }
    Ok(runs)
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn finite(v: f64, what: &str, env: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{what} is {v} on environment {env}")))
    }
}

fn penalize(runs: &mut Runs, opponent_max: f64, horizon: usize) -> Result<()> {
    for ep in &mut runs.episodes {
        apply_per_step_penalty(&mut ep.rewards, opponent_max, horizon)?;
    }
    Ok(())
}

/// Runs one iteration of whichever strategy `cfg` selects.
pub fn run_iteration(state: &mut TrainState, cfg: &UedConfig) -> Result<IterationMetrics> {
    cfg.validate()?;
    state.check(cfg)?;
    let it = state.iteration;
    let seed = state.seed;
    let strategy = cfg.strategy;
    let pbt = matches!(strategy, StrategyKind::MinimaxPbt | StrategyKind::CombinedPbt);
    let prot_grid_horizon = cfg.design.horizon;

    // 1. generate environments
    let mut draws = Vec::with_capacity(cfg.envs_per_batch);
    for e in 0..cfg.envs_per_batch {
        let mut pop = stream(seed, &[TAG_POPULATION, it, e as u64]);
        let adv_idx = if pbt {
            pop.random_range(0..state.adversaries.len())
        } else {
            0
        };
        let agent_index = if strategy == StrategyKind::MinimaxPbt {
            pop.random_range(0..state.agents.len())
        } else {
            0
        };
        let design_seed = stream_seed(seed, &[TAG_DESIGN, it, e as u64]);
        let draw = if strategy == StrategyKind::DomainRandomization {
            let mut rng = ChaCha8Rng::seed_from_u64(design_seed);
            let (lo, hi) = cfg.dr_blocks;
            EnvDraw {
                grid: random_design(&cfg.design, &mut rng, lo..=hi)?,
                adversary: None,
                agent_index,
            }
        } else {
            let mut act_rng = stream(seed, &[TAG_ADVERSARY_ACT, it, e as u64]);
            let adv = state.adversaries[adv_idx].as_mut();
            adv.reset();
            let (grid, ep) = design_rollout(&cfg.design, design_seed, |input| adv.act(input, &mut act_rng))?;
            adv.reset();
            EnvDraw {
                grid,
                adversary: Some((adv_idx, ep)),
                agent_index,
            }
        };
        draws.push(draw);
    }

    // 2. roll out agents, 3. score environments
    let mut agent_batches: Vec<RolloutBatch> = (0..state.agents.len()).map(|_| RolloutBatch::default()).collect();
    let mut adversary_batches: Vec<RolloutBatch> =
        (0..state.adversaries.len()).map(|_| RolloutBatch::default()).collect();
    let mut records = Vec::with_capacity(draws.len());
    for (e, draw) in draws.into_iter().enumerate() {
        let prot_grid = draw.grid.with_horizon(prot_grid_horizon)?;
        let metrics = grid_metrics(&draw.grid);
        let mut regret: Option<RegretEstimate> = None;
        let adversary_reward: Option<f64>;
        let record_prot_return;
        let mut record_ant_return = None;
        let protagonist_solved;

        match strategy {
            StrategyKind::DomainRandomization | StrategyKind::Minimax | StrategyKind::MinimaxPbt => {
                let i = draw.agent_index;
                let runs = collect(state.agents[i].as_mut(), &prot_grid, cfg.n_traj, seed, it, e)?;
                let m = finite(mean_of(&runs.returns), "protagonist return", e)?;
                adversary_reward = (strategy != StrategyKind::DomainRandomization).then_some(-m);
                record_prot_return = m;
                protagonist_solved = runs.solved;
                agent_batches[i].episodes.extend(runs.episodes);
            }
            StrategyKind::Paired => {
                let mut p = collect(state.agents[0].as_mut(), &prot_grid, cfg.n_traj, seed, it, e)?;
                let ant_grid = draw.grid.with_horizon(cfg.antagonist_horizon)?;
                let mut a = collect(state.agents[1].as_mut(), &ant_grid, cfg.n_traj, seed, it, e)?;
                let est = regret_batch(&a.returns, &p.returns)?;
                finite(est.raw, "regret", e)?;
                if cfg.agent_signal == AgentSignal::Regret {
                    penalize(&mut p, max_of(&a.returns), prot_grid.horizon())?;
                    penalize(&mut a, max_of(&p.returns), ant_grid.horizon())?;
                }
                adversary_reward = Some(est.signal(cfg.clamp));
                regret = Some(est);
                record_prot_return = est.protagonist_mean;
                record_ant_return = Some(mean_of(&a.returns));
                protagonist_solved = p.solved;
                agent_batches[0].episodes.extend(p.episodes);
                agent_batches[1].episodes.extend(a.episodes);
            }
            StrategyKind::FlexiblePaired | StrategyKind::CombinedPbt => {
                let mut all = Vec::with_capacity(state.agents.len());
                for agent in state.agents.iter_mut() {
                    all.push(collect(agent.as_mut(), &prot_grid, 1, seed, it, e)?);
                }
                let returns: Vec<f64> = all.iter().map(|r| mean_of(&r.returns)).collect();
                let rp = finite(regret_pop(&returns)?, "population regret", e)?;
                if cfg.agent_signal == AgentSignal::Regret {
                    for (i, runs) in all.iter_mut().enumerate() {
                        let others = returns
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .map(|(_, r)| *r)
                            .fold(f64::NEG_INFINITY, f64::max);
                        penalize(runs, others, prot_grid.horizon())?;
                    }
                }
                let best = max_of(&returns);
                regret = Some(RegretEstimate {
                    raw: rp,
                    clamped: rp.max(0.0),
                    antagonist_max: best,
                    protagonist_mean: mean_of(&returns),
                });
                adversary_reward = Some(rp);
                record_prot_return = returns[0];
                record_ant_return = Some(max_of(&returns[1..]));
                protagonist_solved = all[0].solved;
                for (i, runs) in all.into_iter().enumerate() {
                    agent_batches[i].episodes.extend(runs.episodes);
                }
            }
        }

        let adversary_index = draw.adversary.as_ref().map(|(k, _)| *k);
        if let (Some((k, mut ep)), Some(r)) = (draw.adversary, adversary_reward) {
            if let Some(last) = ep.rewards.last_mut() {
                *last = r;
            }
            adversary_batches[k].episodes.push(ep);
        }
        records.push(EnvRecord {
            metrics,
            protagonist_solved,
            protagonist_return: record_prot_return,
            antagonist_return: record_ant_return,
            regret,
            adversary_reward,
            adversary_index,
            agent_index: draw.agent_index,
        });
    }

    // 4. updates, each a single-writer step
    for (i, batch) in agent_batches.iter().enumerate() {
        let mut rng = stream(seed, &[TAG_UPDATE_AGENT, it, i as u64]);
        state.agents[i].learn(batch, &mut rng)?;
    }
    if strategy.trains_adversary() {
        for (k, batch) in adversary_batches.iter().enumerate() {
            let mut rng = stream(seed, &[TAG_UPDATE_ADVERSARY, it, k as u64]);
            state.adversaries[k].learn(batch, &mut rng)?;
        }
    }

    let solved: Vec<_> = records.iter().map(|r| (r.metrics, r.protagonist_solved)).collect();
    state.iteration += 1;
    Ok(IterationMetrics {
        iteration: it,
        solved_path_length: solved_path_length(&solved),
        envs: records,
    })
}

fn expect(cfg: &UedConfig, kind: StrategyKind) -> Result<()> {
    if cfg.strategy != kind {
        return Err(Error::invalid(format!(
            "{} iteration called with strategy {}",
            kind.name(),
            cfg.strategy.name()
        )));
    }
    Ok(())
}

/// Adversary rewarded with the batched regret of protagonist against antagonist.
pub fn paired_iteration(state: &mut TrainState, cfg: &UedConfig) -> Result<IterationMetrics> {
    expect(cfg, StrategyKind::Paired)?;
    run_iteration(state, cfg)
}

/// Adversary rewarded with the negated mean protagonist return.
pub fn minimax_iteration(state: &mut TrainState, cfg: &UedConfig) -> Result<IterationMetrics> {
    expect(cfg, StrategyKind::Minimax)?;
    run_iteration(state, cfg)
}

/// Minimax with an adversary and an agent drawn uniformly per environment.
pub fn pbt_minimax_iteration(state: &mut TrainState, cfg: &UedConfig) -> Result<IterationMetrics> {
    expect(cfg, StrategyKind::MinimaxPbt)?;
    run_iteration(state, cfg)
}

/// A sampled adversary rewarded with population regret over every agent.
pub fn combined_pbt_iteration(state: &mut TrainState, cfg: &UedConfig) -> Result<IterationMetrics> {
    expect(cfg, StrategyKind::CombinedPbt)?;
    run_iteration(state, cfg)
}

/// Two agents; whichever does better on an environment plays antagonist there.
pub fn flexible_paired_iteration(state: &mut TrainState, cfg: &UedConfig) -> Result<IterationMetrics> {
    expect(cfg, StrategyKind::FlexiblePaired)?;
    run_iteration(state, cfg)
}

/// Uniformly random environments; the adversary is never consulted or updated.
pub fn dr_iteration(state: &mut TrainState, cfg: &UedConfig) -> Result<IterationMetrics> {
    expect(cfg, StrategyKind::DomainRandomization)?;
    run_iteration(state, cfg)
}
