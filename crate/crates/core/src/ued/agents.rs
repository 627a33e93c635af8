use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gridworld::{AgentObservation, Grid, NavAction, NavEnv};
use crate::learner::{
    update, ActOutput, Episode, LossStats, NetInput, OptimConfig, OptimizerState, OwnedInput, PolicyHandle,
    RolloutBatch,
};

/// Anything that can act in an episode and optionally learn from a batch.
pub trait Learner: Send {
    /// Clears recurrent state at an episode boundary.
    fn reset(&mut self);
    fn act(&mut self, input: &NetInput, rng: &mut ChaCha8Rng) -> Result<ActOutput>;
    /// Returns `None` for learners that never change.
    fn learn(&mut self, batch: &RolloutBatch, rng: &mut ChaCha8Rng) -> Result<Option<LossStats>>;
    /// Underlying network, if any, for checkpointing and evaluation.
    fn policy(&self) -> Option<&PolicyHandle>;
    fn optimizer(&self) -> Option<&OptimizerState> {
        None
    }
}

/// Network trained by clipped-surrogate policy optimization.
#[derive(Debug, Clone)]
pub struct PpoLearner {
    pub policy: PolicyHandle,
    pub optimizer: OptimizerState,
    pub config: OptimConfig,
}

impl PpoLearner {
    pub fn new(policy: PolicyHandle, config: OptimConfig) -> Self {
        let optimizer = OptimizerState::new(config.optimizer, policy.params.len());
        PpoLearner {
            policy,
            optimizer,
            config,
        }
    }
}

impl Learner for PpoLearner {
    fn reset(&mut self) {
        self.policy.reset_state();
    }

    fn act(&mut self, input: &NetInput, rng: &mut ChaCha8Rng) -> Result<ActOutput> {
        self.policy.act(input, rng)
    }

    fn learn(&mut self, batch: &RolloutBatch, rng: &mut ChaCha8Rng) -> Result<Option<LossStats>> {
        if batch.episodes.is_empty() {
            return Ok(None);
        }
        update(&mut self.policy, &mut self.optimizer, batch, &self.config, rng).map(Some)
    }

    fn policy(&self) -> Option<&PolicyHandle> {
        Some(&self.policy)
    }

    fn optimizer(&self) -> Option<&OptimizerState> {
        Some(&self.optimizer)
    }
}

/// Frozen network that always takes its highest-scoring action.
#[derive(Debug, Clone)]
pub struct GreedyLearner {
    pub policy: PolicyHandle,
}

impl Learner for GreedyLearner {
    fn reset(&mut self) {
        self.policy.reset_state();
    }

    fn act(&mut self, input: &NetInput, _rng: &mut ChaCha8Rng) -> Result<ActOutput> {
        let out = self.policy.forward(input)?;
        let logp = crate::learner::log_softmax(&out.logits);
        let action = (0..logp.len()).fold(0, |best, i| if logp[i] > logp[best] { i } else { best });
        Ok(ActOutput {
            action,
            log_prob: logp[action],
            value: out.value,
        })
    }

    fn learn(&mut self, _batch: &RolloutBatch, _rng: &mut ChaCha8Rng) -> Result<Option<LossStats>> {
        Ok(None)
    }

    fn policy(&self) -> Option<&PolicyHandle> {
        Some(&self.policy)
    }
}

/// Replays a fixed action list each episode, cycling if the episode is longer.
#[derive(Debug, Clone)]
pub struct ScriptedLearner {
    pub actions: Vec<usize>,
    cursor: usize,
}

impl ScriptedLearner {
    pub fn new(actions: Vec<usize>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::invalid("scripted learner needs at least one action"));
        }
        Ok(ScriptedLearner { actions, cursor: 0 })
    }
}

impl Learner for ScriptedLearner {
    fn reset(&mut self) {
        self.cursor = 0;
    }

    fn act(&mut self, _input: &NetInput, _rng: &mut ChaCha8Rng) -> Result<ActOutput> {
        let action = self.actions[self.cursor % self.actions.len()];
        self.cursor += 1;
        Ok(ActOutput {
            action,
            log_prob: 0.0,
            value: 0.0,
        })
    }

    fn learn(&mut self, _batch: &RolloutBatch, _rng: &mut ChaCha8Rng) -> Result<Option<LossStats>> {
        Ok(None)
    }

    fn policy(&self) -> Option<&PolicyHandle> {
        None
    }
}

/// Network input for a navigation observation.
pub fn nav_input(obs: &AgentObservation) -> NetInput<'_> {
    NetInput {
        image: &obs.view,
        category: Some(obs.direction),
        raw: &[],
    }
}

/// One navigation episode. Returns the recorded episode and whether the goal was reached.
pub fn run_nav_episode(agent: &mut dyn Learner, grid: &Grid, rng: &mut ChaCha8Rng) -> Result<(Episode, bool)> {
    let (mut env, mut obs) = NavEnv::reset(grid)?;
    agent.reset();
    let mut ep = Episode::default();
    while !env.is_done() {
        let out = agent.act(&nav_input(&obs), rng)?;
        let step = env.step(NavAction::from_index(out.action)?)?;
        ep.inputs.push(OwnedInput {
            image: std::mem::take(&mut obs.view),
            category: Some(obs.direction),
            raw: Vec::new(),
        });
        ep.actions.push(out.action);
        ep.log_probs.push(out.log_prob);
        ep.values.push(out.value);
        ep.rewards.push(step.reward);
        obs = step.observation;
    }
    agent.reset();
    Ok((ep, env.reached_goal()))
}
