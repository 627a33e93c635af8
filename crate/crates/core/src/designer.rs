//! The adversary's construction MDP and the uniform random generator.
//!
//! An adversary builds a maze one placement at a time. Step 0 places the
//! agent, step 1 the goal, and every later step a wall. Actions index interior
//! tiles row-major.

use std::ops::RangeInclusive;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{Direction, Grid, Pos, Tile, DESK_GRID_SIZE, DESK_HORIZON, PAPER_GRID_SIZE, PAPER_HORIZON};
use crate::learner::{ActOutput, Episode, NetInput, OwnedInput, PolicyHandle};

/// Width of the per-episode latent vector.
pub const LATENT_DIM: usize = 50;
pub const PAPER_BLOCK_BUDGET: usize = 50;

/// Planes of the adversary's full view.
pub const DESIGN_CHANNELS: usize = 3;
const PLANE_WALL: usize = 0;
const PLANE_GOAL: usize = 1;
const PLANE_AGENT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub width: usize,
    pub height: usize,
    pub block_budget: usize,
    /// Episode length of the finished maze.
    pub horizon: usize,
}

impl DesignConfig {
    pub fn paper() -> Self {
        DesignConfig {
            width: PAPER_GRID_SIZE,
            height: PAPER_GRID_SIZE,
            block_budget: PAPER_BLOCK_BUDGET,
            horizon: PAPER_HORIZON,
        }
    }

    /// 9×9 with a 15-block budget.
    pub fn desk() -> Self {
        DesignConfig {
            width: DESK_GRID_SIZE,
            height: DESK_GRID_SIZE,
            block_budget: 15,
            horizon: DESK_HORIZON,
        }
    }

    pub fn free_tiles(&self) -> usize {
        (self.width - 2) * (self.height - 2)
    }

    pub fn total_steps(&self) -> usize {
        2 + self.block_budget
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 3 || self.height < 3 {
            return Err(Error::invalid("design grid must be at least 3x3"));
        }
        if self.free_tiles() < 2 {
            return Err(Error::invalid(
                "design grid needs two interior tiles for agent and goal",
            ));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("design horizon must be >= 1"));
        }
        Ok(())
    }

    pub fn tile_of(&self, index: usize) -> Pos {
        let iw = self.width - 2;
        Pos::new(1 + index % iw, 1 + index / iw)
    }
}

/// What the adversary sees: the whole grid, the step counter, and the latent.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryObservation {
    /// Channel-major `[wall, goal, agent] × height × width`.
    pub view: Vec<f64>,
    pub t: usize,
    pub z: Vec<f64>,
}

impl AdversaryObservation {
    pub fn as_input(&self) -> NetInput<'_> {
        NetInput {
            image: &self.view,
            category: Some(self.t),
            raw: &self.z,
        }
    }
}

/// A maze under construction.
#[derive(Debug, Clone)]
pub struct DesignState {
    config: DesignConfig,
    walls: Vec<bool>,
    agent: Option<(Pos, Direction)>,
    goal: Option<Pos>,
    t: usize,
    z: Vec<f64>,
    done: bool,
    rng: ChaCha8Rng,
}

/// Fresh empty interior with a latent drawn from N(0, I).
pub fn design_reset(config: DesignConfig, seed: u64) -> Result<DesignState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = (0..LATENT_DIM).map(|_| rng.sample(StandardNormal)).collect();
    let (w, h) = (config.width, config.height);
    let mut walls = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            walls[y * w + x] = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
        }
    }
    Ok(DesignState {
        config,
        walls,
        agent: None,
        goal: None,
        t: 0,
        z,
        done: false,
        rng,
    })
}

/// Functional form of [`DesignState::step`].
pub fn design_step(mut state: DesignState, action: usize) -> Result<DesignState> {
    state.step(action)?;
    Ok(state)
}

impl DesignState {
    pub fn config(&self) -> &DesignConfig {
        &self.config
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn agent(&self) -> Option<(Pos, Direction)> {
        self.agent
    }

    pub fn goal(&self) -> Option<Pos> {
        self.goal
    }

    pub fn interior_walls(&self) -> usize {
        let w = self.config.width;
        (0..self.config.free_tiles())
            .filter(|i| {
                let p = self.config.tile_of(*i);
                self.walls[p.y * w + p.x]
            })
            .count()
    }

    fn occupied(&self, p: Pos) -> bool {
        self.walls[p.y * self.config.width + p.x] || self.agent.is_some_and(|(a, _)| a == p) || self.goal == Some(p)
    }

    pub fn step(&mut self, action: usize) -> Result<()> {
        if self.done {
            return Err(Error::contract("design_step called on a finished design"));
        }
        let f = self.config.free_tiles();
        if action >= f {
            return Err(Error::invalid(format!("design action {action} out of range 0..{f}")));
        }
        let p = self.config.tile_of(action);
        match self.t {
            0 => {
                let dir = Direction::from_index(self.rng.random_range(0..4));
                self.agent = Some((p, dir));
            }
            1 => {
                let agent = self.agent.map(|(a, _)| a);
                let goal = if agent == Some(p) {
                    let others: Vec<usize> = (0..f).filter(|i| Some(self.config.tile_of(*i)) != agent).collect();
                    self.config.tile_of(others[self.rng.random_range(0..others.len())])
                } else {
                    p
                };
                self.goal = Some(goal);
            }
            _ => {
                if !self.occupied(p) {
                    self.walls[p.y * self.config.width + p.x] = true;
                }
            }
        }
        self.t += 1;
        if self.t >= self.config.total_steps() {
            self.done = true;
        }
        Ok(())
    }

    pub fn observe(&self) -> AdversaryObservation {
        let (w, h) = (self.config.width, self.config.height);
        let mut view = vec![0.0; DESIGN_CHANNELS * w * h];
        for (i, wall) in self.walls.iter().enumerate() {
            if *wall {
                view[PLANE_WALL * w * h + i] = 1.0;
            }
        }
        if let Some(g) = self.goal {
            view[PLANE_GOAL * w * h + g.y * w + g.x] = 1.0;
        }
        if let Some((a, _)) = self.agent {
            view[PLANE_AGENT * w * h + a.y * w + a.x] = 1.0;
        }
        AdversaryObservation {
            view,
            t: self.t,
            z: self.z.clone(),
        }
    }

    /// The finished maze.
    pub fn grid(&self) -> Result<Grid> {
        if !self.done {
            return Err(Error::contract(format!(
                "design incomplete at step {} of {}",
                self.t,
                self.config.total_steps()
            )));
        }
        let (w, h) = (self.config.width, self.config.height);
        let mut cells: Vec<Tile> = self
            .walls
            .iter()
            .map(|&b| if b { Tile::Wall } else { Tile::Floor })
            .collect();
        let (agent, dir) = self.agent.expect("agent placed at step 0");
        let goal = self.goal.expect("goal placed at step 1");
        cells[goal.y * w + goal.x] = Tile::Goal;
        Grid::new(w, h, cells, agent, dir, self.config.horizon)
    }
}

/// Uniform random maze: the block count is drawn from `blocks`, then agent,
/// goal and blocks occupy distinct interior tiles chosen uniformly.
pub fn random_design<R: Rng + ?Sized>(
    config: &DesignConfig,
    rng: &mut R,
    blocks: RangeInclusive<usize>,
) -> Result<Grid> {
    config.validate()?;
    let f = config.free_tiles();
    if blocks.is_empty() || *blocks.end() + 2 > f {
        return Err(Error::invalid(format!(
            "block range {blocks:?} does not fit {f} interior tiles with agent and goal"
        )));
    }
    let k = rng.random_range(blocks);
    let dir = Direction::from_index(rng.random_range(0..4));
    let picks = sample(rng, f, k + 2);
    let (w, h) = (config.width, config.height);
    let mut cells = vec![Tile::Floor; w * h];
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                cells[y * w + x] = Tile::Wall;
            }
        }
    }
    let mut it = picks.iter().map(|i| config.tile_of(i));
    let agent = it.next().expect("k + 2 >= 2 picks");
    let goal = it.next().expect("k + 2 >= 2 picks");
    cells[goal.y * w + goal.x] = Tile::Goal;
    for p in it {
        cells[p.y * w + p.x] = Tile::Wall;
    }
    Grid::new(w, h, cells, agent, dir, config.horizon)
}

/// Rolls the construction MDP under `policy`. Environment randomness comes
/// from `design_seed`; action sampling from `rng`. Rewards are left at zero
/// for the caller to fill in at the terminal step.
pub fn adversary_episode<R: Rng + ?Sized>(
    policy: &mut PolicyHandle,
    config: &DesignConfig,
    design_seed: u64,
    rng: &mut R,
) -> Result<(Grid, Episode)> {
    if policy.spec.n_actions != config.free_tiles() {
        return Err(Error::invalid(format!(
            "adversary has {} actions, grid has {} interior tiles",
            policy.spec.n_actions,
            config.free_tiles()
        )));
    }
    policy.reset_state();
    let out = design_rollout(config, design_seed, |input| policy.act(input, rng));
    policy.reset_state();
    out
}

/// Rolls the construction MDP with an arbitrary action source.
pub fn design_rollout<F>(config: &DesignConfig, design_seed: u64, mut act: F) -> Result<(Grid, Episode)>
where
    F: FnMut(&NetInput) -> Result<ActOutput>,
{
    let mut state = design_reset(*config, design_seed)?;
    let mut ep = Episode::default();
    while !state.is_done() {
        let obs = state.observe();
        let out = act(&obs.as_input())?;
        state.step(out.action)?;
        ep.inputs.push(OwnedInput {
            image: obs.view,
            category: Some(obs.t),
            raw: obs.z,
        });
        ep.actions.push(out.action);
        ep.log_probs.push(out.log_prob);
        ep.values.push(out.value);
        ep.rewards.push(0.0);
    }
    Ok((state.grid()?, ep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::NetworkSpec;

    fn small() -> DesignConfig {
        DesignConfig {
            width: 6,
            height: 5,
            block_budget: 5,
            horizon: 40,
        }
    }

    #[test]
    fn reset_is_empty_and_seeded() {
        let a = design_reset(DesignConfig::paper(), 3).unwrap();
        let b = design_reset(DesignConfig::paper(), 3).unwrap();
        assert_eq!(a.z(), b.z());
        assert_eq!(a.z().len(), 50);
        assert_eq!(a.interior_walls(), 0);
        assert!(a.agent().is_none() && a.goal().is_none());
        assert_ne!(a.z(), design_reset(DesignConfig::paper(), 4).unwrap().z());
    }

    #[test]
    fn goal_on_agent_moves_elsewhere() {
        for seed in 0..50 {
            let mut s = design_reset(small(), seed).unwrap();
            s.step(5).unwrap();
            s.step(5).unwrap();
            let g = s.goal().unwrap();
            assert_ne!(g, s.agent().unwrap().0);
            assert!(g.x >= 1 && g.x <= 4 && g.y >= 1 && g.y <= 3);
        }
    }

    #[test]
    fn wall_on_object_is_noop() {
        let mut s = design_reset(small(), 1).unwrap();
        s.step(0).unwrap();
        s.step(1).unwrap();
        for a in [0, 1, 2, 2, 2] {
            s.step(a).unwrap();
        }
        assert!(s.is_done());
        assert_eq!(s.interior_walls(), 1);
        assert!(s.step(3).is_err());
        let g = s.grid().unwrap();
        assert_eq!(g.agent_start(), Pos::new(1, 1));
        assert_eq!(g.goal(), Pos::new(2, 1));
        assert_eq!(g.interior_walls(), 1);
    }

    #[test]
    fn paper_budget_finishes_after_52_steps() {
        let mut s = design_reset(DesignConfig::paper(), 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut n = 0;
        while !s.is_done() {
            s.step(rng.random_range(0..169)).unwrap();
            n += 1;
        }
        assert_eq!(n, 52);
        assert!(s.grid().unwrap().interior_walls() <= 50);
    }

    #[test]
    fn replay_reproduces_grid() {
        let actions = [4, 4, 7, 3, 9, 0, 11];
        let run = || {
            let mut s = design_reset(small(), 42).unwrap();
            for a in actions {
                s = design_step(s, a).unwrap();
            }
            s.grid().unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn random_design_block_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = DesignConfig::paper();
        let g = random_design(&cfg, &mut rng, 0..=0).unwrap();
        assert_eq!(g.interior_walls(), 0);
        for _ in 0..20 {
            assert_eq!(random_design(&cfg, &mut rng, 50..=50).unwrap().interior_walls(), 50);
        }
        assert!(random_design(&small(), &mut rng, 0..=11).is_err());
    }

    #[test]
    fn adversary_episode_has_full_length() {
        let cfg = small();
        let spec = NetworkSpec::adversary_desk(cfg.width, cfg.height, cfg.total_steps());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = PolicyHandle::init(spec, &mut rng).unwrap();
        let (g, ep) = adversary_episode(&mut p, &cfg, 17, &mut rng).unwrap();
        assert_eq!(ep.len(), cfg.total_steps());
        assert!(g.validate().is_ok());
        let mut r1 = ChaCha8Rng::seed_from_u64(8);
        let mut r2 = ChaCha8Rng::seed_from_u64(8);
        let a = adversary_episode(&mut p, &cfg, 5, &mut r1).unwrap();
        let b = adversary_episode(&mut p, &cfg, 5, &mut r2).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
