use serde::{Deserialize, Serialize};

use super::{Direction, Grid, Pos, Tile};
use crate::error::{Error, Result};

/// Side length of the egocentric view.
pub const VIEW_SIZE: usize = 5;
/// Indicator planes: wall-or-out-of-bounds, goal, floor.
pub const VIEW_CHANNELS: usize = 3;

const PLANE_WALL: usize = 0;
const PLANE_GOAL: usize = 1;
const PLANE_FLOOR: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NavAction {
    TurnLeft = 0,
    TurnRight = 1,
    Forward = 2,
}

impl NavAction {
    pub const COUNT: usize = 3;

    pub fn from_index(i: usize) -> Result<NavAction> {
        match i {
            0 => Ok(NavAction::TurnLeft),
            1 => Ok(NavAction::TurnRight),
            2 => Ok(NavAction::Forward),
            _ => Err(Error::invalid(format!("navigation action {i} out of range 0..3"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentState {
    pub position: Pos,
    pub direction: Direction,
    pub steps_taken: usize,
}

/// 5×5×3 egocentric view plus the facing direction.
///
/// `view` is channel-major: `view[c * 25 + row * 5 + col]`. Row 0 is the far
/// edge of the view cone; the agent sits at row 4, column 2, facing up.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentObservation {
    pub view: Vec<f64>,
    pub direction: usize,
}

impl AgentObservation {
    pub fn plane(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.view[channel * VIEW_SIZE * VIEW_SIZE + row * VIEW_SIZE + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: AgentObservation,
    pub reward: f64,
    pub done: bool,
}

/// One episode of navigation on a shared, immutable grid.
#[derive(Debug, Clone)]
pub struct NavEnv<'g> {
    grid: &'g Grid,
    state: AgentState,
    done: bool,
    reached_goal: bool,
}

impl<'g> NavEnv<'g> {
    /// Places the agent at its start pose and returns the first observation.
    pub fn reset(grid: &'g Grid) -> Result<(Self, AgentObservation)> {
        grid.validate()?;
        let env = NavEnv {
            grid,
            state: AgentState {
                position: grid.agent_start(),
                direction: grid.agent_start_dir(),
                steps_taken: 0,
            },
            done: false,
            reached_goal: false,
        };
        let obs = env.observe();
        Ok((env, obs))
    }

    pub fn state(&self) -> AgentState {
        self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reached_goal(&self) -> bool {
        self.reached_goal
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn step(&mut self, action: NavAction) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::contract("step called on a finished episode"));
        }
        self.state.steps_taken += 1;
        let mut reward = 0.0;
        match action {
            NavAction::TurnLeft => self.state.direction = self.state.direction.left(),
            NavAction::TurnRight => self.state.direction = self.state.direction.right(),
            NavAction::Forward => {
                let (dx, dy) = self.state.direction.delta();
                let nx = self.state.position.x as isize + dx;
                let ny = self.state.position.y as isize + dy;
                match self.grid.tile_or_wall(nx, ny) {
                    Tile::Wall => {}
                    tile => {
                        self.state.position = Pos::new(nx as usize, ny as usize);
                        if tile == Tile::Goal {
                            let m = self.state.steps_taken as f64;
                            let t = self.grid.horizon() as f64;
                            reward = 1.0 - 0.9 * (m / t);
                            self.reached_goal = true;
                            self.done = true;
                        }
                    }
                }
            }
        }
        if self.state.steps_taken >= self.grid.horizon() {
            self.done = true;
        }
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            done: self.done,
        })
    }

    pub fn observe(&self) -> AgentObservation {
        egocentric_view(self.grid, self.state.position, self.state.direction)
    }
}

/// Renders the 5×5×3 view of an agent at `pos` facing `dir`.
///
/// Walls do not occlude: every tile of the cone is visible.
pub fn egocentric_view(grid: &Grid, pos: Pos, dir: Direction) -> AgentObservation {
    let (fx, fy) = dir.delta();
    let (rx, ry) = dir.right().delta();
    let n = VIEW_SIZE as isize;
    let mut view = vec![0.0; VIEW_CHANNELS * VIEW_SIZE * VIEW_SIZE];
    for row in 0..n {
        for col in 0..n {
            let forward = n - 1 - row;
            let lateral = col - n / 2;
            let x = pos.x as isize + forward * fx + lateral * rx;
            let y = pos.y as isize + forward * fy + lateral * ry;
            let plane = match grid.tile_or_wall(x, y) {
                Tile::Wall => PLANE_WALL,
                Tile::Goal => PLANE_GOAL,
                Tile::Floor => PLANE_FLOOR,
            };
            view[plane * VIEW_SIZE * VIEW_SIZE + (row * n + col) as usize] = 1.0;
        }
    }
    AgentObservation {
        view,
        direction: dir.index(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::parse_map;

    fn open(goal: Pos, start: Pos, dir: Direction, horizon: usize) -> Grid {
        Grid::open_room(15, 15, start, dir, goal, horizon).unwrap()
    }

    #[test]
    fn corner_agent_sees_border_behind_and_left() {
        // (1,1) facing east: the north border is on the agent's left, west border behind.
        let g = open(Pos::new(13, 13), Pos::new(1, 1), Direction::East, 250);
        let (_, obs) = NavEnv::reset(&g).unwrap();
        assert_eq!(obs.direction, 0);
        for row in 0..VIEW_SIZE {
            // columns 0 and 1 are lateral offsets -2 and -1, i.e. north of the agent
            assert_eq!(obs.plane(0, row, 0), 1.0);
            assert_eq!(obs.plane(0, row, 1), 1.0);
            assert_eq!(obs.plane(2, row, 2), 1.0);
        }
        // every cell carries exactly one indicator
        for row in 0..VIEW_SIZE {
            for col in 0..VIEW_SIZE {
                let s: f64 = (0..VIEW_CHANNELS).map(|c| obs.plane(c, row, col)).sum();
                assert_eq!(s, 1.0);
            }
        }
    }

    #[test]
    fn goal_in_view_shows_once() {
        let g = open(Pos::new(3, 1), Pos::new(1, 1), Direction::East, 250);
        let (_, obs) = NavEnv::reset(&g).unwrap();
        let goals: f64 = obs.view[25..50].iter().sum();
        assert_eq!(goals, 1.0);
        assert_eq!(obs.plane(1, 2, 2), 1.0);
    }

    #[test]
    fn reset_reports_start_direction() {
        for d in Direction::ALL {
            let g = open(Pos::new(7, 7), Pos::new(3, 3), d, 250);
            let (env, obs) = NavEnv::reset(&g).unwrap();
            assert_eq!(obs.direction, d.index());
            assert_eq!(env.state().position, Pos::new(3, 3));
        }
    }

    #[test]
    fn goal_reward_follows_time_penalty() {
        // Goal 25 tiles ahead is impossible on 15×15, so burn 24 turns first.
        let g = open(Pos::new(2, 1), Pos::new(1, 1), Direction::East, 250);
        let (mut env, _) = NavEnv::reset(&g).unwrap();
        for _ in 0..24 {
            let out = env.step(NavAction::TurnLeft).unwrap();
            assert!(!out.done);
        }
        let out = env.step(NavAction::Forward).unwrap();
        assert!(out.done);
        assert!((out.reward - 0.91).abs() < 1e-12);
        assert!(env.step(NavAction::Forward).is_err());
    }

    #[test]
    fn no_goal_within_horizon_scores_zero() {
        let g = open(Pos::new(13, 13), Pos::new(1, 1), Direction::East, 30);
        let (mut env, _) = NavEnv::reset(&g).unwrap();
        let mut total = 0.0;
        let mut steps = 0;
        while !env.is_done() {
            total += env.step(NavAction::TurnRight).unwrap().reward;
            steps += 1;
        }
        assert_eq!(total, 0.0);
        assert_eq!(steps, 30);
    }

    #[test]
    fn forward_into_wall_is_noop() {
        let g = open(Pos::new(13, 13), Pos::new(1, 1), Direction::North, 250);
        let (mut env, _) = NavEnv::reset(&g).unwrap();
        let out = env.step(NavAction::Forward).unwrap();
        assert_eq!(env.state().position, Pos::new(1, 1));
        assert_eq!(out.reward, 0.0);
        assert!(!out.done);
    }

    #[test]
    fn view_is_invariant_under_grid_rotation() {
        let text = "\
#######
#..#..#
#.....#
#.#A>..#
#..G..#
#.....#
#######
";
        let g = parse_map(text).unwrap();
        let rotated = rotate_cw(&g);
        let a = egocentric_view(&g, g.agent_start(), g.agent_start_dir());
        let b = egocentric_view(&rotated, rotated.agent_start(), rotated.agent_start_dir());
        assert_eq!(a.view, b.view);
        assert_eq!((a.direction + 1) % 4, b.direction);
    }

    /// Rotates a square grid a quarter turn clockwise, carrying the agent pose along.
    fn rotate_cw(g: &Grid) -> Grid {
        let n = g.width();
        let mut cells = vec![Tile::Wall; n * n];
        for y in 0..n {
            for x in 0..n {
                let (nx, ny) = (n - 1 - y, x);
                cells[ny * n + nx] = g.tile(Pos::new(x, y));
            }
        }
        let a = g.agent_start();
        Grid::new(
            n,
            n,
            cells,
            Pos::new(n - 1 - a.y, a.x),
            g.agent_start_dir().right(),
            g.horizon(),
        )
        .unwrap()
    }
}
