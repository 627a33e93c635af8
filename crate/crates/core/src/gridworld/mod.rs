//! Partially observable maze navigation.
//!
//! A [`Grid`] is an immutable, fully specified maze. [`NavEnv`] simulates one
//! episode on it with minigrid-style movement (turn left, turn right, forward)
//! and a 5×5 egocentric view.

mod env;
mod map;
mod metrics;

pub use env::{AgentObservation, AgentState, NavAction, NavEnv, StepOutcome, VIEW_CHANNELS, VIEW_SIZE};
pub use map::{parse_map, render_map};
pub use metrics::{grid_metrics, shortest_path_length, GridMetrics};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAPER_GRID_SIZE: usize = 15;
pub const PAPER_HORIZON: usize = 250;
pub const DESK_GRID_SIZE: usize = 9;
pub const DESK_HORIZON: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tile {
    Wall,
    Floor,
    Goal,
}

/// Tile coordinate, `x` growing east and `y` growing south.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub x: usize,
    pub y: usize,
}

impl Pos {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

/// Facing direction: 0 = east, 1 = south, 2 = west, 3 = north.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    East = 0,
    South = 1,
    West = 2,
    North = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::East, Direction::South, Direction::West, Direction::North];

    pub fn from_index(i: usize) -> Direction {
        Self::ALL[i % 4]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Clockwise quarter turn.
    pub fn right(self) -> Direction {
        Self::from_index(self.index() + 1)
    }

    pub fn left(self) -> Direction {
        Self::from_index(self.index() + 3)
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
            Direction::North => (0, -1),
        }
    }
}

/// A fully specified maze.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    width: usize,
    height: usize,
    cells: Vec<Tile>,
    agent_start: Pos,
    agent_start_dir: Direction,
    horizon: usize,
}

impl Grid {
    /// Builds and validates a grid. `cells` is row-major, `height` rows of `width` tiles.
    pub fn new(
        width: usize,
        height: usize,
        cells: Vec<Tile>,
        agent_start: Pos,
        agent_start_dir: Direction,
        horizon: usize,
    ) -> Result<Self> {
        let g = Grid {
            width,
            height,
            cells,
            agent_start,
            agent_start_dir,
            horizon,
        };
        g.validate()?;
        Ok(g)
    }

    /// An open room: wall border, empty interior, agent and goal where given.
    pub fn open_room(
        width: usize,
        height: usize,
        agent_start: Pos,
        agent_start_dir: Direction,
        goal: Pos,
        horizon: usize,
    ) -> Result<Self> {
        let mut cells = vec![Tile::Floor; width * height];
        for y in 0..height {
            for x in 0..width {
                if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                    cells[y * width + x] = Tile::Wall;
                }
            }
        }
        if goal.x < width && goal.y < height {
            cells[goal.y * width + goal.x] = Tile::Goal;
        }
        Grid::new(width, height, cells, agent_start, agent_start_dir, horizon)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width, self.height);
        if w < 3 || h < 3 {
            return Err(Error::invalid(format!("grid {w}x{h} is smaller than 3x3")));
        }
        if self.cells.len() != w * h {
            return Err(Error::invalid(format!(
                "grid has {} cells, expected {}",
                self.cells.len(),
                w * h
            )));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("grid horizon must be at least 1"));
        }
        for y in 0..h {
            for x in 0..w {
                let border = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
                if border && self.cells[y * w + x] != Tile::Wall {
                    return Err(Error::invalid(format!("border tile ({x},{y}) is not a wall")));
                }
            }
        }
        let goals = self.cells.iter().filter(|t| **t == Tile::Goal).count();
        if goals != 1 {
            return Err(Error::invalid(format!("grid has {goals} goals, expected exactly one")));
        }
        let a = self.agent_start;
        if a.x >= w || a.y >= h {
            return Err(Error::invalid("agent start lies outside the grid"));
        }
        match self.cells[a.y * w + a.x] {
            Tile::Floor => Ok(()),
            Tile::Goal => Err(Error::invalid("agent start coincides with the goal")),
            Tile::Wall => Err(Error::invalid("agent start is a wall tile")),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn agent_start(&self) -> Pos {
        self.agent_start
    }

    pub fn agent_start_dir(&self) -> Direction {
        self.agent_start_dir
    }

    pub fn cells(&self) -> &[Tile] {
        &self.cells
    }

    /// Same maze, different episode length.
    pub fn with_horizon(&self, horizon: usize) -> Result<Grid> {
        if horizon == 0 {
            return Err(Error::invalid("grid horizon must be at least 1"));
        }
        Ok(Grid {
            horizon,
            ..self.clone()
        })
    }

    pub fn tile(&self, p: Pos) -> Tile {
        self.cells[p.y * self.width + p.x]
    }

    /// Tile at signed coordinates; anything outside the grid reads as a wall.
    pub fn tile_or_wall(&self, x: isize, y: isize) -> Tile {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            Tile::Wall
        } else {
            self.cells[y as usize * self.width + x as usize]
        }
    }

    pub fn goal(&self) -> Pos {
        let i = self
            .cells
            .iter()
            .position(|t| *t == Tile::Goal)
            .expect("validated grid has a goal");
        Pos::new(i % self.width, i / self.width)
    }

    /// Number of tiles strictly inside the border.
    pub fn interior_tiles(&self) -> usize {
        (self.width - 2) * (self.height - 2)
    }

    /// Walls strictly inside the border.
    pub fn interior_walls(&self) -> usize {
        let mut n = 0;
        for y in 1..self.height - 1 {
            for x in 1..self.width - 1 {
                if self.cells[y * self.width + x] == Tile::Wall {
                    n += 1;
                }
            }
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_room_is_valid() {
        let g = Grid::open_room(15, 15, Pos::new(1, 1), Direction::East, Pos::new(13, 13), 250).unwrap();
        assert_eq!(g.interior_tiles(), 169);
        assert_eq!(g.interior_walls(), 0);
        assert_eq!(g.goal(), Pos::new(13, 13));
    }

    #[test]
    fn rejects_agent_on_goal_and_broken_border() {
        assert!(Grid::open_room(5, 5, Pos::new(2, 2), Direction::East, Pos::new(2, 2), 10).is_err());
        let g = Grid::open_room(5, 5, Pos::new(1, 1), Direction::East, Pos::new(3, 3), 10).unwrap();
        let mut cells = g.cells().to_vec();
        cells[2] = Tile::Floor;
        assert!(Grid::new(5, 5, cells, Pos::new(1, 1), Direction::East, 10).is_err());
    }

    #[test]
    fn direction_turns_wrap() {
        assert_eq!(Direction::East.left(), Direction::North);
        assert_eq!(Direction::North.right(), Direction::East);
        for d in Direction::ALL {
            assert_eq!(d.left().right(), d);
        }
    }
}
