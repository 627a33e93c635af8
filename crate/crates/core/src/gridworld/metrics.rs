use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Grid, Pos, Tile};

/// Complexity statistics of a generated maze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMetrics {
    pub num_blocks: usize,
    pub distance_to_goal: usize,
    /// BFS steps from start to goal, 0 when the goal is unreachable.
    pub passable_path_length: usize,
}

/// 4-connected BFS distance from the agent start to the goal; 0 if unreachable.
pub fn shortest_path_length(grid: &Grid) -> usize {
    let (w, h) = (grid.width(), grid.height());
    let start = grid.agent_start();
    let goal = grid.goal();
    let mut dist = vec![usize::MAX; w * h];
    let mut queue = VecDeque::new();
    dist[start.y * w + start.x] = 0;
    queue.push_back(start);
    while let Some(p) = queue.pop_front() {
        let d = dist[p.y * w + p.x];
        if p == goal {
            return d;
        }
        let neighbours = [
            (p.x + 1, p.y),
            (p.x.wrapping_sub(1), p.y),
            (p.x, p.y + 1),
            (p.x, p.y.wrapping_sub(1)),
        ];
        for (nx, ny) in neighbours {
            if nx >= w || ny >= h {
                continue;
            }
            let i = ny * w + nx;
            if dist[i] == usize::MAX && grid.tile(Pos::new(nx, ny)) != Tile::Wall {
                dist[i] = d + 1;
                queue.push_back(Pos::new(nx, ny));
            }
        }
    }
    0
}

pub fn grid_metrics(grid: &Grid) -> GridMetrics {
    GridMetrics {
        num_blocks: grid.interior_walls(),
        distance_to_goal: grid.agent_start().manhattan(grid.goal()),
        passable_path_length: shortest_path_length(grid),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{parse_map, Direction};

    #[test]
    fn adjacent_goal() {
        let g = Grid::open_room(15, 15, Pos::new(1, 1), Direction::East, Pos::new(1, 2), 250).unwrap();
        assert_eq!(shortest_path_length(&g), 1);
    }

    #[test]
    fn enclosed_goal_is_unreachable() {
        let g = parse_map(
            "\
#######
#A>....#
#..#..#
#.#G#.#
#..#..#
#######
",
        )
        .unwrap();
        assert_eq!(shortest_path_length(&g), 0);
        let m = grid_metrics(&g);
        assert_eq!(m.num_blocks, 4);
        assert_eq!(m.distance_to_goal, 4);
        assert_eq!(m.passable_path_length, 0);
    }

    #[test]
    fn open_grid_matches_manhattan() {
        let g = Grid::open_room(15, 15, Pos::new(1, 1), Direction::East, Pos::new(13, 13), 250).unwrap();
        assert_eq!(shortest_path_length(&g), 24);
        let m = grid_metrics(&g);
        assert_eq!(m.num_blocks, 0);
        assert_eq!(m.distance_to_goal, 24);
    }

    #[test]
    fn one_interior_wall_counts_once() {
        let g = parse_map("######\n#A>...#\n#.#.G#\n######\n").unwrap();
        assert_eq!(grid_metrics(&g).num_blocks, 1);
    }

    #[test]
    fn detour_exceeds_manhattan() {
        let g = parse_map(
            "\
#######
#A>.#G.#
#..#..#
#.....#
#######
",
        )
        .unwrap();
        let m = grid_metrics(&g);
        assert_eq!(m.distance_to_goal, 3);
        assert_eq!(m.passable_path_length, 7);
    }
}
