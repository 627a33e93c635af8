//! Bundled zero-shot transfer maps.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::designer::{random_design, DesignConfig};
use crate::error::{Error, Result};
use crate::gridworld::{parse_map, render_map, shortest_path_length, Grid};

pub const SUITE_MAPS: [&str; 6] = [
    "empty",
    "fifty_blocks",
    "four_rooms",
    "sixteen_rooms",
    "labyrinth",
    "maze",
];

const DESK: [(&str, &str); 6] = [
    ("empty", include_str!("../../maps/desk/empty.map")),
    ("fifty_blocks", include_str!("../../maps/desk/fifty_blocks.map")),
    ("four_rooms", include_str!("../../maps/desk/four_rooms.map")),
    ("sixteen_rooms", include_str!("../../maps/desk/sixteen_rooms.map")),
    ("labyrinth", include_str!("../../maps/desk/labyrinth.map")),
    ("maze", include_str!("../../maps/desk/maze.map")),
];

const PAPER: [(&str, &str); 6] = [
    ("empty", include_str!("../../maps/paper/empty.map")),
    ("fifty_blocks", include_str!("../../maps/paper/fifty_blocks.map")),
    ("four_rooms", include_str!("../../maps/paper/four_rooms.map")),
    ("sixteen_rooms", include_str!("../../maps/paper/sixteen_rooms.map")),
    ("labyrinth", include_str!("../../maps/paper/labyrinth.map")),
    ("maze", include_str!("../../maps/paper/maze.map")),
];

/// Seeds and block counts behind the bundled block-scatter maps.
pub const DESK_BLOCKS: (u64, usize) = (50, 15);
pub const PAPER_BLOCKS: (u64, usize) = (50, 50);

#[derive(Debug, Clone, PartialEq)]
pub struct TransferMap {
    pub name: String,
    pub grid: Grid,
}

/// Raw text of a bundled suite.
pub fn bundled_sources(suite: &str) -> Option<&'static [(&'static str, &'static str); 6]> {
    match suite {
        "desk" => Some(&DESK),
        "paper" => Some(&PAPER),
        _ => None,
    }
}

fn checked(name: &str, text: &str) -> Result<TransferMap> {
    let grid = parse_map(text).map_err(|e| Error::invalid(format!("map `{name}`: {e}")))?;
    if shortest_path_length(&grid) == 0 {
        return Err(Error::invalid(format!("map `{name}` has no path to the goal")));
    }
    Ok(TransferMap {
        name: name.to_string(),
        grid,
    })
}

/// `desk`, `paper`, or a directory whose `.map` files form the suite (sorted by name).
pub fn load_suite(spec: &str) -> Result<Vec<TransferMap>> {
    if let Some(src) = bundled_sources(spec) {
        return src.iter().map(|(n, t)| checked(n, t)).collect();
    }
    let dir = Path::new(spec);
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "map") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!("no .map files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            checked(&name, &text)
        })
        .collect()
}

/// Exactly `blocks` walls, agent and goal placed uniformly at random, resampled until solvable.
pub fn scattered_blocks(width: usize, height: usize, blocks: usize, horizon: usize, seed: u64) -> Result<Grid> {
    let cfg = DesignConfig {
        width,
        height,
        block_budget: blocks,
        horizon,
    };
    cfg.validate()?;
    if blocks + 2 > cfg.free_tiles() {
        return Err(Error::invalid(format!(
            "{blocks} blocks do not fit in a {width}x{height} grid"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let g = random_design(&cfg, &mut rng, blocks..=blocks)?;
        if shortest_path_length(&g) > 0 {
            return Ok(g);
        }
    }
    Err(Error::invalid("could not place a solvable block layout"))
}

/// File text for a block-scatter map, with its provenance header.
pub fn scattered_blocks_file(width: usize, height: usize, blocks: usize, horizon: usize, seed: u64) -> Result<String> {
    let g = scattered_blocks(width, height, blocks, horizon, seed)?;
    Ok(format!(
        "; Block scatter: exactly {blocks} blocks placed uniformly at random with a guaranteed path.\n\
         ; Generated by harness::maps::scattered_blocks({width}, {height}, {blocks}, {horizon}, seed = {seed}).\n\
         {}",
        render_map(&g)
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_suites_are_valid() {
        for suite in ["desk", "paper"] {
            let maps = load_suite(suite).unwrap();
            let names: Vec<_> = maps.iter().map(|m| m.name.as_str()).collect();
            assert_eq!(names, SUITE_MAPS);
            for m in maps {
                m.grid.validate().unwrap();
                assert!(shortest_path_length(&m.grid) > 0);
            }
        }
    }

    #[test]
    fn block_maps_match_their_generator() {
        let (seed, k) = DESK_BLOCKS;
        let text = scattered_blocks_file(9, 9, k, 120, seed).unwrap();
        assert_eq!(text, DESK[1].1);
        let (seed, k) = PAPER_BLOCKS;
        let text = scattered_blocks_file(15, 15, k, 250, seed).unwrap();
        assert_eq!(text, PAPER[1].1);
        let g = parse_map(PAPER[1].1).unwrap();
        assert_eq!(g.interior_walls(), 50);
    }

    #[test]
    fn directory_suites_load_sorted() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.map"), DESK[0].1).unwrap();
        std::fs::write(dir.path().join("a.map"), DESK[4].1).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let maps = load_suite(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(maps.iter().map(|m| m.name.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        std::fs::write(dir.path().join("c.map"), "####\n#A>G#\n").unwrap();
        assert!(load_suite(dir.path().to_str().unwrap()).is_err());
    }
}
