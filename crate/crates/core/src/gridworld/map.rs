//! ASCII map format.
//!
//! ```text
//! ;horizon=120          optional directive; other ';' lines are comments
//! #######
//! #A>..G#               '#' wall, '.' floor, 'G' goal,
//! #######               'A' + one of > v < ^ is the agent (one tile, two characters)
//! ```
//!
//! Rows must contain the same number of tiles. Without a horizon directive the
//! paper-scale horizon applies.

use super::{Direction, Grid, Pos, Tile, PAPER_HORIZON};
use crate::error::{Error, Result};

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

pub fn parse_map(text: &str) -> Result<Grid> {
    let mut horizon = PAPER_HORIZON;
    let mut rows: Vec<Vec<Tile>> = Vec::new();
    let mut agent: Option<(Pos, Direction, usize, usize)> = None;
    let mut goal: Option<(usize, usize)> = None;
    let mut width: Option<(usize, usize)> = None;

    for (li, raw) in text.lines().enumerate() {
        let line_no = li + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(rest) = line.strip_prefix(';') {
            if let Some(v) = rest.trim().strip_prefix("horizon=") {
                horizon = v
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line_no, 1, format!("bad horizon `{}`", v.trim())))?;
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let y = rows.len();
        let mut row = Vec::new();
        let chars: Vec<char> = line.chars().collect();
        let mut ci = 0;
        while ci < chars.len() {
            let col_no = ci + 1;
            let x = row.len();
            match chars[ci] {
                '#' => row.push(Tile::Wall),
                '.' => row.push(Tile::Floor),
                'G' => {
                    if let Some((gl, gc)) = goal {
                        return Err(parse_err(
                            line_no,
                            col_no,
                            format!("duplicate goal (first at line {gl}, column {gc})"),
                        ));
                    }
                    goal = Some((line_no, col_no));
                    row.push(Tile::Goal);
                }
                'A' => {
                    let dir = match chars.get(ci + 1) {
                        Some('>') => Direction::East,
                        Some('v') => Direction::South,
                        Some('<') => Direction::West,
                        Some('^') => Direction::North,
                        _ => {
                            return Err(parse_err(
                                line_no,
                                col_no + 1,
                                "agent marker `A` must be followed by one of > v < ^",
                            ))
                        }
                    };
                    if let Some((_, _, al, ac)) = agent {
                        return Err(parse_err(
                            line_no,
                            col_no,
                            format!("duplicate agent (first at line {al}, column {ac})"),
                        ));
                    }
                    agent = Some((Pos::new(x, y), dir, line_no, col_no));
                    row.push(Tile::Floor);
                    ci += 1;
                }
                c => return Err(parse_err(line_no, col_no, format!("unexpected character `{c}`"))),
            }
            ci += 1;
        }
        match width {
            None => width = Some((row.len(), line_no)),
            Some((w, first)) if w != row.len() => {
                return Err(parse_err(
                    line_no,
                    line.len() + 1,
                    format!("ragged row: {} tiles, line {first} has {w}", row.len()),
                ))
            }
            _ => {}
        }
        rows.push(row);
    }

    let Some((width, _)) = width else {
        return Err(parse_err(1, 1, "map contains no rows"));
    };
    let height = rows.len();
    let Some((start, dir, _, _)) = agent else {
        return Err(parse_err(height.max(1), 1, "map has no agent"));
    };
    if goal.is_none() {
        return Err(parse_err(height.max(1), 1, "map has no goal"));
    }
    let cells = rows.into_iter().flatten().collect();
    Grid::new(width, height, cells, start, dir, horizon)
}

pub fn render_map(grid: &Grid) -> String {
    let mut out = format!(";horizon={}\n", grid.horizon());
    let start = grid.agent_start();
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let p = Pos::new(x, y);
            if p == start {
                out.push('A');
                out.push(match grid.agent_start_dir() {
                    Direction::East => '>',
                    Direction::South => 'v',
                    Direction::West => '<',
                    Direction::North => '^',
                });
                continue;
            }
            out.push(match grid.tile(p) {
                Tile::Wall => '#',
                Tile::Floor => '.',
                Tile::Goal => 'G',
            });
        }
        out.push('\n');
    }
    out
}
