//! Zero-shot transfer evaluation of frozen agents.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::maps::TransferMap;
use crate::error::Result;
use crate::learner::{OptimConfig, PolicyHandle};
use crate::ued::{run_nav_episode, PpoLearner};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapResult {
    pub name: String,
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn trial_seed(eval_seed: u64, map: usize, policy: usize, seed: usize, trial: usize) -> u64 {
    [map as u64, policy as u64, seed as u64, trial as u64]
        .iter()
        .fold(eval_seed ^ 0x5EED_0F_E7A1, |acc, v| {
            let mut x = acc ^ v.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            x ^ (x >> 31)
        })
}

/// Successes of one policy under one evaluation seed, per map.
fn run_unit(
    policy: &PolicyHandle,
    maps: &[TransferMap],
    trials: usize,
    eval_seed: u64,
    pi: usize,
    si: usize,
) -> Result<Vec<usize>> {
    let mut agent = PpoLearner::new(policy.clone(), OptimConfig::default());
    maps.iter()
        .enumerate()
        .map(|(mi, m)| {
            let mut wins = 0;
            for t in 0..trials {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(eval_seed, mi, pi, si, t));
                if run_nav_episode(&mut agent, &m.grid, &mut rng)?.1 {
                    wins += 1;
                }
            }
            Ok(wins)
        })
        .collect()
}

/// Runs `trials_per_map` sampled-action episodes per map for every
/// (policy, evaluation seed) pair and pools the successes per map.
/// Results do not depend on `workers`.
pub fn evaluate(
    policies: &[PolicyHandle],
    maps: &[TransferMap],
    trials_per_map: usize,
    seeds: usize,
    eval_seed: u64,
    workers: usize,
) -> Result<Vec<MapResult>> {
    let units: Vec<(usize, usize)> = (0..policies.len())
        .flat_map(|p| (0..seeds).map(move |s| (p, s)))
        .collect();
    let workers = workers.clamp(1, units.len().max(1));
    let mut per_unit: Vec<Option<Result<Vec<usize>>>> = (0..units.len()).map(|_| None).collect();
    let size = units.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        for (ci, chunk) in per_unit.chunks_mut(size).enumerate() {
            let units = &units;
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let (p, s) = units[ci * size + k];
                    *slot = Some(run_unit(&policies[p], maps, trials_per_map, eval_seed, p, s));
                }
            });
        }
    });
    let mut wins = vec![0usize; maps.len()];
    for r in per_unit {
        for (w, x) in wins.iter_mut().zip(r.expect("every unit ran")?) {
            *w += x;
        }
    }
    let trials = units.len() * trials_per_map;
    Ok(maps
        .iter()
        .zip(wins)
        .map(|(m, s)| {
            let (lo, hi) = wilson_interval(s, trials);
            MapResult {
                name: m.name.clone(),
                successes: s,
                trials,
                rate: if trials == 0 { 0.0 } else { s as f64 / trials as f64 },
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect())
}

pub fn format_table(results: &[MapResult]) -> String {
    let mut out = format!("{:<16} {:>9} {:>8} {:>17}\n", "map", "success", "rate", "95% CI");
    for r in results {
        out += &format!(
            "{:<16} {:>4}/{:<4} {:>7.1}% [{:>5.1}%, {:>5.1}%]\n",
            r.name,
            r.successes,
            r.trials,
            100.0 * r.rate,
            100.0 * r.ci_low,
            100.0 * r.ci_high
        );
    }
    out
}
