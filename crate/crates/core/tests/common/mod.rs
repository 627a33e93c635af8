//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use ued_core::gridworld::{Grid, Pos, Tile};
use ued_core::learner::{loss_and_grad, Embedding, NetworkSpec, OptimConfig, OwnedInput, PolicyHandle, TrainEpisode};

/// Shortest start-to-goal length by exhaustive depth-first enumeration of simple paths; 0 if none.
pub fn enumerated_path_length(grid: &Grid) -> usize {
    fn walk(grid: &Grid, p: Pos, goal: Pos, seen: &mut Vec<bool>, len: usize, best: &mut Option<usize>) {
        if p == goal {
            *best = Some(best.map_or(len, |b| b.min(len)));
            return;
        }
        let w = grid.width();
        for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
            let (x, y) = (p.x as isize + dx, p.y as isize + dy);
            if grid.tile_or_wall(x, y) == Tile::Wall {
                continue;
            }
            let q = Pos::new(x as usize, y as usize);
            if !seen[q.y * w + q.x] {
                seen[q.y * w + q.x] = true;
                walk(grid, q, goal, seen, len + 1, best);
                seen[q.y * w + q.x] = false;
            }
        }
    }
    let start = grid.agent_start();
    let mut seen = vec![false; grid.width() * grid.height()];
    seen[start.y * grid.width() + start.x] = true;
    let mut best = None;
    walk(grid, start, grid.goal(), &mut seen, 0, &mut best);
    best.unwrap_or(0)
}

/// Upper-tail p-value of Pearson's statistic against equal expected counts.
pub fn chi_square_uniform_p(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Best antagonist return minus each protagonist return, averaged by explicit summation.
pub fn summed_regret_batch(antagonist: &[f64], protagonist: &[f64]) -> f64 {
    let mut best = antagonist[0];
    for &a in &antagonist[1..] {
        if a > best {
            best = a;
        }
    }
    let mut total = 0.0;
    for &p in protagonist {
        total += best - p;
    }
    total / protagonist.len() as f64
}

pub fn summed_regret_pop(returns: &[f64]) -> f64 {
    summed_regret_batch(returns, returns)
}

/// Random bordered grid of up to 9×9 with at most 25 non-wall tiles; the goal may be walled off.
pub fn small_random_grid(seed: u64) -> Grid {
    use ued_core::designer::{random_design, DesignConfig};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (w, h) = (rng.random_range(3..=9usize), rng.random_range(3..=9usize));
        let interior = (w - 2) * (h - 2);
        if interior < 2 {
            continue;
        }
        let lo = interior.saturating_sub(25);
        let hi = interior - 2;
        let cfg = DesignConfig {
            width: w,
            height: h,
            block_budget: hi,
            horizon: 4 * w * h,
        };
        return random_design(&cfg, &mut rng, lo..=hi).unwrap();
    }
}

/// Small recurrent network with every layer kind present.
pub fn small_spec() -> NetworkSpec {
    NetworkSpec {
        image: [3, 5, 5],
        conv_filters: 2,
        kernel: 3,
        embedding: Some(Embedding {
            categories: 4,
            width: 3,
        }),
        raw_inputs: 3,
        recurrent_width: 4,
        head_widths: [6, 5],
        n_actions: 3,
    }
}

pub fn random_episode(rng: &mut ChaCha8Rng, spec: &NetworkSpec, len: usize) -> TrainEpisode {
    let inputs: Vec<OwnedInput> = (0..len)
        .map(|_| OwnedInput {
            image: (0..spec.image_len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            category: Some(rng.random_range(0..4)),
            raw: (0..spec.raw_inputs).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    TrainEpisode {
        inputs,
        actions: (0..len).map(|_| rng.random_range(0..spec.n_actions)).collect(),
        old_log_probs: (0..len).map(|_| rng.random_range(-1.6..-0.6)).collect(),
        advantages: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
        returns: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Worst relative error between reverse-mode and central-difference gradients over `coords`
/// coordinates, visiting every parameter block in turn.
pub fn gradient_check(seed: u64, coords: usize) -> f64 {
    let spec = small_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = PolicyHandle::init(spec.clone(), &mut rng).unwrap();
    // scale up so every block carries signal
    for p in policy.params.iter_mut() {
        *p *= 1.5;
    }
    let eps: Vec<TrainEpisode> = (0..3).map(|i| random_episode(&mut rng, &spec, 4 + i)).collect();
    let refs: Vec<&TrainEpisode> = eps.iter().collect();
    let cfg = OptimConfig {
        entropy_coef: 0.05,
        ..OptimConfig::default()
    };
    let (_, grad) = loss_and_grad(&policy, &policy.params, &refs, &cfg).unwrap();
    let loss = |p: &[f64]| loss_and_grad(&policy, p, &refs, &cfg).unwrap().0.total;
    let h = 1e-5;
    let blocks: Vec<std::ops::Range<usize>> = [policy.policy_layout(), policy.value_layout()]
        .iter()
        .flat_map(|l| {
            [
                l.conv_w.clone(),
                l.conv_b.clone(),
                l.emb_w.clone(),
                l.emb_b.clone(),
                l.lstm_w.clone(),
                l.lstm_u.clone(),
                l.lstm_b.clone(),
                l.fc1_w.clone(),
                l.fc1_b.clone(),
                l.fc2_w.clone(),
                l.fc2_b.clone(),
                l.out_w.clone(),
                l.out_b.clone(),
            ]
        })
        .collect();
    let mut worst = 0.0f64;
    for k in 0..coords {
        let block = &blocks[k % blocks.len()];
        let i = rng.random_range(block.clone());
        let mut p = policy.params.clone();
        p[i] += h;
        let up = loss(&p);
        p[i] -= 2.0 * h;
        let down = loss(&p);
        let numeric = (up - down) / (2.0 * h);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max(rel);
    }
    worst
}
