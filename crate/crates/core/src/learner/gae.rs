/// Generalized advantage estimates for one episode.
///
/// `values[t]` is the critic's estimate at step `t`; `bootstrap` stands in for
/// the value after the last step (0 when the episode terminated).
pub fn gae_advantages(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), values.len(), "rewards and values must be aligned");
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    adv
}

/// Value-regression targets: advantage plus the baseline it was measured against.
pub fn returns_from_advantages(advantages: &[f64], values: &[f64]) -> Vec<f64> {
    advantages.iter().zip(values).map(|(a, v)| a + v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct double sum over the definition.
    fn oracle(r: &[f64], v: &[f64], boot: f64, g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let val = |t: usize| if t < n { v[t] } else { boot };
        (0..n)
            .map(|t| {
                (t..n)
                    .map(|k| {
                        let delta = r[k] + g * val(k + 1) - v[k];
                        (g * l).powi((k - t) as i32) * delta
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [0.0, 0.5, 1.0];
        let v = [0.2, 0.4, 0.1];
        let a = gae_advantages(&r, &v, 0.0, 0.9, 0.0);
        assert_eq!(a[0], 0.0 + 0.9 * 0.4 - 0.2);
        assert_eq!(a[1], 0.5 + 0.9 * 0.1 - 0.4);
        assert_eq!(a[2], 1.0 - 0.1);
    }

    #[test]
    fn lambda_one_zero_values_is_return_to_go() {
        let r = [1.0, 0.0, 2.0];
        let a = gae_advantages(&r, &[0.0; 3], 0.0, 0.5, 1.0);
        assert_eq!(a, vec![1.0 + 0.25 * 2.0, 0.5 * 2.0, 2.0]);
    }

    #[test]
    fn matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let r: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let boot = rng.random_range(-1.0..1.0);
            let g = rng.random_range(0.0..=1.0);
            let l = rng.random_range(0.0..=1.0);
            let a = gae_advantages(&r, &v, boot, g, l);
            for (x, y) in a.iter().zip(oracle(&r, &v, boot, g, l)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
