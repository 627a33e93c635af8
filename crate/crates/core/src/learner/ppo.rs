use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gae::{gae_advantages, returns_from_advantages};
use super::net::{NetInput, OwnedInput};
use super::policy::{log_softmax, PolicyHandle};
use crate::error::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub discount: f64,
    pub learning_rate: f64,
    pub clip_ratio: f64,
    pub gae_lambda: f64,
    pub policy_coef: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub workers_per_batch: usize,
    pub epochs: usize,
    /// Episodes per minibatch; each episode is unrolled in full.
    pub minibatch_episodes: usize,
    pub max_grad_norm: Option<f64>,
    pub optimizer: OptimizerKind,
    pub normalize_advantages: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            discount: 0.995,
            learning_rate: 1e-4,
            clip_ratio: 0.2,
            gae_lambda: 0.95,
            policy_coef: 1.0,
            value_coef: 0.5,
            entropy_coef: 0.0,
            workers_per_batch: 30,
            epochs: 4,
            minibatch_episodes: 10,
            max_grad_norm: Some(0.5),
            optimizer: OptimizerKind::Sgd,
            normalize_advantages: true,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.discount) {
            return Err(Error::config("discount", "must lie in [0, 1]"));
        }
        if !unit(self.gae_lambda) {
            return Err(Error::config("gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.clip_ratio > 0.0) {
            return Err(Error::config("clip_ratio", "must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive and finite"));
        }
        for (v, name) in [
            (self.policy_coef, "policy_coef"),
            (self.value_coef, "value_coef"),
            (self.entropy_coef, "entropy_coef"),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be non-negative and finite"));
            }
        }
        if self.workers_per_batch == 0 {
            return Err(Error::config("workers_per_batch", "must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be >= 1"));
        }
        if self.minibatch_episodes == 0 {
            return Err(Error::config("minibatch_episodes", "must be >= 1"));
        }
        if let Some(g) = self.max_grad_norm {
            if !(g > 0.0) {
                return Err(Error::config("max_grad_norm", "must be positive when set"));
            }
        }
        Ok(())
    }
}

/// Optimizer moments, carried across updates and stored in checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        let n = if kind == OptimizerKind::Adam { n_params } else { 0 };
        OptimizerState {
            kind,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn apply(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    self.m = vec![0.0; params.len()];
                    self.v = vec![0.0; params.len()];
                }
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
                    self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
                    params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// One episode as collected by the behaviour policy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Episode {
    pub inputs: Vec<OwnedInput>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn undiscounted_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    fn check(&self) -> Result<()> {
        let n = self.actions.len();
        if self.inputs.len() != n || self.log_probs.len() != n || self.values.len() != n || self.rewards.len() != n {
            return Err(Error::invalid("episode buffers have mismatched lengths"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub episodes: Vec<Episode>,
}

impl RolloutBatch {
    pub fn steps(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }
}

/// An episode with its fixed optimization targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainEpisode {
    pub inputs: Vec<OwnedInput>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// Builds training targets: GAE advantages (optionally standardized over the batch) and returns.
pub fn prepare_batch(batch: &RolloutBatch, cfg: &OptimConfig) -> Result<Vec<TrainEpisode>> {
    let mut out = Vec::with_capacity(batch.episodes.len());
    for ep in &batch.episodes {
        ep.check()?;
        if ep.is_empty() {
            continue;
        }
        let adv = gae_advantages(&ep.rewards, &ep.values, 0.0, cfg.discount, cfg.gae_lambda);
        let returns = returns_from_advantages(&adv, &ep.values);
        out.push(TrainEpisode {
            inputs: ep.inputs.clone(),
            actions: ep.actions.clone(),
            old_log_probs: ep.log_probs.clone(),
            advantages: adv,
            returns,
        });
    }
    if cfg.normalize_advantages {
        let all: Vec<f64> = out.iter().flat_map(|e| e.advantages.iter().copied()).collect();
        if all.len() > 1 {
            let n = all.len() as f64;
            let mean = all.iter().sum::<f64>() / n;
            let var = all.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt() + 1e-8;
            for e in &mut out {
                for a in &mut e.advantages {
                    *a = (*a - mean) / sd;
                }
            }
        }
    }
    Ok(out)
}

/// Clipped-surrogate loss averaged over every step of `episodes`, and its
/// gradient with respect to `params`, by backpropagation through each full unroll.
pub fn loss_and_grad(
    policy: &PolicyHandle,
    params: &[f64],
    episodes: &[&TrainEpisode],
    cfg: &OptimConfig,
) -> Result<(LossStats, Vec<f64>)> {
    let n_steps: usize = episodes.iter().map(|e| e.actions.len()).sum();
    let mut grad = vec![0.0; params.len()];
    let mut stats = LossStats::default();
    if n_steps == 0 {
        return Ok((stats, grad));
    }
    let w = 1.0 / n_steps as f64;
    let eps = cfg.clip_ratio;
    let mut clipped = 0usize;
    for ep in episodes {
        let inputs: Vec<NetInput> = ep.inputs.iter().map(OwnedInput::view).collect();
        for i in &inputs {
            policy.check_input(i)?;
        }
        let (logits, values, pc, vc) = policy.unroll(params, &inputs);
        let mut d_logits = Vec::with_capacity(logits.len());
        let mut d_values = Vec::with_capacity(values.len());
        for t in 0..ep.actions.len() {
            let a = ep.actions[t];
            let logp = log_softmax(&logits[t]);
            let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            let adv = ep.advantages[t];
            let log_ratio = logp[a] - ep.old_log_probs[t];
            let ratio = log_ratio.exp();
            let unclipped = ratio * adv;
            let clipped_term = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
            let surrogate = unclipped.min(clipped_term);
            let d_logp = if unclipped <= clipped_term { ratio * adv } else { 0.0 };
            if unclipped > clipped_term {
                clipped += 1;
            }
            let entropy: f64 = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
            let v_err = values[t] - ep.returns[t];

            stats.policy -= w * surrogate;
            stats.value += w * 0.5 * v_err * v_err;
            stats.entropy += w * entropy;
            stats.approx_kl += w * ((ratio - 1.0) - log_ratio);

            let dl: Vec<f64> = (0..probs.len())
                .map(|k| {
                    let onehot = if k == a { 1.0 } else { 0.0 };
                    let d_surr = -cfg.policy_coef * d_logp * (onehot - probs[k]);
                    let d_ent = cfg.entropy_coef * probs[k] * (logp[k] + entropy);
                    w * (d_surr + d_ent)
                })
                .collect();
            d_logits.push(dl);
            d_values.push(vec![w * cfg.value_coef * v_err]);
        }
        policy.policy_tower().backward(params, &pc, &d_logits, &mut grad);
        policy.value_tower().backward(params, &vc, &d_values, &mut grad);
    }
    stats.total = cfg.policy_coef * stats.policy + cfg.value_coef * stats.value - cfg.entropy_coef * stats.entropy;
    stats.clip_fraction = clipped as f64 / n_steps as f64;
    stats.grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok((stats, grad))
}

/// Several epochs of minibatch descent on a collected batch.
///
/// On a non-finite loss or gradient the parameters are restored and the
/// diagnostics are returned as an error.
pub fn update<R: Rng + ?Sized>(
    policy: &mut PolicyHandle,
    optimizer: &mut OptimizerState,
    batch: &RolloutBatch,
    cfg: &OptimConfig,
    rng: &mut R,
) -> Result<LossStats> {
    cfg.validate()?;
    let episodes = prepare_batch(batch, cfg)?;
    let mut order: Vec<usize> = (0..episodes.len()).collect();
    let snapshot = (policy.params.clone(), optimizer.clone());
    let mut last = LossStats::default();
    let mut params = std::mem::take(&mut policy.params);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_episodes) {
            let mb: Vec<&TrainEpisode> = chunk.iter().map(|&i| &episodes[i]).collect();
            let (stats, mut grad) = match loss_and_grad(policy, &params, &mb, cfg) {
                Ok(r) => r,
                Err(e) => {
                    (policy.params, *optimizer) = snapshot;
                    return Err(e);
                }
            };
            if !stats.total.is_finite() || !stats.grad_norm.is_finite() {
                (policy.params, *optimizer) = snapshot;
                return Err(Error::NonFinite(format!(
                    "update aborted at epoch {epoch}: policy loss {}, value loss {}, entropy {}, grad norm {}",
                    stats.policy, stats.value, stats.entropy, stats.grad_norm
                )));
            }
            if let Some(max) = cfg.max_grad_norm {
                if stats.grad_norm > max {
                    let s = max / stats.grad_norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            optimizer.apply(&mut params, &grad, cfg.learning_rate);
            last = stats;
        }
    }
    policy.params = params;
    policy.reset_state();
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{Embedding, NetworkSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> NetworkSpec {
        NetworkSpec {
            image: [3, 4, 4],
            conv_filters: 2,
            kernel: 3,
            embedding: Some(Embedding {
                categories: 4,
                width: 3,
            }),
            raw_inputs: 2,
            recurrent_width: 4,
            head_widths: [5, 3],
            n_actions: 3,
        }
    }

    fn rollout(policy: &mut PolicyHandle, rng: &mut ChaCha8Rng, len: usize) -> Episode {
        policy.reset_state();
        let mut ep = Episode::default();
        for t in 0..len {
            let image: Vec<f64> = (0..policy.spec.image_len())
                .map(|_| rng.random_range(0.0..1.0))
                .collect();
            let raw: Vec<f64> = (0..policy.spec.raw_inputs)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let input = OwnedInput {
                image,
                category: Some(t % 4),
                raw,
            };
            let out = policy.act(&input.view(), rng).unwrap();
            ep.inputs.push(input);
            ep.actions.push(out.action);
            ep.log_probs.push(out.log_prob);
            ep.values.push(out.value);
            ep.rewards.push(rng.random_range(0.0..1.0));
        }
        ep
    }

    #[test]
    fn zero_advantage_only_moves_value_tower() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = PolicyHandle::init(tiny(), &mut rng).unwrap();
        let ep = rollout(&mut p, &mut rng, 5);
        let te = TrainEpisode {
            inputs: ep.inputs.clone(),
            actions: ep.actions.clone(),
            old_log_probs: ep.log_probs.clone(),
            advantages: vec![0.0; 5],
            returns: vec![1.0; 5],
        };
        let cfg = OptimConfig::default();
        let (_, g) = loss_and_grad(&p, &p.params, &[&te], &cfg).unwrap();
        let pr = p.policy_layout().range();
        assert!(g[pr].iter().all(|v| *v == 0.0));
        assert!(g[p.value_layout().range()].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn single_step_unclipped_gradient_is_ratio_times_advantage() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut p = PolicyHandle::init(tiny(), &mut rng).unwrap();
        let ep = rollout(&mut p, &mut rng, 1);
        let adv = 0.7;
        // on-policy: ratio 1, so d loss / d logits = -A (onehot - p)
        let te = TrainEpisode {
            inputs: ep.inputs.clone(),
            actions: ep.actions.clone(),
            old_log_probs: ep.log_probs.clone(),
            advantages: vec![adv],
            returns: ep.values.clone(),
        };
        let cfg = OptimConfig {
            entropy_coef: 0.0,
            ..OptimConfig::default()
        };
        let (stats, g) = loss_and_grad(&p, &p.params, &[&te], &cfg).unwrap();
        assert!((stats.policy + adv).abs() < 1e-12);
        let l = p.policy_layout();
        let (logits, _, _, _) = p.unroll(&p.params, &[te.inputs[0].view()]);
        let probs: Vec<f64> = log_softmax(&logits[0]).iter().map(|x| x.exp()).collect();
        // the output bias gradient is exactly d loss / d logits
        for k in 0..3 {
            let onehot = if k == te.actions[0] { 1.0 } else { 0.0 };
            let want = -adv * (onehot - probs[k]);
            assert!((g[l.out_b.start + k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn value_only_training_decreases_value_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut p = PolicyHandle::init(tiny(), &mut rng).unwrap();
        let batch = RolloutBatch {
            episodes: (0..4).map(|_| rollout(&mut p, &mut rng, 6)).collect(),
        };
        let cfg = OptimConfig {
            policy_coef: 0.0,
            entropy_coef: 0.0,
            epochs: 1,
            minibatch_episodes: 4,
            learning_rate: 1e-2,
            max_grad_norm: None,
            ..OptimConfig::default()
        };
        let targets = prepare_batch(&batch, &cfg).unwrap();
        let refs: Vec<&TrainEpisode> = targets.iter().collect();
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, p.params.len());
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let (stats, g) = loss_and_grad(&p, &p.params, &refs, &cfg).unwrap();
            assert!(stats.value < prev, "value loss rose: {} -> {}", prev, stats.value);
            prev = stats.value;
            let mut params = std::mem::take(&mut p.params);
            opt.apply(&mut params, &g, cfg.learning_rate);
            p.params = params;
        }
    }

    #[test]
    fn update_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut p = PolicyHandle::init(tiny(), &mut rng).unwrap();
        let batch = RolloutBatch {
            episodes: (0..5).map(|_| rollout(&mut p, &mut rng, 4)).collect(),
        };
        let cfg = OptimConfig {
            optimizer: OptimizerKind::Adam,
            minibatch_episodes: 2,
            ..OptimConfig::default()
        };
        let run = || {
            let mut q = p.clone();
            let mut opt = OptimizerState::new(cfg.optimizer, q.params.len());
            let mut r = ChaCha8Rng::seed_from_u64(99);
            update(&mut q, &mut opt, &batch, &cfg, &mut r).unwrap();
            (q.params, opt)
        };
        let (a, oa) = run();
        let (b, ob) = run();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
        assert_ne!(a, p.params);
    }

    #[test]
    fn non_finite_reward_aborts_and_restores() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut p = PolicyHandle::init(tiny(), &mut rng).unwrap();
        let mut ep = rollout(&mut p, &mut rng, 3);
        ep.rewards[1] = f64::NAN;
        let before = p.params.clone();
        let cfg = OptimConfig::default();
        let mut opt = OptimizerState::new(cfg.optimizer, p.params.len());
        let err = update(&mut p, &mut opt, &RolloutBatch { episodes: vec![ep] }, &cfg, &mut rng);
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(p.params, before);
        assert_eq!(opt.step, 0);
    }
}
