//! Trajectories, discounted returns, and the regret estimators used to reward
//! environment adversaries.
//!
//! Every function here is pure; callers decide which estimator feeds which learner.

use crate::error::{Error, Result};

/// One episode of interaction.
///
/// `observations` holds one more entry than `actions`/`rewards`: the initial
/// observation comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<O> {
    pub observations: Vec<O>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub terminated: bool,
}

impl<O> Trajectory<O> {
    pub fn new(initial: O) -> Self {
        Self {
            observations: vec![initial],
            actions: Vec::new(),
            rewards: Vec::new(),
            terminated: false,
        }
    }

    pub fn push(&mut self, action: usize, reward: f64, next: O) {
        self.actions.push(action);
        self.rewards.push(reward);
        self.observations.push(next);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Checks the shape invariants against the horizon of the producing POMDP.
    pub fn check(&self, horizon: usize) -> Result<()> {
        if self.rewards.len() != self.actions.len() {
            return Err(Error::contract("rewards and actions differ in length"));
        }
        if self.observations.len() != self.actions.len() + 1 {
            return Err(Error::contract(
                "observations must hold exactly one more entry than actions",
            ));
        }
        if self.len() > horizon {
            return Err(Error::contract(format!(
                "trajectory of length {} exceeds horizon {horizon}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// A discounted return together with the discount that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utility {
    pub value: f64,
    pub discount: f64,
}

/// Raw and non-negative regret along with the two statistics it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretEstimate {
    pub raw: f64,
    pub clamped: f64,
    pub antagonist_max: f64,
    pub protagonist_mean: f64,
}

impl RegretEstimate {
    /// The value handed to a learner: `clamped` when `clamp` is set, otherwise `raw`.
    pub fn signal(&self, clamp: bool) -> f64 {
        if clamp {
            self.clamped
        } else {
            self.raw
        }
    }
}

fn check_discount(discount: f64) -> Result<()> {
    if !(discount > 0.0 && discount <= 1.0) {
        return Err(Error::invalid(format!("discount {discount} outside (0, 1]")));
    }
    Ok(())
}

/// `Σ_t rewards[t] · discount^t`, indexing from zero.
pub fn discounted_return(rewards: &[f64], discount: f64) -> Result<Utility> {
    check_discount(discount)?;
    let mut value = 0.0;
    let mut weight = 1.0;
    for r in rewards {
        value += r * weight;
        weight *= discount;
    }
    Ok(Utility { value, discount })
}

/// Regret of the protagonist against the antagonist on a single environment.
pub fn regret_pair(antagonist_return: f64, protagonist_return: f64) -> f64 {
    antagonist_return - protagonist_return
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Batched estimator: best antagonist return minus mean protagonist return.
///
/// Both the raw and clamped values are filled in; [`RegretEstimate::signal`]
/// picks one according to the experiment's clamp flag.
pub fn regret_batch(antagonist_returns: &[f64], protagonist_returns: &[f64]) -> Result<RegretEstimate> {
    if antagonist_returns.is_empty() || protagonist_returns.is_empty() {
        return Err(Error::invalid("regret_batch needs non-empty return sequences"));
    }
    let antagonist_max = max(antagonist_returns);
    let protagonist_mean = mean(protagonist_returns);
    // mean of the gaps rather than gap of the means: exactly zero for identical returns
    let gaps: Vec<f64> = protagonist_returns.iter().map(|p| antagonist_max - p).collect();
    let raw = mean(&gaps);
    Ok(RegretEstimate {
        raw,
        clamped: raw.max(0.0),
        antagonist_max,
        protagonist_mean,
    })
}

/// Population regret: best member return minus the population mean.
pub fn regret_pop(population_returns: &[f64]) -> Result<f64> {
    if population_returns.is_empty() {
        return Err(Error::invalid("regret_pop needs a non-empty population"));
    }
    let best = max(population_returns);
    let gaps: Vec<f64> = population_returns.iter().map(|u| best - u).collect();
    Ok(mean(&gaps))
}

/// Per-step penalty `opponent_max_return / horizon`.
pub fn per_step_penalty(opponent_max_return: f64, horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::invalid("per_step_penalty needs horizon >= 1"));
    }
    Ok(opponent_max_return / horizon as f64)
}

/// Subtracts the per-step penalty from every collected reward in place.
///
/// Applied to the undiscounted reward stream, before any return is computed.
pub fn apply_per_step_penalty(rewards: &mut [f64], opponent_max_return: f64, horizon: usize) -> Result<()> {
    let penalty = per_step_penalty(opponent_max_return, horizon)?;
    for r in rewards.iter_mut() {
        *r -= penalty;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn discounted_return_examples() {
        assert_eq!(discounted_return(&[0.0, 0.0, 1.0], 0.5).unwrap().value, 0.25);
        assert_eq!(discounted_return(&[0.0, 0.0, 0.0], 0.995).unwrap().value, 0.0);
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 1.0).unwrap().value, 3.0);
        assert_eq!(discounted_return(&[], 0.9).unwrap().value, 0.0);
    }

    #[test]
    fn discount_out_of_range_is_rejected() {
        for d in [0.0, -0.5, 1.01, f64::NAN] {
            assert!(matches!(discounted_return(&[1.0], d), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn regret_pair_examples() {
        assert!((regret_pair(1.0, 0.3) - 0.7).abs() < 1e-15);
        assert_eq!(regret_pair(0.0, 0.0), 0.0);
        assert!((regret_pair(0.2, 0.9) + 0.7).abs() < 1e-15);
    }

    #[test]
    fn regret_batch_examples() {
        let est = regret_batch(&[0.5, 0.9], &[0.2, 0.4]).unwrap();
        assert!((est.raw - 0.6).abs() < 1e-12);

        let est = regret_batch(&[0.1], &[0.5, 0.5]).unwrap();
        assert_eq!(est.clamped, 0.0);
        assert_eq!(est.signal(true), 0.0);
        assert!((est.raw + 0.4).abs() < 1e-12);

        let est = regret_batch(&[0.37], &[0.37]).unwrap();
        assert_eq!(est.raw, 0.0);

        assert!(regret_batch(&[], &[1.0]).is_err());
        assert!(regret_batch(&[1.0], &[]).is_err());
    }

    #[test]
    fn regret_pop_examples() {
        assert_eq!(regret_pop(&[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(regret_pop(&[0.4, 0.4, 0.4]).unwrap(), 0.0);
        assert_eq!(regret_pop(&[5.0]).unwrap(), 0.0);
        assert!(regret_pop(&[]).is_err());
    }

    #[test]
    fn per_step_penalty_examples() {
        assert!((per_step_penalty(0.91, 250).unwrap() - 0.00364).abs() < 1e-15);
        assert_eq!(per_step_penalty(0.0, 250).unwrap(), 0.0);
        assert_eq!(per_step_penalty(1.0, 1).unwrap(), 1.0);
        assert!(per_step_penalty(1.0, 0).is_err());
    }

    #[test]
    fn trajectory_shape_checks() {
        let mut t = Trajectory::new(0u8);
        t.push(1, 0.0, 1);
        t.push(2, 1.0, 2);
        assert!(t.check(2).is_ok());
        assert!(t.check(1).is_err());
        t.observations.pop();
        assert!(t.check(5).is_err());
    }

    proptest! {
        #[test]
        fn regret_pair_is_antisymmetric(a in -10.0f64..10.0, p in -10.0f64..10.0) {
            prop_assert_eq!(regret_pair(a, p), -regret_pair(p, a));
        }

        #[test]
        fn singleton_batch_matches_pair(a in -10.0f64..10.0, p in -10.0f64..10.0) {
            let est = regret_batch(&[a], &[p]).unwrap();
            prop_assert_eq!(est.raw, regret_pair(a, p));
        }

        #[test]
        fn regret_pop_nonnegative(xs in prop::collection::vec(-5.0f64..5.0, 1..12)) {
            let r = regret_pop(&xs).unwrap();
            prop_assert!(r >= -1e-12);
            let all_equal = xs.iter().all(|x| *x == xs[0]);
            if !all_equal {
                prop_assert!(r > 0.0);
            }
        }

        #[test]
        fn discounted_return_is_linear(
            pairs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 0..40),
            discount in 0.01f64..=1.0,
        ) {
            let r1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let r2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let sum: Vec<f64> = pairs.iter().map(|p| p.0 + p.1).collect();
            let lhs = discounted_return(&sum, discount).unwrap().value;
            let rhs = discounted_return(&r1, discount).unwrap().value
                + discounted_return(&r2, discount).unwrap().value;
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn penalty_over_length_steps(
            rewards in prop::collection::vec(0.0f64..1.0, 1..60),
            opp in 0.0f64..1.0,
            extra in 0usize..200,
        ) {
            let horizon = rewards.len() + extra;
            let before: f64 = rewards.iter().sum();
            let mut penalised = rewards.clone();
            apply_per_step_penalty(&mut penalised, opp, horizon).unwrap();
            let after: f64 = penalised.iter().sum();
            let expected = opp * rewards.len() as f64 / horizon as f64;
            prop_assert!((before - after - expected).abs() < 1e-9);
        }
    }
}
