//! Full-information online linear optimization over the simplex.
//!
//! The learner plays `x_t = grad E~(U_{t-1}; eta)` where `U_{t-1}` is the sum
//! of all reward vectors revealed so far and `E~` is the perspective of a GNL
//! surplus.

use crate::choice::{GnlModel, SimplexPoint};
use crate::error::{Error, Result};
use crate::verify::smoothness_constant;

/// What to do when a reward vector exceeds the configured bound `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundPolicy {
    #[default]
    Warn,
    Reject,
}

#[derive(Debug, Clone)]
pub struct ExpertsState {
    model: GnlModel,
    eta: f64,
    cumulative: Vec<f64>,
    steps: usize,
    gain: f64,
    bound: f64,
    policy: BoundPolicy,
}

impl ExpertsState {
    pub fn new(model: GnlModel, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::param("eta", format!("must be positive, got {eta}")));
        }
        let n = model.arms();
        Ok(ExpertsState {
            model,
            eta,
            cumulative: vec![0.0; n],
            steps: 0,
            gain: 0.0,
            bound: 1.0,
            policy: BoundPolicy::Warn,
        })
    }

    /// Sets the reward bound `K` and how violations are handled.
    pub fn with_reward_bound(mut self, bound: f64, policy: BoundPolicy) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::param(
                "K",
                format!("reward bound must be positive, got {bound}"),
            ));
        }
        self.bound = bound;
        self.policy = policy;
        Ok(self)
    }

    pub fn model(&self) -> &GnlModel {
        &self.model
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `sum_h <x_h, u_h>`.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// The decision the learner would play next.
    pub fn decision(&self) -> SimplexPoint {
        self.model
            .perspective_gradient(&self.cumulative, self.eta)
            .expect("eta validated at construction")
    }

    /// Plays one round: returns the decision made before `rewards` were
    /// revealed, then folds `rewards` into the state.
    pub fn step(&mut self, rewards: &[f64]) -> Result<SimplexPoint> {
        if rewards.len() != self.cumulative.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cumulative.len(),
                actual: rewards.len(),
            });
        }
        let worst = rewards.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst.is_nan() || worst > self.bound {
            match self.policy {
                BoundPolicy::Warn => log::warn!(
                    "round {}: reward magnitude {worst} exceeds bound {}",
                    self.steps + 1,
                    self.bound
                ),
                BoundPolicy::Reject => {
                    return Err(Error::RewardOutOfRange {
                        value: worst,
                        low: -self.bound,
                        high: self.bound,
                    })
                }
            }
        }
        let x = self.decision();
        self.gain += x.iter().zip(rewards).map(|(p, r)| p * r).sum::<f64>();
        for (acc, r) in self.cumulative.iter_mut().zip(rewards) {
            *acc += r;
        }
        self.steps += 1;
        Ok(x)
    }

    /// Regret against the best single expert so far.
    pub fn regret(&self) -> f64 {
        max_coordinate(&self.cumulative) - self.gain
    }
}

/// `max_i sum_t u_t^(i) - gain`. The best point of the simplex for a linear
/// reward is a vertex, so the maximum over coordinates is the maximum over
/// the simplex.
pub fn experts_regret(history: &[Vec<f64>], gain: f64) -> f64 {
    assert!(!history.is_empty(), "regret needs at least one round");
    let mut sums = vec![0.0; history[0].len()];
    for row in history {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    max_coordinate(&sums) - gain
}

fn max_coordinate(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Worst-case regret guarantee for the full-information learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretBound {
    /// `eta * alpha + L * K^2 * T / eta` at the given `eta`.
    pub at_eta: f64,
    /// `2 K sqrt(alpha L T)`, the bound at the best fixed `eta`.
    pub optimized: f64,
}

/// `alpha = E(0)`, `L` is the GNL smoothness constant of the unscaled surplus.
/// The sharper nested-logit constant (half the GNL one) is not used here.
pub fn theoretical_regret_bound(
    model: &GnlModel,
    eta: f64,
    bound: f64,
    horizon: usize,
) -> RegretBound {
    let alpha = model.surplus(&vec![0.0; model.arms()]);
    let smooth = smoothness_constant(model, 1.0);
    let t = horizon as f64;
    RegretBound {
        at_eta: eta * alpha + smooth * bound * bound * t / eta,
        optimized: 2.0 * bound * (alpha * smooth * t).sqrt(),
    }
}
