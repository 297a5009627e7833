//! GNL multiarmed bandit learner.
//!
//! Each round the learner samples an arm from `x_t = grad E~(U_hat; eta)`,
//! observes only that arm's reward `r`, and adds the importance-weighted
//! estimate `r / x_t[arm]` to the arm's coordinate of `U_hat`.
//!
//! Two things are configurable beyond the model and `eta`:
//!
//! * [`RewardMode`]: the loss-only setting (rewards in `[-1, 0]`, where the
//!   regret guarantee holds) or nonnegative rewards in `[0, 1]`.
//! * [`Estimator`]: which per-arm utilities feed the sampling distribution.
//!   `ImportanceWeighted` uses the cumulative estimates `U_hat` directly.
//!   `EmpiricalMean` uses each arm's average observed reward; with Bernoulli
//!   rewards this is the configuration whose average rewards match the
//!   published stochastic experiments. `U_hat` is maintained either way.

use crate::choice::{GnlModel, SimplexPoint};
use crate::env::RngStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// Rewards in `[-1, 0]`.
    LossOnly,
    /// Rewards in `[0, 1]`.
    Reward,
}

impl RewardMode {
    pub fn range(self) -> (f64, f64) {
        match self {
            RewardMode::LossOnly => (-1.0, 0.0),
            RewardMode::Reward => (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    ImportanceWeighted,
    EmpiricalMean,
}

/// One round's result.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmOutcome {
    pub arm: usize,
    pub observed: f64,
    /// The distribution `arm` was drawn from.
    pub sampling_probs: SimplexPoint,
}

#[derive(Debug, Clone)]
pub struct BanditState {
    model: GnlModel,
    eta: f64,
    mode: RewardMode,
    estimator: Estimator,
    estimates: Vec<f64>,
    reward_sums: Vec<f64>,
    plays: Vec<u64>,
    steps: u64,
}

impl BanditState {
    pub fn new(model: GnlModel, eta: f64, mode: RewardMode) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::param("eta", format!("must be positive, got {eta}")));
        }
        let n = model.arms();
        Ok(BanditState {
            model,
            eta,
            mode,
            estimator: Estimator::ImportanceWeighted,
            estimates: vec![0.0; n],
            reward_sums: vec![0.0; n],
            plays: vec![0; n],
            steps: 0,
        })
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn model(&self) -> &GnlModel {
        &self.model
    }

    pub fn mode(&self) -> RewardMode {
        self.mode
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    /// Cumulative importance-weighted estimates `U_hat`.
    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn plays(&self) -> &[u64] {
        &self.plays
    }

    pub fn reward_sums(&self) -> &[f64] {
        &self.reward_sums
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Utilities handed to the choice model, before the `1/eta` scaling.
    pub fn sampling_utilities(&self) -> Vec<f64> {
        match self.estimator {
            Estimator::ImportanceWeighted => self.estimates.clone(),
            Estimator::EmpiricalMean => self
                .reward_sums
                .iter()
                .zip(&self.plays)
                .map(|(&s, &k)| if k == 0 { 0.0 } else { s / k as f64 })
                .collect(),
        }
    }

    pub fn distribution(&self) -> SimplexPoint {
        self.model
            .perspective_gradient(&self.sampling_utilities(), self.eta)
            .expect("eta validated at construction")
    }

    /// Draws an arm with the given uniform variate.
    pub fn sample_with(&self, variate: f64) -> (usize, SimplexPoint) {
        let probs = self.distribution();
        (sample_index(&probs, variate), probs)
    }

    /// Draws an arm using one variate from `rng`.
    pub fn sample(&self, rng: &mut RngStream) -> (usize, SimplexPoint) {
        self.sample_with(rng.next_uniform())
    }

    /// Folds the reward observed on `arm` (drawn from `probs`) into the state.
    pub fn update(&mut self, arm: usize, probs: SimplexPoint, reward: f64) -> Result<ArmOutcome> {
        let (low, high) = self.mode.range();
        if !(low..=high).contains(&reward) {
            return Err(Error::RewardOutOfRange {
                value: reward,
                low,
                high,
            });
        }
        if arm >= self.estimates.len() {
            return Err(Error::ArmOutOfRange {
                arm,
                arms: self.estimates.len(),
            });
        }
        let outcome = ArmOutcome {
            arm,
            observed: reward,
            sampling_probs: probs,
        };
        self.estimates[arm] += importance_weight(&outcome);
        self.reward_sums[arm] += reward;
        self.plays[arm] += 1;
        self.steps += 1;
        Ok(outcome)
    }

    /// One full round against a reward oracle for the sampled arm.
    pub fn step<F>(&mut self, rng: &mut RngStream, reward_of: F) -> Result<ArmOutcome>
    where
        F: FnOnce(usize) -> Result<f64>,
    {
        let (arm, probs) = self.sample(rng);
        let reward = reward_of(arm)?;
        self.update(arm, probs, reward)
    }
}

/// Inverse-CDF draw: the first arm whose cumulative probability, summed in
/// ascending arm order, strictly exceeds `variate`. Rounding can leave the
/// total just under one; such variates fall to the last arm with positive
/// probability (trailing arms may have underflowed to zero).
pub fn sample_index(probs: &[f64], variate: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if cumulative > variate {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

fn importance_weight(outcome: &ArmOutcome) -> f64 {
    let p = outcome.sampling_probs[outcome.arm];
    assert!(p > 0.0, "sampled arm {} has zero probability", outcome.arm);
    outcome.observed / p
}

/// The one-hot estimate `r / x[arm] * e_arm`.
pub fn importance_estimate(outcome: &ArmOutcome, arms: usize) -> Vec<f64> {
    let mut v = vec![0.0; arms];
    v[outcome.arm] = importance_weight(outcome);
    v
}

/// `eta * E(0) + n T / (eta * min_l mu_l)`: the expected-regret guarantee for
/// the loss-only setting.
pub fn expected_regret_bound(model: &GnlModel, eta: f64, horizon: usize) -> f64 {
    let n = model.arms() as f64;
    let e0 = model.surplus(&vec![0.0; model.arms()]);
    eta * e0 + n * horizon as f64 / (model.min_nest_scale() * eta)
}
