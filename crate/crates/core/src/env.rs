//! Reward generators and the seeded random streams that drive them.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Which half of a repetition's randomness a stream serves. The environment
/// and the learner never share variates, so swapping the learner leaves the
/// reward sequence untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    Environment,
    Learner,
}

/// A deterministic stream of uniform variates.
///
/// Backed by ChaCha20 keyed with the little-endian bytes of `seed` (zero
/// padded to 32 bytes) and positioned on the 64-bit stream id. A variate is
/// the top 53 bits of the next `u64` scaled by `2^-53`, so it lies in
/// `[0, 1)` and is identical on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    /// Repetition `r` uses stream `2r` for the environment and `2r + 1` for
    /// the learner.
    pub fn for_repetition(seed: u64, repetition: u64, which: Substream) -> Self {
        let offset = match which {
            Substream::Environment => 0,
            Substream::Learner => 1,
        };
        RngStream::new(seed, 2 * repetition + offset)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[low, high)`.
    pub fn uniform_in(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.next_uniform()
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        ((self.next_uniform() * bound as f64) as usize).min(bound - 1)
    }
}

/// Stochastic bandit with independent Bernoulli arms.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliEnv {
    means: Vec<f64>,
}

impl BernoulliEnv {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::param("pis", "environment needs at least one arm"));
        }
        if let Some(bad) = means.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::param(
                "pis",
                format!("success probability {bad} is outside [0, 1]"),
            ));
        }
        Ok(BernoulliEnv { means })
    }

    pub fn arms(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Index of the best arm (first one on ties).
    pub fn best_arm(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.means.iter().enumerate() {
            if p > self.means[best] {
                best = i;
            }
        }
        best
    }

    pub fn best_mean(&self) -> f64 {
        self.means[self.best_arm()]
    }

    /// One reward from `arm`: 1 iff the next variate is below its mean.
    pub fn draw(&self, arm: usize, rng: &mut RngStream) -> Result<f64> {
        let p = *self.means.get(arm).ok_or(Error::ArmOutOfRange {
            arm,
            arms: self.arms(),
        })?;
        Ok(bernoulli(p, rng.next_uniform()))
    }

    /// A full reward vector, one variate per arm in ascending order.
    pub fn draw_all(&self, rng: &mut RngStream) -> Vec<f64> {
        self.means
            .iter()
            .map(|&p| bernoulli(p, rng.next_uniform()))
            .collect()
    }
}

fn bernoulli(p: f64, variate: f64) -> f64 {
    if variate < p {
        1.0
    } else {
        0.0
    }
}

/// Four-armed stochastic environment used for the first set of experiments.
pub fn env1() -> BernoulliEnv {
    BernoulliEnv {
        means: vec![0.2, 0.8, 0.87, 0.15],
    }
}

/// Thirteen-armed environment used for the larger comparison.
pub fn env2() -> BernoulliEnv {
    BernoulliEnv {
        means: vec![
            0.2, 0.3, 0.87, 0.15, 0.79, 0.12, 0.85, 0.1, 0.83, 0.75, 0.14, 0.9, 0.2,
        ],
    }
}

/// Nest partition (0-based arms) and scales paired with [`env2`].
pub fn env2_nesting() -> Vec<(Vec<usize>, f64)> {
    vec![
        ((0..6).collect(), 0.16),
        (vec![6, 7], 0.09),
        (vec![8, 9, 10], 0.21),
        (vec![11, 12], 0.12),
    ]
}

/// Oblivious adversary: a reward matrix fixed before the run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialEnv {
    rewards: Vec<Vec<f64>>,
    bound: f64,
}

impl AdversarialEnv {
    /// Rows are rounds; every entry must satisfy `|r| <= bound`.
    pub fn new(rewards: Vec<Vec<f64>>, bound: f64) -> Result<Self> {
        let arms = rewards.first().map_or(0, Vec::len);
        if arms == 0 {
            return Err(Error::param("rewards", "reward matrix is empty"));
        }
        for (t, row) in rewards.iter().enumerate() {
            if row.len() != arms {
                return Err(Error::DimensionMismatch {
                    expected: arms,
                    actual: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !(v.is_finite() && v.abs() <= bound)) {
                return Err(Error::param(
                    "rewards",
                    format!("round {}: reward {v} exceeds the bound {bound}", t + 1),
                ));
            }
        }
        Ok(AdversarialEnv { rewards, bound })
    }

    /// Random bounded sequence: each arm gets a fixed offset drawn from
    /// `[-bound/2, bound/2)` plus fresh noise from the same interval each round.
    pub fn random(arms: usize, horizon: usize, bound: f64, rng: &mut RngStream) -> Result<Self> {
        if arms == 0 || horizon == 0 {
            return Err(Error::param(
                "rewards",
                "need at least one arm and one round",
            ));
        }
        let half = bound / 2.0;
        let offsets: Vec<f64> = (0..arms).map(|_| rng.uniform_in(-half, half)).collect();
        let rewards = (0..horizon)
            .map(|_| {
                offsets
                    .iter()
                    .map(|m| (m + rng.uniform_in(-half, half)).clamp(-bound, bound))
                    .collect()
            })
            .collect();
        AdversarialEnv::new(rewards, bound)
    }

    pub fn arms(&self) -> usize {
        self.rewards[0].len()
    }

    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn round(&self, t: usize) -> &[f64] {
        &self.rewards[t]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rewards
    }
}
