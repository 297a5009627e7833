//! Experiment orchestration and metrics.
//!
//! An experiment runs `B` independent repetitions of one learner against one
//! environment for `T` rounds. Repetition `r` draws environment variates from
//! stream `2r` and learner variates from stream `2r + 1` of the configured
//! seed, so two learners run with the same seed face the same reward draws.
//! Repetitions may run in parallel; aggregation always folds them in
//! ascending repetition order, so results are bit-identical either way.

use crate::bandit::{BanditState, Estimator, RewardMode};
use crate::choice::GnlModel;
use crate::env::{AdversarialEnv, BernoulliEnv, RngStream, Substream};
use crate::error::{Error, Result};
use crate::experts::{BoundPolicy, ExpertsState};
use crate::par::{map_indexed, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Full information: every round reveals the whole reward vector.
    Experts,
    /// Bandit feedback: only the sampled arm's reward is revealed.
    Bandit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Bernoulli(BernoulliEnv),
    /// A fixed reward matrix shared by every repetition.
    Adversarial(AdversarialEnv),
    /// A fresh random bounded matrix per repetition, drawn up front from the
    /// repetition's environment stream.
    RandomAdversarial {
        arms: usize,
        bound: f64,
    },
}

impl EnvSpec {
    pub fn arms(&self) -> usize {
        match self {
            EnvSpec::Bernoulli(e) => e.arms(),
            EnvSpec::Adversarial(e) => e.arms(),
            EnvSpec::RandomAdversarial { arms, .. } => *arms,
        }
    }

    pub fn label(&self) -> String {
        match self {
            EnvSpec::Bernoulli(e) => format!("bernoulli{:?}", e.means()),
            EnvSpec::Adversarial(e) => format!("adversarial({}x{})", e.horizon(), e.arms()),
            EnvSpec::RandomAdversarial { arms, bound } => {
                format!("random-adversarial(n={arms}, K={bound})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: GnlModel,
    pub algorithm: Algorithm,
    pub environment: EnvSpec,
    pub eta: f64,
    pub horizon: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub mode: RewardMode,
    pub estimator: Estimator,
    /// `K`, the bound on reward magnitudes for the full-information learner.
    pub reward_bound: f64,
    pub bound_policy: BoundPolicy,
}

impl ExperimentConfig {
    /// Bandit experiment with the usual defaults: reward mode, `eta = 1`,
    /// importance-weighted sampling utilities.
    pub fn bandit(
        name: &str,
        model: GnlModel,
        environment: EnvSpec,
        horizon: usize,
        repetitions: usize,
    ) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            model,
            algorithm: Algorithm::Bandit,
            environment,
            eta: 1.0,
            horizon,
            repetitions,
            seed: 0,
            mode: RewardMode::Reward,
            estimator: Estimator::ImportanceWeighted,
            reward_bound: 1.0,
            bound_policy: BoundPolicy::Warn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon T must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions B must be at least 1".into()));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if !(self.reward_bound.is_finite() && self.reward_bound > 0.0) {
            return Err(Error::Config(format!(
                "reward bound must be positive, got {}",
                self.reward_bound
            )));
        }
        let env_arms = self.environment.arms();
        if self.model.arms() != env_arms {
            return Err(Error::Config(format!(
                "arm-count mismatch: model has {} arms, environment has {env_arms}",
                self.model.arms()
            )));
        }
        if let EnvSpec::Adversarial(env) = &self.environment {
            if env.horizon() < self.horizon {
                return Err(Error::Config(format!(
                    "reward matrix has {} rounds but the horizon is {}",
                    env.horizon(),
                    self.horizon
                )));
            }
            if self.algorithm == Algorithm::Bandit {
                let (low, high) = self.mode.range();
                if env.rows()[..self.horizon]
                    .iter()
                    .flatten()
                    .any(|v| !(low..=high).contains(v))
                {
                    return Err(Error::Config(format!(
                        "bandit rewards must lie in [{low}, {high}] for the configured mode"
                    )));
                }
            }
        }
        if let EnvSpec::RandomAdversarial { bound, .. } = self.environment {
            if self.algorithm == Algorithm::Bandit {
                return Err(Error::Config(
                    "random adversarial rewards span [-K, K]; use an explicit matrix for bandit runs".into(),
                ));
            }
            if !(bound.is_finite() && bound > 0.0) {
                return Err(Error::Config(format!(
                    "adversary bound must be positive, got {bound}"
                )));
            }
        }
        Ok(())
    }
}

/// Record of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// Sampled arm per round (bandit runs only).
    pub chosen: Vec<u32>,
    /// Observed reward per round; for the full-information learner this is
    /// the expected gain `<x_t, u_t>`.
    pub rewards: Vec<f64>,
    /// Average regret after each round.
    pub avg_regret: Vec<f64>,
    /// Plays per arm (bandit runs only; empty otherwise).
    pub plays: Vec<u64>,
    /// Sum of observed rewards per arm (bandit runs only).
    pub reward_sums: Vec<f64>,
    pub total_reward: f64,
}

impl RunTrace {
    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }
}

/// `max_i pi_i - total / T`.
pub fn stochastic_average_regret(trace: &RunTrace, env: &BernoulliEnv) -> f64 {
    env.best_mean() - trace.total_reward / trace.horizon() as f64
}

/// Per-arm success frequency among the rounds the arm was played; `None`
/// marks an arm that was never played.
pub fn learnt_probabilities(trace: &RunTrace) -> Vec<Option<f64>> {
    trace
        .plays
        .iter()
        .zip(&trace.reward_sums)
        .map(|(&k, &s)| (k > 0).then(|| s / k as f64))
        .collect()
}

/// One repetition of `config`.
pub fn run_repetition(config: &ExperimentConfig, repetition: usize) -> Result<RunTrace> {
    let rep = repetition as u64;
    let mut env_rng = RngStream::for_repetition(config.seed, rep, Substream::Environment);
    let mut learner_rng = RngStream::for_repetition(config.seed, rep, Substream::Learner);
    let generated;
    let environment = match &config.environment {
        EnvSpec::RandomAdversarial { arms, bound } => {
            generated = EnvSpec::Adversarial(AdversarialEnv::random(
                *arms,
                config.horizon,
                *bound,
                &mut env_rng,
            )?);
            &generated
        }
        other => other,
    };
    match config.algorithm {
        Algorithm::Bandit => run_bandit(config, environment, &mut env_rng, &mut learner_rng),
        Algorithm::Experts => run_experts(config, environment, &mut env_rng),
    }
}

fn run_bandit(
    config: &ExperimentConfig,
    environment: &EnvSpec,
    env_rng: &mut RngStream,
    learner_rng: &mut RngStream,
) -> Result<RunTrace> {
    let t_max = config.horizon;
    let n = config.model.arms();
    let mut state = BanditState::new(config.model.clone(), config.eta, config.mode)?
        .with_estimator(config.estimator);
    let mut trace = RunTrace {
        chosen: Vec::with_capacity(t_max),
        rewards: Vec::with_capacity(t_max),
        avg_regret: Vec::with_capacity(t_max),
        plays: vec![0; n],
        reward_sums: vec![0.0; n],
        total_reward: 0.0,
    };
    let mut column_sums = vec![0.0; n];
    for t in 0..t_max {
        let (arm, probs) = state.sample(learner_rng);
        let (reward, fed) = match environment {
            EnvSpec::Bernoulli(env) => {
                // One environment variate per round, whichever arm was drawn.
                let r = env.draw(arm, env_rng)?;
                let fed = match config.mode {
                    RewardMode::Reward => r,
                    RewardMode::LossOnly => r - 1.0,
                };
                (r, fed)
            }
            EnvSpec::Adversarial(env) => {
                let row = env.round(t);
                for (s, v) in column_sums.iter_mut().zip(row) {
                    *s += v;
                }
                (row[arm], row[arm])
            }
            EnvSpec::RandomAdversarial { .. } => unreachable!("materialized before the run"),
        };
        state.update(arm, probs, fed)?;
        trace.chosen.push(arm as u32);
        trace.rewards.push(reward);
        trace.total_reward += reward;
        trace.plays[arm] += 1;
        trace.reward_sums[arm] += reward;
        let steps = (t + 1) as f64;
        let regret = match environment {
            EnvSpec::Bernoulli(env) => env.best_mean() - trace.total_reward / steps,
            _ => (max_of(&column_sums) - trace.total_reward) / steps,
        };
        trace.avg_regret.push(regret);
    }
    Ok(trace)
}

fn run_experts(
    config: &ExperimentConfig,
    environment: &EnvSpec,
    env_rng: &mut RngStream,
) -> Result<RunTrace> {
    let t_max = config.horizon;
    let mut state = ExpertsState::new(config.model.clone(), config.eta)?
        .with_reward_bound(config.reward_bound, config.bound_policy)?;
    let mut trace = RunTrace {
        chosen: Vec::new(),
        rewards: Vec::with_capacity(t_max),
        avg_regret: Vec::with_capacity(t_max),
        plays: Vec::new(),
        reward_sums: Vec::new(),
        total_reward: 0.0,
    };
    for t in 0..t_max {
        let before = state.gain();
        match environment {
            EnvSpec::Bernoulli(env) => {
                let row = env.draw_all(env_rng);
                state.step(&row)?;
            }
            EnvSpec::Adversarial(env) => {
                state.step(env.round(t))?;
            }
            EnvSpec::RandomAdversarial { .. } => unreachable!("materialized before the run"),
        }
        let gained = state.gain() - before;
        trace.rewards.push(gained);
        trace.total_reward = state.gain();
        let steps = (t + 1) as f64;
        let regret = match environment {
            EnvSpec::Bernoulli(env) => env.best_mean() - state.gain() / steps,
            _ => state.regret() / steps,
        };
        trace.avg_regret.push(regret);
    }
    Ok(trace)
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Per-arm statistics across repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub mean_plays: f64,
    /// Mean of the per-repetition learnt probabilities over the repetitions
    /// that played the arm; `None` if no repetition did.
    pub learnt_probability: Option<f64>,
    pub learnt_stderr: Option<f64>,
    /// Repetitions in which the arm was played at least once.
    pub explored_reps: usize,
    /// True iff the arm was played in every repetition.
    pub explored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub name: String,
    pub model: String,
    pub environment: String,
    pub algorithm: Algorithm,
    pub eta: f64,
    pub horizon: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Total reward of each repetition, in repetition order.
    pub totals: Vec<f64>,
    pub mean_total_reward: f64,
    pub stderr_total_reward: f64,
    pub checkpoints: Vec<usize>,
    pub regret_mean: Vec<f64>,
    pub regret_stderr: Vec<f64>,
    /// Empty for full-information runs.
    pub arms: Vec<ArmSummary>,
}

impl AggregateResult {
    pub fn final_avg_regret(&self) -> f64 {
        *self.regret_mean.last().expect("at least one checkpoint")
    }

    pub fn final_avg_regret_stderr(&self) -> f64 {
        *self.regret_stderr.last().expect("at least one checkpoint")
    }

    /// Mean fraction of rounds spent on each arm.
    pub fn play_shares(&self) -> Vec<f64> {
        self.arms
            .iter()
            .map(|a| a.mean_plays / self.horizon as f64)
            .collect()
    }

    /// Mean average regret at the checkpoint equal to `step`, if any.
    pub fn regret_at(&self, step: usize) -> Option<f64> {
        self.checkpoints
            .iter()
            .position(|&c| c == step)
            .map(|k| self.regret_mean[k])
    }
}

/// Ten points per decade from 1 up to `horizon`, always ending at `horizon`.
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for k in 0.. {
        let step = 10f64.powf(k as f64 / 10.0).round() as usize;
        if step > horizon {
            break;
        }
        if out.last() != Some(&step) {
            out.push(step);
        }
    }
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let k = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / k;
    if k < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Folds completed repetitions, in the order given.
pub fn aggregate(config: &ExperimentConfig, traces: &[RunTrace]) -> AggregateResult {
    let totals: Vec<f64> = traces.iter().map(|t| t.total_reward).collect();
    let (mean_total, se_total) = mean_and_stderr(totals.iter().copied());
    let marks = checkpoints(config.horizon);
    let (regret_mean, regret_stderr) = marks
        .iter()
        .map(|&c| mean_and_stderr(traces.iter().map(move |t| t.avg_regret[c - 1])))
        .unzip();
    let arm_count = traces.first().map_or(0, |t| t.plays.len());
    let arms = (0..arm_count)
        .map(|i| {
            let mean_plays =
                traces.iter().map(|t| t.plays[i] as f64).sum::<f64>() / traces.len() as f64;
            let learnt: Vec<f64> = traces
                .iter()
                .filter(|t| t.plays[i] > 0)
                .map(|t| t.reward_sums[i] / t.plays[i] as f64)
                .collect();
            let (lp, lse) = if learnt.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_and_stderr(learnt.iter().copied());
                (Some(m), Some(s))
            };
            ArmSummary {
                mean_plays,
                learnt_probability: lp,
                learnt_stderr: lse,
                explored_reps: learnt.len(),
                explored: learnt.len() == traces.len(),
            }
        })
        .collect();
    AggregateResult {
        name: config.name.clone(),
        model: config.model.to_string(),
        environment: config.environment.label(),
        algorithm: config.algorithm,
        eta: config.eta,
        horizon: config.horizon,
        repetitions: traces.len(),
        seed: config.seed,
        totals,
        mean_total_reward: mean_total,
        stderr_total_reward: se_total,
        checkpoints: marks,
        regret_mean,
        regret_stderr,
        arms,
    }
}

/// All repetitions of `config`, in repetition order.
pub fn run_repetitions(config: &ExperimentConfig, exec: Execution) -> Result<Vec<RunTrace>> {
    config.validate()?;
    map_indexed(config.repetitions, exec, |r| run_repetition(config, r))
        .into_iter()
        .collect()
}

pub fn run_experiment_with(config: &ExperimentConfig, exec: Execution) -> Result<AggregateResult> {
    let traces = run_repetitions(config, exec)?;
    Ok(aggregate(config, &traces))
}

/// Runs `config` with repetitions spread over the worker pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateResult> {
    run_experiment_with(config, Execution::Parallel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::env1;

    fn mnl_config(horizon: usize, reps: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::bandit(
            "t",
            GnlModel::mnl(4, 0.25).unwrap(),
            EnvSpec::Bernoulli(env1()),
            horizon,
            reps,
        );
        c.seed = 17;
        c
    }

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(1), vec![1]);
        assert_eq!(checkpoints(10), vec![1, 2, 3, 4, 5, 6, 8, 10]);
        let c = checkpoints(10_000);
        assert_eq!(*c.last().unwrap(), 10_000);
        assert!(c.contains(&1000));
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*checkpoints(12).last().unwrap(), 12);
    }

    #[test]
    fn single_round_single_repetition() {
        let r = run_experiment(&mnl_config(1, 1)).unwrap();
        assert!(r.mean_total_reward == 0.0 || r.mean_total_reward == 1.0);
        let plays: Vec<f64> = r.arms.iter().map(|a| a.mean_plays).collect();
        assert_eq!(plays.iter().sum::<f64>(), 1.0);
        assert_eq!(plays.iter().filter(|&&p| p == 1.0).count(), 1);
        assert_eq!(r.stderr_total_reward, 0.0);
    }

    #[test]
    fn conservation_per_repetition() {
        let config = mnl_config(500, 4);
        for trace in run_repetitions(&config, Execution::Sequential).unwrap() {
            assert_eq!(trace.plays.iter().sum::<u64>(), 500);
            let recovered: f64 = learnt_probabilities(&trace)
                .iter()
                .zip(&trace.plays)
                .map(|(p, &k)| p.map_or(0.0, |p| p * k as f64))
                .sum();
            assert!((recovered - trace.total_reward).abs() < 1e-9);
            assert_eq!(trace.reward_sums.iter().sum::<f64>(), trace.total_reward);
            let last = *trace.avg_regret.last().unwrap();
            assert_eq!(last, stochastic_average_regret(&trace, &env1()));
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bit_for_bit() {
        let config = mnl_config(300, 6);
        let a = run_experiment_with(&config, Execution::Sequential).unwrap();
        let b = run_experiment_with(&config, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn learner_swap_keeps_environment_draws() {
        // Both arms pay with the same probability so only the learner differs;
        // arm-1 rounds must see the same Bernoulli outcome in both runs.
        let env = BernoulliEnv::new(vec![0.5, 0.5]).unwrap();
        let mut a = ExperimentConfig::bandit(
            "a",
            GnlModel::mnl(2, 1.0).unwrap(),
            EnvSpec::Bernoulli(env.clone()),
            200,
            1,
        );
        let mut b = a.clone();
        b.model = GnlModel::mnl(2, 0.1).unwrap();
        a.seed = 5;
        b.seed = 5;
        let ta = run_repetition(&a, 0).unwrap();
        let tb = run_repetition(&b, 0).unwrap();
        let mut rng = RngStream::for_repetition(5, 0, Substream::Environment);
        let variates: Vec<f64> = (0..200).map(|_| rng.next_uniform()).collect();
        for (t, v) in variates.iter().enumerate() {
            let expect = if *v < 0.5 { 1.0 } else { 0.0 };
            assert_eq!(ta.rewards[t], expect);
            assert_eq!(tb.rewards[t], expect);
        }
    }

    #[test]
    fn uniform_play_regret_is_mean_gap() {
        // mu huge makes the learner nearly uniform.
        let mut config = mnl_config(20_000, 1);
        config.model = GnlModel::mnl(4, 1e9).unwrap();
        let trace = run_repetition(&config, 0).unwrap();
        let regret = stochastic_average_regret(&trace, &env1());
        assert!((regret - 0.365).abs() < 0.02, "{regret}");
    }

    #[test]
    fn unexplored_arms_are_flagged() {
        let trace = RunTrace {
            chosen: vec![0; 3],
            rewards: vec![1.0, 0.0, 1.0],
            avg_regret: vec![0.0; 3],
            plays: vec![3, 0],
            reward_sums: vec![2.0, 0.0],
            total_reward: 2.0,
        };
        assert_eq!(learnt_probabilities(&trace), vec![Some(2.0 / 3.0), None]);
    }

    #[test]
    fn validation_errors() {
        let mut c = mnl_config(10, 1);
        c.model = GnlModel::mnl(3, 0.25).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(m)) if m.contains("arm-count mismatch")));
        let mut c = mnl_config(0, 1);
        assert!(c.validate().is_err());
        c.horizon = 5;
        c.repetitions = 0;
        assert!(c.validate().is_err());
        c.repetitions = 1;
        c.eta = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn experts_against_adversarial_matrix() {
        let env = AdversarialEnv::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]], 1.0).unwrap();
        let mut c = ExperimentConfig::bandit(
            "x",
            GnlModel::mnl(2, 1.0).unwrap(),
            EnvSpec::Adversarial(env),
            2,
            1,
        );
        c.algorithm = Algorithm::Experts;
        let r = run_experiment(&c).unwrap();
        assert!((r.mean_total_reward - 1.231058578630005).abs() < 1e-12);
        assert!((r.final_avg_regret() - 0.7689414213699951 / 2.0).abs() < 1e-12);
        assert!(r.arms.is_empty());
    }

    #[test]
    fn loss_only_bandit_on_bernoulli_feeds_losses() {
        let mut c = mnl_config(200, 1);
        c.mode = RewardMode::LossOnly;
        let trace = run_repetition(&c, 0).unwrap();
        assert!(trace.rewards.iter().all(|r| *r == 0.0 || *r == 1.0));
    }
}
