//! Independent oracles for the choice model and the learners: naive
//! exponentiation, finite differences and brute-force expectations, checked
//! against the library on generated inputs.

use gnl_bandit::bandit::{importance_estimate, ArmOutcome, BanditState, RewardMode};
use gnl_bandit::env::{env1, BernoulliEnv, RngStream};
use gnl_bandit::experts::{theoretical_regret_bound, ExpertsState};
use gnl_bandit::verify::random_gnl_model;
use gnl_bandit::{GnlModel, SimplexPoint};
use proptest::prelude::*;

/// `G(x)` straight from its definition.
fn naive_generating(model: &GnlModel, x: &[f64]) -> f64 {
    model
        .nests()
        .iter()
        .map(|nest| {
            let inner: f64 = nest
                .members()
                .iter()
                .zip(nest.shares())
                .map(|(&i, &s)| (s * x[i]).powf(1.0 / nest.mu()))
                .sum();
            inner.powf(nest.mu() / model.mu())
        })
        .sum()
}

fn naive_surplus(model: &GnlModel, u: &[f64]) -> f64 {
    let x: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    model.mu() * naive_generating(model, &x).ln()
}

fn fd_gradient(model: &GnlModel, u: &[f64]) -> Vec<f64> {
    let h = 1e-5;
    (0..u.len())
        .map(|i| {
            let mut up = u.to_vec();
            let mut down = u.to_vec();
            up[i] += h;
            down[i] -= h;
            (naive_surplus(model, &up) - naive_surplus(model, &down)) / (2.0 * h)
        })
        .collect()
}

fn softmax(u: &[f64], mu: f64) -> Vec<f64> {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = u.iter().map(|v| ((v - m) / mu).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn model_from_seed(seed: u64) -> GnlModel {
    random_gnl_model(&mut RngStream::new(seed, 0), 6, 3)
}

fn point(seed: u64, n: usize, low: f64, high: f64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, 1);
    (0..n).map(|_| rng.uniform_in(low, high)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn probabilities_match_surplus_gradient(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        let u = point(seed, model.arms(), -5.0, 5.0);
        let p = model.choice_probabilities(&u);
        for (a, b) in p.iter().zip(fd_gradient(&model, &u)) {
            prop_assert!((a - b).abs() < 1e-6, "{a} vs {b} for {model}");
        }
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn surplus_matches_naive_definition(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        let u = point(seed, model.arms(), -3.0, 3.0);
        let naive = naive_surplus(&model, &u);
        prop_assert!((model.surplus(&u) - naive).abs() <= 1e-9 * naive.abs().max(1.0));
    }

    #[test]
    fn surplus_translation(seed in any::<u64>(), c in -100.0f64..100.0) {
        let model = model_from_seed(seed);
        let u = point(seed, model.arms(), -5.0, 5.0);
        let shifted: Vec<f64> = u.iter().map(|v| v + c).collect();
        prop_assert!((model.surplus(&shifted) - model.surplus(&u) - c).abs() <= 1e-9);
    }

    #[test]
    fn generating_function_homogeneity(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        let x = point(seed, model.arms(), 0.1, 3.0);
        let g = model.generating_value(&x).unwrap();
        prop_assert!((g - naive_generating(&model, &x)).abs() <= 1e-9 * g);
        for lambda in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let expect = lambda.powf(1.0 / model.mu()) * g;
            prop_assert!((model.generating_value(&scaled).unwrap() - expect).abs() <= 1e-10 * expect);
        }
    }

    #[test]
    fn single_nest_collapses_to_softmax(n in 1usize..8, mu in 0.05f64..3.0, seed in any::<u64>()) {
        let u = point(seed, n, -5.0, 5.0);
        let p = GnlModel::mnl(n, mu).unwrap().choice_probabilities(&u);
        for (a, b) in p.iter().zip(softmax(&u, mu)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn nested_logit_near_one_is_mnl(seed in any::<u64>()) {
        let u = point(seed, 4, -3.0, 3.0);
        let nl = GnlModel::nested_logit(&[(vec![0, 2], 0.998), (vec![1, 3], 0.998)]).unwrap();
        let p = nl.choice_probabilities(&u);
        for (a, b) in p.iter().zip(softmax(&u, 1.0)) {
            prop_assert!((a - b).abs() <= 5e-3);
        }
    }

    #[test]
    fn decision_depends_on_ratio_only(seed in any::<u64>(), eta in 0.1f64..5.0) {
        let model = model_from_seed(seed);
        let u = point(seed, model.arms(), -10.0, 10.0);
        let doubled: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let a = model.perspective_gradient(&u, eta).unwrap();
        let b = model.perspective_gradient(&doubled, 2.0 * eta).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn importance_estimate_is_unbiased(seed in any::<u64>()) {
        let model = model_from_seed(seed);
        let n = model.arms();
        let u_hat = point(seed, n, -20.0, 0.0);
        let rewards = point(seed ^ 1, n, -1.0, 0.0);
        let probs = model.choice_probabilities(&u_hat);
        let mut mean = vec![0.0; n];
        for arm in 0..n {
            let outcome = ArmOutcome { arm, observed: rewards[arm], sampling_probs: probs.clone() };
            for (m, e) in mean.iter_mut().zip(importance_estimate(&outcome, n)) {
                *m += probs[arm] * e;
            }
        }
        for (m, r) in mean.iter().zip(&rewards) {
            prop_assert!((m - r).abs() <= 1e-12);
        }
    }
}

#[test]
fn loss_only_estimates_stay_nonpositive() {
    let env = env1();
    let model = GnlModel::nested_logit(&[(vec![0, 2], 0.05), (vec![1, 3], 0.1)]).unwrap();
    let mut state = BanditState::new(model, 1.0, RewardMode::LossOnly).unwrap();
    let mut env_rng = RngStream::new(3, 0);
    let mut rng = RngStream::new(3, 1);
    for _ in 0..5_000 {
        let o = state
            .step(&mut rng, |arm| Ok(env.draw(arm, &mut env_rng)? - 1.0))
            .unwrap();
        assert!(o.sampling_probs[o.arm] > 0.0);
        assert!(state.estimates().iter().all(|&v| v <= 0.0));
    }
}

#[test]
fn experts_regret_grows_sublinearly_and_respects_bound() {
    let model = GnlModel::mnl(4, 1.0).unwrap();
    let mut rng = RngStream::new(11, 0);
    // The tuned temperature keeps U / eta moderate, so every decision stays
    // representably interior; at eta = 1 losing arms underflow to zero.
    let alpha = model.surplus(&[0.0; 4]);
    let eta = (4_000.0 / alpha).sqrt();
    let mut learner = ExpertsState::new(model.clone(), eta).unwrap();
    let means = [0.3, 0.5, 0.45, 0.1];
    let mut regret_1000 = 0.0;
    for t in 1..=4_000 {
        let u: Vec<f64> = means
            .iter()
            .map(|m| if rng.next_uniform() < *m { 1.0 } else { 0.0 })
            .collect();
        let x = learner.step(&u).unwrap();
        assert!(x.iter().all(|&p| p > 0.0));
        if t == 1_000 {
            regret_1000 = learner.regret();
        }
    }
    let regret_4000 = learner.regret();
    assert!(
        regret_4000 / regret_1000 < 4.0,
        "{regret_1000} -> {regret_4000}"
    );
    assert!(regret_4000 <= theoretical_regret_bound(&model, eta, 1.0, 4_000).at_eta);
}

#[test]
fn bernoulli_draws_pass_chi_square() {
    // Upper 1e-6 quantile of chi-square with one degree of freedom.
    const CRITICAL: f64 = 23.928;
    let env = BernoulliEnv::new(vec![0.0, 0.2, 0.5, 0.87, 1.0]).unwrap();
    let draws = 100_000;
    for arm in 0..env.arms() {
        let mut rng = RngStream::new(21, arm as u64);
        let ones: f64 = (0..draws).map(|_| env.draw(arm, &mut rng).unwrap()).sum();
        let p = env.means()[arm];
        if p == 0.0 || p == 1.0 {
            assert_eq!(ones, p * draws as f64);
            continue;
        }
        let expect_one = p * draws as f64;
        let expect_zero = draws as f64 - expect_one;
        let zeros = draws as f64 - ones;
        let chi2 =
            (ones - expect_one).powi(2) / expect_one + (zeros - expect_zero).powi(2) / expect_zero;
        assert!(chi2 < CRITICAL, "arm {arm}: chi2 = {chi2}");
    }
}

#[test]
fn equal_streams_replay_bit_exactly() {
    let model = GnlModel::mnl(4, 0.25).unwrap();
    let run = || {
        let env = env1();
        let mut state = BanditState::new(model.clone(), 1.0, RewardMode::Reward).unwrap();
        let mut env_rng = RngStream::new(8, 4);
        let mut rng = RngStream::new(8, 5);
        (0..2_000)
            .map(|_| {
                let o = state
                    .step(&mut rng, |arm| env.draw(arm, &mut env_rng))
                    .unwrap();
                (o.arm, o.observed, o.sampling_probs)
            })
            .collect::<Vec<(usize, f64, SimplexPoint)>>()
    };
    assert_eq!(run(), run());
}
