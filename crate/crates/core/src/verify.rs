//! Numerical certification of the constants behind the regret guarantees.
//!
//! Each `check_*` function evaluates one inequality at a set of sample
//! points and reports the worst margin (right side minus left side). A check
//! passes iff that margin stays above the check's tolerance everywhere.
//! Functions taking an explicit constant exist so negative controls can run
//! the same inequality with a deliberately wrong constant.

use std::fmt;

use crate::choice::{GnlModel, Nest};
use crate::env::RngStream;
use crate::par::{map_indexed, Execution};

/// Step for first-derivative central differences.
pub const FIRST_DIFF_STEP: f64 = 1e-5;
/// Step for second-derivative central differences.
pub const SECOND_DIFF_STEP: f64 = 1e-4;
/// Absolute slack for the differential-consistency inequality.
pub const DIFF_CONSISTENCY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable => "n/a",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub name: String,
    pub model: String,
    pub samples: String,
    pub worst_margin: f64,
    pub status: Status,
}

impl CheckEntry {
    fn from_margin(name: &str, model: &GnlModel, samples: String, worst: f64, tol: f64) -> Self {
        CheckEntry {
            name: name.to_string(),
            model: model.to_string(),
            samples,
            worst_margin: worst,
            status: if worst >= -tol {
                Status::Pass
            } else {
                Status::Fail
            },
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub entries: Vec<CheckEntry>,
}

impl VerificationReport {
    pub fn push(&mut self, entry: CheckEntry) {
        self.entries.push(entry);
    }

    /// No entry failed. Not-applicable entries do not count against the report.
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != Status::Fail)
    }

    /// Human-readable table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "[{:>4}] {:<28} {:<40} margin {:>12.4e}  ({})\n",
                e.status, e.name, e.model, e.worst_margin, e.samples
            ));
        }
        let failed = self
            .entries
            .iter()
            .filter(|e| e.status == Status::Fail)
            .count();
        out.push_str(&format!(
            "{} checks, {} failed\n",
            self.entries.len(),
            failed
        ));
        out
    }
}

/// Smoothness constant of the perspective, `(2 / min_l mu_l - 1 / mu) / eta`.
/// For a single-nest MNL this is `1 / (mu eta)`.
pub fn smoothness_constant(model: &GnlModel, eta: f64) -> f64 {
    (2.0 / model.min_nest_scale() - 1.0 / model.mu()) / eta
}

/// Differential-consistency constant of the unscaled surplus,
/// `1 / min_l mu_l`. The perspective's constant is this divided by `eta`.
pub fn diff_consistency_constant(model: &GnlModel) -> f64 {
    1.0 / model.min_nest_scale()
}

/// Bregman divergence of the perspective, `D(U + u, U)`.
pub fn perspective_bregman(model: &GnlModel, eta: f64, base: &[f64], step: &[f64]) -> f64 {
    let moved: Vec<f64> = base.iter().zip(step).map(|(a, b)| a + b).collect();
    let grad = model.perspective_gradient(base, eta).expect("positive eta");
    let linear: f64 = grad.iter().zip(step).map(|(g, s)| g * s).sum();
    let hi = model
        .perspective_surplus(&moved, eta)
        .expect("positive eta");
    let lo = model.perspective_surplus(base, eta).expect("positive eta");
    hi - lo - linear
}

/// `D(U + u, U) <= (L / 2) ||u||_inf^2` with `L = smoothness_constant`.
pub fn check_strong_smoothness(
    model: &GnlModel,
    eta: f64,
    samples: &[(Vec<f64>, Vec<f64>)],
) -> CheckEntry {
    check_strong_smoothness_with(model, eta, samples, smoothness_constant(model, eta))
}

pub fn check_strong_smoothness_with(
    model: &GnlModel,
    eta: f64,
    samples: &[(Vec<f64>, Vec<f64>)],
    constant: f64,
) -> CheckEntry {
    let worst = samples
        .iter()
        .map(|(base, step)| {
            let norm = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            constant / 2.0 * norm * norm - perspective_bregman(model, eta, base, step)
        })
        .fold(f64::INFINITY, f64::min);
    CheckEntry::from_margin(
        "strong_smoothness",
        model,
        format!("{} (U, u) pairs, eta={eta}, L={constant}", samples.len()),
        worst,
        1e-10,
    )
}

/// First and second central differences of the surplus along `arm`, built
/// from cancellation-free surplus increments.
pub fn surplus_partials(model: &GnlModel, u: &[f64], arm: usize) -> (f64, f64) {
    let h1 = FIRST_DIFF_STEP;
    let first =
        (model.surplus_increment(u, arm, h1) - model.surplus_increment(u, arm, -h1)) / (2.0 * h1);
    let h2 = SECOND_DIFF_STEP;
    let second =
        (model.surplus_increment(u, arm, h2) + model.surplus_increment(u, arm, -h2)) / (h2 * h2);
    (first, second)
}

/// `d2E/dU_i2 <= C dE/dU_i + 1e-8` on the negative orthant, with
/// `C = diff_consistency_constant`.
pub fn check_diff_consistency(model: &GnlModel, points: &[Vec<f64>]) -> CheckEntry {
    check_diff_consistency_with(model, points, diff_consistency_constant(model))
}

pub fn check_diff_consistency_with(
    model: &GnlModel,
    points: &[Vec<f64>],
    constant: f64,
) -> CheckEntry {
    assert!(
        points.iter().flatten().all(|v| *v < 0.0),
        "differential consistency is defined on the open negative orthant"
    );
    let mut worst = f64::INFINITY;
    for u in points {
        for arm in 0..model.arms() {
            let (first, second) = surplus_partials(model, u, arm);
            worst = worst.min(constant * first - second);
        }
    }
    CheckEntry::from_margin(
        "diff_consistency",
        model,
        format!("{} points, C={constant}", points.len()),
        worst,
        DIFF_CONSISTENCY_TOL,
    )
}

/// Fourth-order central differences of `G` along `arm`, with steps relative
/// to `x[arm]`. Nest exponents `1/mu_l` reach 40 for the models swept here,
/// which is too steep for three-point stencils at these step sizes.
fn generating_partials(model: &GnlModel, x: &[f64], arm: usize) -> (f64, f64) {
    let at = |offset: f64| {
        let mut v = x.to_vec();
        v[arm] += offset;
        model.generating_value(&v).expect("positive point")
    };
    let h1 = FIRST_DIFF_STEP * x[arm];
    let first = (at(-2.0 * h1) - 8.0 * at(-h1) + 8.0 * at(h1) - at(2.0 * h1)) / (12.0 * h1);
    let h2 = SECOND_DIFF_STEP * x[arm];
    let second = (-at(-2.0 * h2) + 16.0 * at(-h2) - 30.0 * at(0.0) + 16.0 * at(h2) - at(2.0 * h2))
        / (12.0 * h2 * h2);
    (first, second)
}

/// `sum_i d2G/dx_i2 * x_i^2 <= (C~ / mu) G(x)` with `C~ = 1 / min_l mu_l - 1`.
/// Margins are relative to `max(1, M) G(x)`.
pub fn check_proposition1(model: &GnlModel, points: &[Vec<f64>]) -> CheckEntry {
    let tilde = 1.0 / model.min_nest_scale() - 1.0;
    check_proposition1_with(model, points, tilde / model.mu())
}

pub fn check_proposition1_with(
    model: &GnlModel,
    points: &[Vec<f64>],
    m_constant: f64,
) -> CheckEntry {
    assert!(
        points.iter().flatten().all(|v| *v > 0.0),
        "samples must be positive"
    );
    let worst = points
        .iter()
        .map(|x| {
            let g = model.generating_value(x).expect("positive point");
            let lhs: f64 = (0..x.len())
                .map(|i| generating_partials(model, x, i).1 * x[i] * x[i])
                .sum();
            (m_constant * g - lhs) / (g * m_constant.max(1.0))
        })
        .fold(f64::INFINITY, f64::min);
    CheckEntry::from_margin(
        "proposition1",
        model,
        format!("{} positive points, M={m_constant}", points.len()),
        worst,
        1e-6,
    )
}

/// Homogeneity of degree `1/mu`, the Euler identity, and the sign pattern
/// of first partials (nonnegative) and mixed second partials (nonpositive).
/// Higher orders are not checked. Margins are relative.
pub fn check_generating_properties(model: &GnlModel, points: &[Vec<f64>]) -> CheckEntry {
    let mut worst = f64::INFINITY;
    for x in points {
        let g = model.generating_value(x).expect("positive point");
        for lambda in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let expect = lambda.powf(1.0 / model.mu()) * g;
            let rel = (model.generating_value(&scaled).unwrap() - expect).abs() / expect;
            worst = worst.min(1e-10 - rel);
        }
        let partials: Vec<f64> = (0..x.len())
            .map(|i| generating_partials(model, x, i).0)
            .collect();
        let euler: f64 = partials.iter().zip(x).map(|(d, v)| d * v).sum();
        worst = worst.min(1e-8 - (euler - g / model.mu()).abs() / g);
        for &d in &partials {
            // Finite-difference roundoff is about eps / h relative to G.
            worst = worst.min(d / g + 1e-9);
        }
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                let scaled = mixed_partial(model, x, i, j) * x[i] * x[j] / g;
                worst = worst.min(1e-6 - scaled);
            }
        }
    }
    CheckEntry::from_margin(
        "generating_properties",
        model,
        format!("{} positive points", points.len()),
        worst,
        0.0,
    )
}

fn mixed_partial(model: &GnlModel, x: &[f64], i: usize, j: usize) -> f64 {
    let hi = SECOND_DIFF_STEP * x[i];
    let hj = SECOND_DIFF_STEP * x[j];
    let g = |di: f64, dj: f64| {
        let mut v = x.to_vec();
        v[i] += di;
        v[j] += dj;
        model.generating_value(&v).unwrap()
    };
    (g(hi, hj) - g(hi, -hj) - g(-hi, hj) + g(-hi, -hj)) / (4.0 * hi * hj)
}

/// `E(0) = mu ln n` for MNL; `min_l mu_l ln n <= E(0) <= ln n` for a
/// partition nested logit. Other models are not applicable.
pub fn check_alpha_bounds(model: &GnlModel) -> CheckEntry {
    let n = model.arms() as f64;
    let alpha = model.surplus(&vec![0.0; model.arms()]);
    let (margin, samples) = if model.is_mnl() {
        let exact = model.mu() * n.ln();
        (
            1e-10 - (alpha - exact).abs(),
            format!("alpha={alpha}, mu ln n={exact}"),
        )
    } else if model.is_partition_nl() {
        let low = model.min_nest_scale() * n.ln();
        let high = n.ln();
        (
            (alpha - low).min(high - alpha),
            format!("alpha={alpha} in [{low}, {high}]"),
        )
    } else {
        return CheckEntry {
            name: "alpha_bounds".into(),
            model: model.to_string(),
            samples: "model is neither MNL nor a partition NL".into(),
            worst_margin: f64::NAN,
            status: Status::NotApplicable,
        };
    };
    CheckEntry::from_margin("alpha_bounds", model, samples, margin, 1e-10)
}

/// Exact conditional expectation over the arm draw of the perspective's
/// Bregman divergence after a worst-case loss of -1 on the drawn arm.
pub fn expected_divergence(model: &GnlModel, eta: f64, base: &[f64]) -> f64 {
    let probs = model.perspective_gradient(base, eta).expect("positive eta");
    (0..model.arms())
        .map(|i| {
            let mut step = vec![0.0; model.arms()];
            step[i] = -1.0 / probs[i];
            probs[i] * perspective_bregman(model, eta, base, &step)
        })
        .sum()
}

/// Monte Carlo estimate of the conditional expected divergence at `base`:
/// `(mean, standard error)` over `draws` sampled arms.
pub fn divergence_monte_carlo(
    model: &GnlModel,
    eta: f64,
    base: &[f64],
    draws: usize,
    rng: &mut RngStream,
) -> (f64, f64) {
    let probs = model.perspective_gradient(base, eta).expect("positive eta");
    let per_arm: Vec<f64> = (0..model.arms())
        .map(|i| {
            let mut step = vec![0.0; model.arms()];
            step[i] = -1.0 / probs[i];
            perspective_bregman(model, eta, base, &step)
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let arm = crate::bandit::sample_index(&probs, rng.next_uniform());
        let d = per_arm[arm];
        sum += d;
        sum_sq += d * d;
    }
    let k = draws as f64;
    let mean = sum / k;
    let var = (sum_sq / k - mean * mean).max(0.0) * k / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Conditional expected divergence `<= C n / 2` (plus three standard errors)
/// at every base point, `C = 1 / (eta min_l mu_l)`.
pub fn check_divergence_bound(
    model: &GnlModel,
    eta: f64,
    bases: &[Vec<f64>],
    draws: usize,
    rng: &mut RngStream,
) -> CheckEntry {
    let bound = diff_consistency_constant(model) / eta * model.arms() as f64 / 2.0;
    let worst = bases
        .iter()
        .map(|u| {
            let (mean, se) = divergence_monte_carlo(model, eta, u, draws, rng);
            bound + 3.0 * se - mean
        })
        .fold(f64::INFINITY, f64::min);
    CheckEntry::from_margin(
        "divergence_bound",
        model,
        format!("{} points x {draws} draws, C n/2={bound}", bases.len()),
        worst,
        0.0,
    )
}

/// Points with coordinates log-uniform on `[-50, -1e-3]`.
pub fn sample_negative_orthant(rng: &mut RngStream, arms: usize, count: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = (1e-3f64.ln(), 50f64.ln());
    (0..count)
        .map(|_| (0..arms).map(|_| -rng.uniform_in(lo, hi).exp()).collect())
        .collect()
}

/// Points with coordinates uniform on `[low, high)`.
pub fn sample_box(
    rng: &mut RngStream,
    arms: usize,
    count: usize,
    low: f64,
    high: f64,
) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..arms).map(|_| rng.uniform_in(low, high)).collect())
        .collect()
}

/// A random valid GNL model: `1..=max_arms` arms, `1..=max_nests` nests,
/// nest scales `mu * r` with `r` in `[0.05, 1]`, and each arm spread over a
/// random nonempty subset of nests with random shares.
pub fn random_gnl_model(rng: &mut RngStream, max_arms: usize, max_nests: usize) -> GnlModel {
    let arms = 1 + rng.below(max_arms);
    let nest_count = 1 + rng.below(max_nests.min(arms));
    let mu = rng.uniform_in(0.5, 2.0);
    let mut shares = vec![vec![0.0; arms]; nest_count];
    // Seat one arm in each nest first so none is empty.
    let mut order: Vec<usize> = (0..arms).collect();
    for i in (1..arms).rev() {
        order.swap(i, rng.below(i + 1));
    }
    for (l, &arm) in order.iter().take(nest_count).enumerate() {
        shares[l][arm] = rng.uniform_in(0.2, 1.0);
    }
    for arm in 0..arms {
        for row in shares.iter_mut() {
            if rng.next_uniform() < 0.4 {
                row[arm] += rng.uniform_in(0.05, 1.0);
            }
        }
        if shares.iter().all(|row| row[arm] == 0.0) {
            let l = rng.below(nest_count);
            shares[l][arm] = 1.0;
        }
        let total: f64 = shares.iter().map(|row| row[arm]).sum();
        for row in shares.iter_mut() {
            row[arm] /= total;
        }
    }
    let nests = shares
        .iter()
        .map(|row| {
            let ratio = rng.uniform_in(0.05, 1.0);
            Nest::new(mu * ratio, row.iter().copied().enumerate()).expect("valid nest")
        })
        .collect();
    GnlModel::new(arms, mu, nests).expect("generator builds valid models")
}

/// Sample sizes for [`run_suite`].
#[derive(Debug, Clone, Copy)]
pub struct SuiteSizes {
    pub smoothness_pairs: usize,
    pub orthant_points: usize,
    pub positive_points: usize,
    pub divergence_points: usize,
    pub divergence_draws: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        SuiteSizes {
            smoothness_pairs: 10_000,
            orthant_points: 100,
            positive_points: 100,
            divergence_points: 20,
            divergence_draws: 100_000,
        }
    }
}

/// Runs every check on one model. Checks execute independently (in parallel
/// when enabled); entries come back in a fixed order.
pub fn run_suite(
    model: &GnlModel,
    eta: f64,
    seed: u64,
    sizes: SuiteSizes,
    exec: Execution,
) -> VerificationReport {
    let n = model.arms();
    let entries = map_indexed(6, exec, |k| {
        let mut rng = RngStream::new(seed, k as u64);
        match k {
            0 => check_alpha_bounds(model),
            1 => {
                let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..sizes.smoothness_pairs)
                    .map(|_| {
                        let base = sample_box(&mut rng, n, 1, -5.0, 5.0).remove(0);
                        let step = sample_box(&mut rng, n, 1, -1.0, 1.0).remove(0);
                        (base, step)
                    })
                    .collect();
                check_strong_smoothness(model, eta, &samples)
            }
            2 => check_diff_consistency(
                model,
                &sample_negative_orthant(&mut rng, n, sizes.orthant_points),
            ),
            3 => check_proposition1(
                model,
                &sample_box(&mut rng, n, sizes.positive_points, 0.2, 5.0),
            ),
            4 => check_generating_properties(
                model,
                &sample_box(&mut rng, n, sizes.positive_points, 0.2, 5.0),
            ),
            _ => {
                let bases = sample_box(&mut rng, n, sizes.divergence_points, -50.0, 0.0);
                check_divergence_bound(model, eta, &bases, sizes.divergence_draws, &mut rng)
            }
        }
    });
    VerificationReport { entries }
}
