//! Generalized nested logit (GNL) choice models.
//!
//! A model is a top-level scale `mu` and a list of nests. Nest `l` has its own
//! scale `mu_l <= mu` and allocates a share `sigma_il > 0` of each member arm.
//! The generating function is
//!
//! ```text
//! G(x) = sum_l ( sum_i (sigma_il * x_i)^(1/mu_l) )^(mu_l/mu)
//! ```
//!
//! and the surplus is `E(u) = mu * ln G(e^u)`. Its gradient is the vector of
//! choice probabilities, which every learner in this crate samples from.
//!
//! All evaluation happens in the log domain: within each nest the largest
//! scaled utility is subtracted before exponentiating, and likewise across
//! nests. Utilities of magnitude `1e6` evaluate without overflow.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

const SHARE_SUM_TOL: f64 = 1e-12;

/// One nest of a GNL model. Shares are stored sparsely: arms absent from
/// `members` have share zero in this nest.
#[derive(Debug, Clone, PartialEq)]
pub struct Nest {
    mu: f64,
    members: Vec<usize>,
    shares: Vec<f64>,
    ln_shares: Vec<f64>,
}

impl Nest {
    /// Builds a nest from `(arm, share)` pairs. Zero shares are dropped.
    pub fn new(mu: f64, shares: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::param(
                "mu_ell",
                format!("nest scale must be positive, got {mu}"),
            ));
        }
        let mut members = Vec::new();
        let mut values = Vec::new();
        for (arm, share) in shares {
            if !share.is_finite() || share < 0.0 {
                return Err(Error::model(
                    "shares_nonnegative",
                    format!("share of arm {} is {share}", arm + 1),
                ));
            }
            if share == 0.0 {
                continue;
            }
            if members.contains(&arm) {
                return Err(Error::model(
                    "unique_nest_members",
                    format!("arm {} listed twice in one nest", arm + 1),
                ));
            }
            members.push(arm);
            values.push(share);
        }
        if members.is_empty() {
            return Err(Error::model(
                "nest_nonempty",
                "nest has no arm with positive share",
            ));
        }
        let ln_shares = values.iter().map(|s| s.ln()).collect();
        Ok(Nest {
            mu,
            members,
            shares: values,
            ln_shares,
        })
    }

    /// A nest holding each listed arm with share one.
    pub fn with_members(mu: f64, arms: &[usize]) -> Result<Self> {
        Nest::new(mu, arms.iter().map(|&a| (a, 1.0)))
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    pub fn share_of(&self, arm: usize) -> f64 {
        self.members
            .iter()
            .position(|&a| a == arm)
            .map_or(0.0, |k| self.shares[k])
    }
}

/// A validated GNL model. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GnlModel {
    mu: f64,
    arms: usize,
    nests: Vec<Nest>,
}

impl GnlModel {
    /// Validates and builds a general GNL model over `arms` alternatives.
    pub fn new(arms: usize, mu: f64, nests: Vec<Nest>) -> Result<Self> {
        if arms == 0 {
            return Err(Error::param("n", "model needs at least one arm"));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::param(
                "mu",
                format!("top-level scale must be positive, got {mu}"),
            ));
        }
        if nests.is_empty() {
            return Err(Error::model("nest_nonempty", "model has no nests"));
        }
        let mut totals = vec![0.0; arms];
        for (l, nest) in nests.iter().enumerate() {
            if nest.mu > mu {
                return Err(Error::model(
                    "mu_ell_le_mu",
                    format!(
                        "nest {} has scale {} above the top-level scale {mu}",
                        l + 1,
                        nest.mu
                    ),
                ));
            }
            for (&arm, &share) in nest.members.iter().zip(&nest.shares) {
                if arm >= arms {
                    return Err(Error::ArmOutOfRange { arm: arm + 1, arms });
                }
                totals[arm] += share;
            }
        }
        for (arm, total) in totals.iter().enumerate() {
            if *total == 0.0 {
                return Err(Error::model(
                    "arm_covered",
                    format!("arm {} belongs to no nest", arm + 1),
                ));
            }
            if (total - 1.0).abs() > SHARE_SUM_TOL {
                return Err(Error::model(
                    "shares_sum_to_one",
                    format!("shares of arm {} sum to {total}", arm + 1),
                ));
            }
        }
        Ok(GnlModel { mu, arms, nests })
    }

    /// Multinomial logit: one nest holding every arm, `mu_l = mu`.
    pub fn mnl(arms: usize, mu: f64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::param("n", "model needs at least one arm"));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::param(
                "mu",
                format!("scale must be positive, got {mu}"),
            ));
        }
        let all: Vec<usize> = (0..arms).collect();
        GnlModel::new(arms, mu, vec![Nest::with_members(mu, &all)?])
    }

    /// Nested logit: the nests partition `0..n` (0-based arm indices), each
    /// nest scale lies in `(0, 1]` and the top-level scale is 1.
    pub fn nested_logit(nests: &[(Vec<usize>, f64)]) -> Result<Self> {
        let arms: usize = nests.iter().map(|(m, _)| m.len()).sum();
        let mut seen = vec![false; arms];
        for (members, mu_l) in nests {
            if !(mu_l.is_finite() && *mu_l > 0.0) {
                return Err(Error::param(
                    "mu_ell",
                    format!("nest scales must be positive, got {mu_l}"),
                ));
            }
            if *mu_l > 1.0 {
                return Err(Error::model(
                    "mu_ell_le_mu",
                    format!("nest scale {mu_l} above the top-level scale 1"),
                ));
            }
            if members.is_empty() {
                return Err(Error::InvalidPartition("empty nest".into()));
            }
            for &arm in members {
                if arm >= arms {
                    return Err(Error::InvalidPartition(format!(
                        "arm {} is outside 1..={arms}",
                        arm + 1
                    )));
                }
                if seen[arm] {
                    return Err(Error::InvalidPartition(format!(
                        "arm {} appears in more than one nest",
                        arm + 1
                    )));
                }
                seen[arm] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!(
                "arm {} is in no nest",
                missing + 1
            )));
        }
        let built = nests
            .iter()
            .map(|(members, mu_l)| Nest::with_members(*mu_l, members))
            .collect::<Result<Vec<_>>>()?;
        GnlModel::new(arms, 1.0, built)
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nests(&self) -> &[Nest] {
        &self.nests
    }

    pub fn min_nest_scale(&self) -> f64 {
        self.nests
            .iter()
            .map(|n| n.mu)
            .fold(f64::INFINITY, f64::min)
    }

    /// Single nest with every share equal to one and `mu_l = mu`.
    pub fn is_mnl(&self) -> bool {
        self.nests.len() == 1
            && self.nests[0].mu == self.mu
            && self.nests[0].members.len() == self.arms
            && self.nests[0].shares.iter().all(|&s| s == 1.0)
    }

    /// Every arm sits in exactly one nest with share one and `mu = 1`.
    pub fn is_partition_nl(&self) -> bool {
        self.mu == 1.0
            && self
                .nests
                .iter()
                .all(|n| n.shares.iter().all(|&s| s == 1.0))
            && self.nests.iter().map(|n| n.members.len()).sum::<usize>() == self.arms
    }

    fn check_len(&self, len: usize) {
        assert_eq!(
            len, self.arms,
            "vector length does not match the model's arm count"
        );
    }

    /// `G(x)` for `x >= 0`, `x != 0`. Terms with `x_i = 0` contribute nothing.
    pub fn generating_value(&self, x: &[f64]) -> Result<f64> {
        self.ln_generating_value(x).map(f64::exp)
    }

    /// `ln G(x)`, evaluated without forming `x_i^(1/mu_l)` directly.
    pub fn ln_generating_value(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len());
        if let Some(bad) = x.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(
                "x",
                format!("entries must be finite and nonnegative, got {bad}"),
            ));
        }
        let mut nest_values = Vec::with_capacity(self.nests.len());
        for nest in &self.nests {
            let terms: Vec<f64> = nest
                .members
                .iter()
                .zip(&nest.ln_shares)
                .filter(|(&arm, _)| x[arm] > 0.0)
                .map(|(&arm, ln_s)| (ln_s + x[arm].ln()) / nest.mu)
                .collect();
            if terms.is_empty() {
                continue;
            }
            nest_values.push(nest.mu / self.mu * log_sum_exp(&terms));
        }
        if nest_values.is_empty() {
            return Err(Error::DegenerateInput("generating function needs x != 0"));
        }
        Ok(log_sum_exp(&nest_values))
    }

    fn evaluate(&self, u: &[f64]) -> Evaluation {
        self.check_len(u.len());
        let mut scaled = Vec::with_capacity(self.nests.len());
        let mut within_lse = Vec::with_capacity(self.nests.len());
        let mut nest_values = Vec::with_capacity(self.nests.len());
        for nest in &self.nests {
            let a: Vec<f64> = nest
                .members
                .iter()
                .zip(&nest.ln_shares)
                .map(|(&arm, ln_s)| (ln_s + u[arm]) / nest.mu)
                .collect();
            let lse = log_sum_exp(&a);
            nest_values.push(nest.mu / self.mu * lse);
            within_lse.push(lse);
            scaled.push(a);
        }
        let ln_g = log_sum_exp(&nest_values);
        Evaluation {
            scaled,
            within_lse,
            nest_values,
            ln_g,
        }
    }

    /// `E(u) = mu * ln G(e^u)`.
    pub fn surplus(&self, u: &[f64]) -> f64 {
        self.mu * self.evaluate(u).ln_g
    }

    /// Closed-form gradient of the surplus: nest probability times
    /// within-nest probability, summed over the nests holding each arm.
    pub fn choice_probabilities(&self, u: &[f64]) -> SimplexPoint {
        let mut out = vec![0.0; self.arms];
        self.choice_probabilities_into(u, &mut out);
        SimplexPoint(out)
    }

    /// Writes the choice probabilities into `out` (length `n`).
    pub fn choice_probabilities_into(&self, u: &[f64], out: &mut [f64]) {
        self.check_len(out.len());
        let eval = self.evaluate(u);
        out.iter_mut().for_each(|p| *p = 0.0);
        for (l, nest) in self.nests.iter().enumerate() {
            let nest_prob = (eval.nest_values[l] - eval.ln_g).exp();
            for (k, &arm) in nest.members.iter().enumerate() {
                out[arm] += nest_prob * (eval.scaled[l][k] - eval.within_lse[l]).exp();
            }
        }
        // Renormalize away the last few ulps so the simplex invariant holds tightly.
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= total);
    }

    /// The perspective `eta * E(U / eta)`.
    pub fn perspective_surplus(&self, u: &[f64], eta: f64) -> Result<f64> {
        check_eta(eta)?;
        let scaled: Vec<f64> = u.iter().map(|v| v / eta).collect();
        Ok(eta * self.surplus(&scaled))
    }

    /// Gradient of the perspective, which equals `grad E(U / eta)`.
    pub fn perspective_gradient(&self, u: &[f64], eta: f64) -> Result<SimplexPoint> {
        check_eta(eta)?;
        let scaled: Vec<f64> = u.iter().map(|v| v / eta).collect();
        Ok(self.choice_probabilities(&scaled))
    }

    /// `E(u + h e_arm) - E(u)` without the cancellation of subtracting two
    /// surplus values. Used for finite differences at large `|u|`.
    pub fn surplus_increment(&self, u: &[f64], arm: usize, h: f64) -> f64 {
        let eval = self.evaluate(u);
        let mut acc = 0.0;
        for (l, nest) in self.nests.iter().enumerate() {
            let Some(k) = nest.members.iter().position(|&a| a == arm) else {
                continue;
            };
            let nest_prob = (eval.nest_values[l] - eval.ln_g).exp();
            let within = (eval.scaled[l][k] - eval.within_lse[l]).exp();
            let z = within * (h / nest.mu).exp_m1();
            acc += nest_prob * ((nest.mu / self.mu) * z.ln_1p()).exp_m1();
        }
        self.mu * acc.ln_1p()
    }
}

impl fmt::Display for GnlModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_mnl() {
            return write!(f, "MNL(n={}, mu={})", self.arms, self.mu);
        }
        let tag = if self.is_partition_nl() { "NL" } else { "GNL" };
        write!(f, "{tag}(mu={}", self.mu)?;
        for nest in &self.nests {
            write!(f, "; {{")?;
            for (k, (&arm, &share)) in nest.members.iter().zip(&nest.shares).enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                if share == 1.0 {
                    write!(f, "{}", arm + 1)?;
                } else {
                    write!(f, "{}:{share}", arm + 1)?;
                }
            }
            write!(f, "}}:{}", nest.mu)?;
        }
        write!(f, ")")
    }
}

struct Evaluation {
    scaled: Vec<Vec<f64>>,
    within_lse: Vec<f64>,
    nest_values: Vec<f64>,
    ln_g: f64,
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta > 0.0 {
        Ok(())
    } else {
        Err(Error::param("eta", format!("must be positive, got {eta}")))
    }
}

/// `ln sum exp(v)` with the maximum factored out. Empty input gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// A point in the relative interior of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Accepts `probs` if all entries are strictly positive and they sum to
    /// one within `1e-12`.
    pub fn try_from_vec(probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::param(
                "probs",
                "entries must be finite and strictly positive",
            ));
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(
                "probs",
                format!("entries sum to {total}, not 1"),
            ));
        }
        Ok(SimplexPoint(probs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SimplexPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}
