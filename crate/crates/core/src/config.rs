//! TOML experiment files and the compiled-in paper presets.
//!
//! Arms are numbered from 1 in config files and in every emitted table;
//! the library itself indexes from 0.
//!
//! ```toml
//! name = "env1-nl"
//! algorithm = "bandit"          # or "experts"
//! eta = 1.0
//! horizon = 10000
//! repetitions = 100
//! seed = 0
//! mode = "reward"               # or "loss-only"
//! estimator = "empirical-mean"  # or "importance-weighted"
//!
//! [model]
//! kind = "nested"
//! nests = [{ arms = [1, 3], mu = 0.05 }, { arms = [2, 4], mu = 0.1 }]
//!
//! [environment]
//! kind = "preset"
//! name = "env1"
//!
//! [output]
//! dir = "out"
//! plot = true
//! ```

use std::path::PathBuf;

use serde::Deserialize;

use crate::bandit::{Estimator, RewardMode};
use crate::choice::{GnlModel, Nest};
use crate::env::{env1, env2, env2_nesting, AdversarialEnv, BernoulliEnv};
use crate::error::{Error, Result};
use crate::experts::BoundPolicy;
use crate::harness::{Algorithm, EnvSpec, ExperimentConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    algorithm: RawAlgorithm,
    eta: f64,
    horizon: usize,
    repetitions: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    mode: RawMode,
    #[serde(default)]
    estimator: RawEstimator,
    #[serde(default = "one")]
    reward_bound: f64,
    #[serde(default)]
    bound_policy: RawPolicy,
    model: ModelSpec,
    environment: EnvironmentSpec,
    #[serde(default)]
    output: OutputSpec,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RawAlgorithm {
    Experts,
    Bandit,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RawMode {
    LossOnly,
    #[default]
    Reward,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RawEstimator {
    #[default]
    ImportanceWeighted,
    EmpiricalMean,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum RawPolicy {
    #[default]
    Warn,
    Reject,
}

/// Model section. Arm numbers are 1-based.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum ModelSpec {
    Mnl {
        arms: usize,
        mu: f64,
    },
    /// A partition of the arms; top-level scale 1.
    Nested {
        nests: Vec<NestedSpec>,
    },
    Gnl {
        arms: usize,
        mu: f64,
        nests: Vec<GnlNestSpec>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NestedSpec {
    arms: Vec<usize>,
    mu: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GnlNestSpec {
    arms: Vec<usize>,
    mu: f64,
    /// Allocation shares aligned with `arms`; all 1 when omitted.
    shares: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum EnvironmentSpec {
    Preset {
        name: String,
    },
    Bernoulli {
        means: Vec<f64>,
    },
    /// Rows are rounds.
    Adversarial {
        rewards: Vec<Vec<f64>>,
        bound: f64,
    },
    RandomAdversarial {
        arms: usize,
        bound: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for the CSV files; the CLI falls back to `out`.
    pub dir: Option<PathBuf>,
    /// Also render an SVG regret plot.
    #[serde(default)]
    pub plot: bool,
}

/// A parsed experiment file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub output: OutputSpec,
}

fn zero_based(arms: &[usize]) -> Result<Vec<usize>> {
    arms.iter()
        .map(|&a| {
            a.checked_sub(1)
                .ok_or_else(|| Error::Config("arm numbers start at 1".into()))
        })
        .collect()
}

fn build_model(spec: &ModelSpec) -> Result<GnlModel> {
    match spec {
        ModelSpec::Mnl { arms, mu } => GnlModel::mnl(*arms, *mu),
        ModelSpec::Nested { nests } => {
            let nests = nests
                .iter()
                .map(|n| Ok((zero_based(&n.arms)?, n.mu)))
                .collect::<Result<Vec<_>>>()?;
            GnlModel::nested_logit(&nests)
        }
        ModelSpec::Gnl { arms, mu, nests } => {
            let built = nests
                .iter()
                .map(|n| {
                    let members = zero_based(&n.arms)?;
                    let shares = match &n.shares {
                        Some(s) if s.len() != members.len() => {
                            return Err(Error::Config(format!(
                                "nest lists {} arms but {} shares",
                                members.len(),
                                s.len()
                            )))
                        }
                        Some(s) => s.clone(),
                        None => vec![1.0; members.len()],
                    };
                    Nest::new(n.mu, members.into_iter().zip(shares))
                })
                .collect::<Result<Vec<_>>>()?;
            GnlModel::new(*arms, *mu, built)
        }
    }
}

fn build_environment(spec: &EnvironmentSpec) -> Result<EnvSpec> {
    Ok(match spec {
        EnvironmentSpec::Preset { name } => EnvSpec::Bernoulli(match name.as_str() {
            "env1" => env1(),
            "env2" => env2(),
            other => {
                return Err(Error::Config(format!(
                    "unknown environment preset `{other}` (expected env1 or env2)"
                )))
            }
        }),
        EnvironmentSpec::Bernoulli { means } => {
            EnvSpec::Bernoulli(BernoulliEnv::new(means.clone())?)
        }
        EnvironmentSpec::Adversarial { rewards, bound } => {
            EnvSpec::Adversarial(AdversarialEnv::new(rewards.clone(), *bound)?)
        }
        EnvironmentSpec::RandomAdversarial { arms, bound } => EnvSpec::RandomAdversarial {
            arms: *arms,
            bound: *bound,
        },
    })
}

/// Parses and validates an experiment file.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let raw: RawConfig = toml::from_str(text)?;
    let experiment = ExperimentConfig {
        name: raw.name.unwrap_or_else(|| "experiment".into()),
        model: build_model(&raw.model)?,
        algorithm: match raw.algorithm {
            RawAlgorithm::Experts => Algorithm::Experts,
            RawAlgorithm::Bandit => Algorithm::Bandit,
        },
        environment: build_environment(&raw.environment)?,
        eta: raw.eta,
        horizon: raw.horizon,
        repetitions: raw.repetitions,
        seed: raw.seed,
        mode: match raw.mode {
            RawMode::LossOnly => RewardMode::LossOnly,
            RawMode::Reward => RewardMode::Reward,
        },
        estimator: match raw.estimator {
            RawEstimator::ImportanceWeighted => Estimator::ImportanceWeighted,
            RawEstimator::EmpiricalMean => Estimator::EmpiricalMean,
        },
        reward_bound: raw.reward_bound,
        bound_policy: match raw.bound_policy {
            RawPolicy::Warn => BoundPolicy::Warn,
            RawPolicy::Reject => BoundPolicy::Reject,
        },
    };
    experiment.validate()?;
    Ok(ConfigFile {
        experiment,
        output: raw.output,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelFile {
    model: ModelSpec,
    #[serde(default = "one")]
    eta: f64,
    #[serde(default)]
    seed: u64,
}

/// A model to verify, with the temperature and seed for the sampled checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: GnlModel,
    pub eta: f64,
    pub seed: u64,
}

/// Accepts either a bare `[model]` file (optionally with `eta` and `seed`)
/// or a full experiment file, whose model, eta and seed are used.
pub fn parse_model_config(text: &str) -> Result<ModelFile> {
    let table: toml::Table = toml::from_str(text)?;
    if table.contains_key("environment") {
        let c = parse_config(text)?.experiment;
        return Ok(ModelFile {
            model: c.model,
            eta: c.eta,
            seed: c.seed,
        });
    }
    let raw: RawModelFile = toml::from_str(text)?;
    if !(raw.eta.is_finite() && raw.eta > 0.0) {
        return Err(Error::Config(format!(
            "eta must be positive, got {}",
            raw.eta
        )));
    }
    Ok(ModelFile {
        model: build_model(&raw.model)?,
        eta: raw.eta,
        seed: raw.seed,
    })
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 7] = [
    "env1-mnl",
    "env1-nl",
    "env1-mnl-exploit",
    "env1-nl-retuned",
    "env1-nl-as-mnl",
    "env2-mnl",
    "env2-nl",
];

/// One-line description of a preset.
pub fn preset_description(name: &str) -> Option<&'static str> {
    Some(match name {
        "env1-mnl" => "Environment 1, MNL mu=0.25",
        "env1-nl" => "Environment 1, NL {1,3}:0.05 {2,4}:0.1",
        "env1-mnl-exploit" => "Environment 1, MNL mu=0.05",
        "env1-nl-retuned" => "Environment 1, NL {1,3}:0.15 {2,4}:0.2",
        "env1-nl-as-mnl" => "Environment 1, NL with every nest scale 0.998 against MNL mu=1",
        "env2-mnl" => "Environment 2, MNL mu=0.25",
        "env2-nl" => "Environment 2, NL {1..6}:0.16 {7,8}:0.09 {9,10,11}:0.21 {12,13}:0.12",
        _ => return None,
    })
}

fn env1_nl(mu1: f64, mu2: f64) -> GnlModel {
    GnlModel::nested_logit(&[(vec![0, 2], mu1), (vec![1, 3], mu2)]).expect("valid preset model")
}

fn paper_run(name: &str, model: GnlModel, env: BernoulliEnv) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        model,
        algorithm: Algorithm::Bandit,
        environment: EnvSpec::Bernoulli(env),
        eta: 1.0,
        horizon: 10_000,
        repetitions: 100,
        seed: 0,
        mode: RewardMode::Reward,
        estimator: Estimator::EmpiricalMean,
        reward_bound: 1.0,
        bound_policy: BoundPolicy::Warn,
    }
}

/// The experiments behind a named preset. Most presets are a single run;
/// `env1-nl-as-mnl` is a pair compared under common random numbers.
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    let mnl = |arms, mu| GnlModel::mnl(arms, mu).expect("valid preset model");
    Ok(match name {
        "env1-mnl" => vec![paper_run(name, mnl(4, 0.25), env1())],
        "env1-nl" => vec![paper_run(name, env1_nl(0.05, 0.1), env1())],
        "env1-mnl-exploit" => vec![paper_run(name, mnl(4, 0.05), env1())],
        "env1-nl-retuned" => vec![paper_run(name, env1_nl(0.15, 0.2), env1())],
        "env1-nl-as-mnl" => vec![
            paper_run("env1-nl-as-mnl.nl", env1_nl(0.998, 0.998), env1()),
            paper_run("env1-nl-as-mnl.mnl", mnl(4, 1.0), env1()),
        ],
        "env2-mnl" => vec![paper_run(name, mnl(13, 0.25), env2())],
        "env2-nl" => vec![paper_run(
            name,
            GnlModel::nested_logit(&env2_nesting()).expect("valid preset model"),
            env2(),
        )],
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}`; available: {}",
                PRESETS.join(", ")
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const NL_FILE: &str = r#"
name = "nl"
algorithm = "bandit"
eta = 1.0
horizon = 10000
repetitions = 100

[model]
kind = "nested"
nests = [{ arms = [1, 3], mu = 0.05 }, { arms = [2, 4], mu = 0.1 }]

[environment]
kind = "preset"
name = "env1"
"#;

    #[test]
    fn parses_nested_file() {
        let c = parse_config(NL_FILE).unwrap();
        let e = &c.experiment;
        assert_eq!(e.model, env1_nl(0.05, 0.1));
        assert_eq!(e.environment, EnvSpec::Bernoulli(env1()));
        assert_eq!(
            (e.eta, e.horizon, e.repetitions, e.seed),
            (1.0, 10_000, 100, 0)
        );
        assert_eq!(e.mode, RewardMode::Reward);
        assert_eq!(e.estimator, Estimator::ImportanceWeighted);
        assert_eq!(c.output, OutputSpec::default());
    }

    #[test]
    fn presets_match_paper_setups() {
        let nl = &preset("env1-nl").unwrap()[0];
        assert_eq!(nl.model, env1_nl(0.05, 0.1));
        assert_eq!((nl.eta, nl.horizon, nl.repetitions), (1.0, 10_000, 100));
        let retuned = &preset("env1-nl-retuned").unwrap()[0];
        assert_eq!(retuned.model.nests()[0].mu(), 0.15);
        assert_eq!(retuned.model.nests()[1].mu(), 0.2);
        assert_eq!(preset("env1-nl-as-mnl").unwrap().len(), 2);
        for name in PRESETS {
            assert!(preset_description(name).is_some());
            for c in preset(name).unwrap() {
                c.validate().unwrap();
            }
        }
        assert!(preset("env3").is_err());
    }

    #[test]
    fn rejects_scale_above_top_level_with_invariant_name() {
        let text = NL_FILE.replace("mu = 0.05", "mu = 1.5");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(
                err,
                Error::InvalidModel {
                    invariant: "mu_ell_le_mu",
                    ..
                }
            ),
            "{err}"
        );
        assert!(err.to_string().contains("mu_ell_le_mu"));

        let gnl = r#"
algorithm = "experts"
eta = 1.0
horizon = 10
repetitions = 1
[model]
kind = "gnl"
arms = 2
mu = 1.0
nests = [{ arms = [1, 2], mu = 1.5 }]
[environment]
kind = "random-adversarial"
arms = 2
bound = 1.0
"#;
        let err = parse_config(gnl).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidModel {
                invariant: "mu_ell_le_mu",
                ..
            }
        ));
    }

    #[test]
    fn rejects_arm_count_mismatch() {
        let text = NL_FILE.replace("name = \"env1\"", "name = \"env2\"");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("arm-count mismatch"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys_with_location() {
        let text = NL_FILE.replace("eta = 1.0", "eta = 1.0\ntemperature = 2");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse(_)));
        assert!(msg.contains("temperature"), "{msg}");
        assert!(msg.contains("line"), "{msg}");

        let text = NL_FILE.replace("name = \"env1\"", "name = \"env1\"\nnoise = 1");
        assert!(matches!(parse_config(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn gnl_shares_and_zero_arm() {
        let text = r#"
[model]
kind = "gnl"
arms = 3
mu = 1.0
nests = [
  { arms = [1, 2], mu = 0.5, shares = [1.0, 0.5] },
  { arms = [2, 3], mu = 0.7, shares = [0.5, 1.0] },
]
"#;
        let m = parse_model_config(text).unwrap();
        assert_eq!(m.model.arms(), 3);
        assert_eq!(m.model.nests()[1].share_of(1), 0.5);
        assert_eq!(m.eta, 1.0);
        assert!(parse_model_config(&text.replace("[1, 2]", "[0, 2]")).is_err());
        assert!(
            parse_model_config(&text.replace("shares = [1.0, 0.5]", "shares = [1.0]")).is_err()
        );
        // The full experiment file is accepted too.
        assert_eq!(
            parse_model_config(NL_FILE).unwrap().model,
            env1_nl(0.05, 0.1)
        );
    }

    #[test]
    fn adversarial_matrix_shorter_than_horizon() {
        let text = r#"
algorithm = "experts"
eta = 1.0
horizon = 3
repetitions = 1
[model]
kind = "mnl"
arms = 2
mu = 1.0
[environment]
kind = "adversarial"
bound = 1.0
rewards = [[1.0, 0.0], [0.0, 1.0]]
"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
        assert!(parse_config(&text.replace("horizon = 3", "horizon = 2")).is_ok());
    }
}
