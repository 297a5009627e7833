//! Generalized nested logit (GNL) online learning.
//!
//! The learners play the gradient of a temperature-scaled GNL surplus
//! function evaluated at the cumulative (or importance-weighted estimated)
//! rewards. With a single nest this is Hedge / Exp3; with several nests the
//! choice probabilities correlate arms within a nest and break IIA.
//!
//! ```
//! use gnl_bandit::GnlModel;
//!
//! let nl = GnlModel::nested_logit(&[(vec![0, 1], 0.5), (vec![2], 1.0)]).unwrap();
//! let p = nl.choice_probabilities(&[0.0; 3]);
//! assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
//! ```

pub mod bandit;
pub mod choice;
pub mod config;
pub mod env;
mod error;
pub mod experts;
pub mod harness;
pub mod output;
pub mod par;
pub mod verify;

pub use bandit::{BanditState, Estimator, RewardMode};
pub use choice::{GnlModel, Nest, SimplexPoint};
pub use config::{parse_config, preset, ConfigFile, OutputSpec, PRESETS};
pub use env::{AdversarialEnv, BernoulliEnv, RngStream, Substream};
pub use error::{Error, Result};
pub use experts::{BoundPolicy, ExpertsState};
pub use harness::{
    run_experiment, run_experiment_with, AggregateResult, Algorithm, EnvSpec, ExperimentConfig,
    RunTrace,
};
pub use par::Execution;
pub use verify::VerificationReport;
