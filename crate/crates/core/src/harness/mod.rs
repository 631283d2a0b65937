//! Monte Carlo Bayesian-regret experiments.
//!
//! An experiment is a pure function of its [`ExperimentConfig`]: instance `k`
//! draws its hidden means, its outcomes and its policy randomness from three
//! independent streams keyed by `(master_seed, k)`. Outcomes come from their
//! own stream, so two policies run on the same config see the same coin
//! flips for the same arm pulls.

pub mod config;
pub mod csv;
pub mod diagnostics;
pub mod policy;
pub mod regret;

pub use config::{BonusSpec, ExperimentConfig, KeyValues, PolicySpec};
pub use csv::{export_regret_csv, load_regret_csv};
pub use diagnostics::{residual_phi, verify_decomposition, ResidualReport};
pub use policy::{Policy, PolicyFactory};
pub use regret::{bayes_regret, bayes_regret_with, run_episode, EpisodeTrace, RegretCurve};
