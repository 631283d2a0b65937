//! Bayesian Beta-Bernoulli multi-armed bandits.
//!
//! The crate builds per-arm value tables from the exploration bonus of an
//! index policy (UCB, Bayes-UCB, Gittins, greedy), sums them into a linearly
//! separable value function, and plans with n-step lookahead on the bandit
//! MDP. Order-constrained priors are handled by rejection sampling of the
//! joint posterior. The [`harness`] module runs Monte Carlo Bayesian regret
//! experiments with deterministic, thread-count-invariant seeding.

pub mod argmax;
pub mod bandit;
pub mod beta;
pub mod elsv;
pub mod error;
pub mod exec;
pub mod gittins;
pub mod harness;
pub mod index;
pub mod planner;
pub mod rng;
pub mod triangle;

pub use bandit::{
    enumerate_arm_states, pull, sample_instance, success_probability, ArmPosterior, BanditState,
    Outcome, PriorSpec, ProblemInstance,
};
pub use elsv::{compute_value_table, separable_value, BonusSource, ValueTable};
pub use error::{Error, Result};
pub use gittins::{compute_gittins_table, GittinsParams, GittinsTable};
pub use index::{IndexFunction, UcbParams};
