//! Bellman-residual diagnostics for greedy-in-v policies.
//!
//! For a policy that is greedy with respect to `v_{t+1}`, the per-step
//! residual `phi_t(mu, s, a) = q_t(s, a) - (mu_a r_a + v_{t+1}(s))` bounds
//! regret: summed over an episode, `phi(chosen) - phi(best)` is at least the
//! regret incurred, because the chosen arm has the larger q.

use std::fmt;

use crate::argmax::argmax_lowest;
use crate::bandit::{sample_instance, BanditState};
use crate::elsv::{separable_value, ValueTable};
use crate::error::{Error, Result};
use crate::exec::try_map_indexed;
use crate::harness::config::{ExperimentConfig, PolicySpec};
use crate::harness::policy::{with_threads, PolicyFactory};
use crate::harness::regret::instance_streams;
use crate::planner::q_value;
use crate::bandit::pull;

/// `q(state, arm) - (mu[arm] * rewards[arm] + v(state))`.
pub fn residual_phi<T: AsRef<ValueTable>>(
    mu: &[f64],
    state: &BanditState,
    arm_index: usize,
    tables: &[T],
    rewards: &[f64],
) -> Result<f64> {
    if arm_index >= state.n_arms() || mu.len() != state.n_arms() || rewards.len() != state.n_arms() {
        return Err(Error::Argument(format!(
            "arm {arm_index}, {} means and {} rewards for {} arms",
            mu.len(),
            rewards.len(),
            state.n_arms()
        )));
    }
    let q = q_value(state, arm_index, tables, rewards)?;
    Ok(q - (mu[arm_index] * rewards[arm_index] + separable_value(tables, state)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub policy: String,
    pub n_instances: usize,
    /// Mean residual of the chosen arm at each step.
    pub phi_policy: Vec<f64>,
    /// Mean residual of the truly best arm at each step.
    pub phi_optimal: Vec<f64>,
    pub regret_mean: f64,
    pub regret_se: f64,
    pub bound_mean: f64,
    pub bound_se: f64,
    /// Smallest per-episode `bound - regret`; non-negative for a greedy policy.
    pub min_pathwise_slack: f64,
    pub holds: bool,
}

impl ResidualReport {
    pub fn combined_se(&self) -> f64 {
        self.regret_se.hypot(self.bound_se)
    }

    pub fn sum_phi_policy(&self) -> f64 {
        self.phi_policy.iter().sum()
    }

    pub fn sum_phi_optimal(&self) -> f64 {
        self.phi_optimal.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.phi_policy.iter().chain(&self.phi_optimal).all(|x| x.is_finite())
            && [self.regret_mean, self.regret_se, self.bound_mean, self.bound_se].iter().all(|x| x.is_finite())
    }

    /// `Err(Diagnostic)` carrying the breakdown when the inequality fails.
    pub fn check(self) -> Result<Self> {
        if self.holds {
            Ok(self)
        } else {
            Err(Error::Diagnostic(self.to_string()))
        }
    }
}

impl fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "policy: {} ({} instances, T={})", self.policy, self.n_instances, self.phi_policy.len())?;
        writeln!(f, "sum E[phi(chosen)]: {:.6}", self.sum_phi_policy())?;
        writeln!(f, "sum E[phi(best)]:   {:.6}", self.sum_phi_optimal())?;
        writeln!(f, "bound:  {:.6} (se {:.6})", self.bound_mean, self.bound_se)?;
        writeln!(f, "regret: {:.6} (se {:.6})", self.regret_mean, self.regret_se)?;
        writeln!(f, "min pathwise slack: {:.3e}", self.min_pathwise_slack)?;
        write!(
            f,
            "regret <= bound + 3 se ({:.6}): {}",
            self.bound_mean + 3.0 * self.combined_se(),
            if self.holds { "holds" } else { "VIOLATED" }
        )
    }
}

struct EpisodeResiduals {
    phi_policy: Vec<f64>,
    phi_optimal: Vec<f64>,
    regret: f64,
}

/// Monte Carlo check of `regret <= sum E[phi(chosen)] - sum E[phi(best)]`.
///
/// Only depth-1 value-table lookahead qualifies; anything else is refused
/// with a config error. The returned report has `holds` set; call
/// [`ResidualReport::check`] to turn a violation into an error.
pub fn verify_decomposition(config: &ExperimentConfig) -> Result<ResidualReport> {
    if !matches!(config.policy, PolicySpec::Elsv { depth: 1, .. }) {
        return Err(Error::Config(format!(
            "decomposition check needs one-step value-table lookahead (elsv(bonus,1)), got {}",
            config.policy
        )));
    }
    let factory = PolicyFactory::new(config)?;
    let values = factory.values().expect("lookahead policies carry value tables").clone();
    let rewards = config.prior.rewards.clone();
    let start = BanditState::initial(&config.prior);
    let run = || {
        try_map_indexed(config.n_instances, config.execution, |k| {
            let (mut inst_rng, mut outcomes, mut policy_rng) = instance_streams(config.master_seed, k);
            let mut episode = || -> Result<EpisodeResiduals> {
                let instance = sample_instance(&config.prior, config.horizon, &mut inst_rng)?;
                let mut policy = factory.make(&instance);
                let best = instance.best_arm();
                let scores: Vec<f64> = (0..instance.n_arms()).map(|i| instance.expected_reward(i)).collect();
                debug_assert_eq!(argmax_lowest(&scores), best);
                let mut state = start.clone();
                let mut out = EpisodeResiduals {
                    phi_policy: Vec::with_capacity(config.horizon as usize),
                    phi_optimal: Vec::with_capacity(config.horizon as usize),
                    regret: 0.0,
                };
                for _ in 0..config.horizon {
                    let tables = values.tables_at(state.t + 1)?;
                    let arm = policy.choose(&state, &mut policy_rng)?;
                    out.phi_policy.push(residual_phi(&instance.mu, &state, arm, &tables, &rewards)?);
                    out.phi_optimal.push(residual_phi(&instance.mu, &state, best, &tables, &rewards)?);
                    out.regret += instance.best_reward() - instance.expected_reward(arm);
                    state = state.transition(arm, pull(&instance, arm, &mut outcomes)?)?;
                }
                Ok(out)
            };
            episode().map_err(|e| Error::Instance {
                instance: k,
                source: Box::new(e),
            })
        })
    };
    let episodes = with_threads(config.threads, config.execution, run)??;
    Ok(summarize(config, &episodes))
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(config: &ExperimentConfig, episodes: &[EpisodeResiduals]) -> ResidualReport {
    let n = episodes.len();
    let horizon = config.horizon as usize;
    let mut phi_policy = vec![0.0; horizon];
    let mut phi_optimal = vec![0.0; horizon];
    for e in episodes {
        for t in 0..horizon {
            phi_policy[t] += e.phi_policy[t] / n as f64;
            phi_optimal[t] += e.phi_optimal[t] / n as f64;
        }
    }
    let regrets: Vec<f64> = episodes.iter().map(|e| e.regret).collect();
    let bounds: Vec<f64> = episodes
        .iter()
        .map(|e| e.phi_policy.iter().sum::<f64>() - e.phi_optimal.iter().sum::<f64>())
        .collect();
    let min_pathwise_slack = bounds
        .iter()
        .zip(&regrets)
        .map(|(b, r)| b - r)
        .fold(f64::INFINITY, f64::min);
    let (regret_mean, regret_se) = mean_se(&regrets);
    let (bound_mean, bound_se) = mean_se(&bounds);
    let combined = regret_se.hypot(bound_se);
    ResidualReport {
        policy: config.policy.to_string(),
        n_instances: n,
        phi_policy,
        phi_optimal,
        regret_mean,
        regret_se,
        bound_mean,
        bound_se,
        min_pathwise_slack,
        holds: regret_mean <= bound_mean + 3.0 * combined,
    }
}
