//! Runtime policies built from a [`PolicySpec`].

use std::sync::Arc;

use crate::argmax::TieBreak;
use crate::bandit::{BanditState, ProblemInstance};
use crate::elsv::{BonusSource, SeparableValue};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gittins::{compute_gittins_table_with, GittinsIndex, GittinsParams, GittinsTable, DEFAULT_STATE_BUDGET};
use crate::harness::config::{BonusSpec, ExperimentConfig, PolicySpec};
use crate::index::{
    index_policy_choose_weighted, thompson_choose_weighted, thompson_constrained_choose, BayesUcb, IndexFunction, Ucb,
    UcbParams,
};
use crate::planner::{constrained_lookahead, lookahead_choose_with, PlannerConfig};
use crate::rng::StreamRng;

/// A decision rule run for one episode. Implementations may keep state.
pub trait Policy: Send {
    fn choose(&mut self, state: &BanditState, rng: &mut StreamRng) -> Result<usize>;

    /// Decisions where a constrained sampler fell back to unconstrained values.
    fn fallbacks(&self) -> u64 {
        0
    }
}

struct IndexPolicy {
    index: Arc<dyn IndexFunction>,
    rewards: Vec<f64>,
    tie: TieBreak,
}

impl Policy for IndexPolicy {
    fn choose(&mut self, state: &BanditState, rng: &mut StreamRng) -> Result<usize> {
        index_policy_choose_weighted(state, self.index.as_ref(), &self.rewards, self.tie, rng)
    }
}

struct Thompson {
    rewards: Vec<f64>,
}

impl Policy for Thompson {
    fn choose(&mut self, state: &BanditState, rng: &mut StreamRng) -> Result<usize> {
        Ok(thompson_choose_weighted(state, &self.rewards, rng))
    }
}

struct ThompsonConstrained {
    rewards: Vec<f64>,
    max_draws: usize,
    fallbacks: u64,
}

impl Policy for ThompsonConstrained {
    fn choose(&mut self, state: &BanditState, rng: &mut StreamRng) -> Result<usize> {
        let (arm, fell_back) = thompson_constrained_choose(state, &self.rewards, self.max_draws, rng);
        self.fallbacks += fell_back as u64;
        Ok(arm)
    }

    fn fallbacks(&self) -> u64 {
        self.fallbacks
    }
}

struct Lookahead {
    values: Arc<SeparableValue>,
    config: PlannerConfig,
}

impl Policy for Lookahead {
    fn choose(&mut self, state: &BanditState, rng: &mut StreamRng) -> Result<usize> {
        lookahead_choose_with(state, self.values.as_ref(), &self.config, rng)
    }
}

struct ConstrainedLookahead {
    values: Arc<SeparableValue>,
    config: PlannerConfig,
    fallbacks: u64,
}

impl Policy for ConstrainedLookahead {
    fn choose(&mut self, state: &BanditState, rng: &mut StreamRng) -> Result<usize> {
        let (arm, _, means) = constrained_lookahead(state, self.values.as_ref(), &self.config, rng)?;
        self.fallbacks += means.fell_back as u64;
        Ok(arm)
    }

    fn fallbacks(&self) -> u64 {
        self.fallbacks
    }
}

struct Oracle {
    best: usize,
}

impl Policy for Oracle {
    fn choose(&mut self, _state: &BanditState, _rng: &mut StreamRng) -> Result<usize> {
        Ok(self.best)
    }
}

/// Shared, read-only resources (Gittins table, value tables) for one
/// experiment, from which a fresh policy is made per episode.
#[derive(Clone)]
pub struct PolicyFactory {
    spec: PolicySpec,
    rewards: Vec<f64>,
    tie: TieBreak,
    min_accepted: usize,
    index: Option<Arc<dyn IndexFunction>>,
    values: Option<Arc<SeparableValue>>,
}

impl PolicyFactory {
    /// Builds resources, computing or loading the Gittins table if needed.
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let gittins = if config.policy.uses_gittins() {
            let params = config.gittins_params();
            let table = match &config.gittins_table {
                Some(path) => GittinsTable::load_expecting(path, &params)?,
                None => compute_gittins_table_with(&params, DEFAULT_STATE_BUDGET, config.execution)?,
            };
            Some(Arc::new(table))
        } else {
            None
        };
        PolicyFactory::with_gittins(config, gittins)
    }

    /// Builds resources around an already computed Gittins table.
    pub fn with_gittins(config: &ExperimentConfig, gittins: Option<Arc<GittinsTable>>) -> Result<Self> {
        config.validate()?;
        let spec = config.policy;
        let gittins = match (spec.uses_gittins(), gittins) {
            (false, _) => None,
            (true, None) => return Err(Error::Config(format!("policy {spec} needs a Gittins table"))),
            (true, Some(t)) => {
                check_gittins(&t.params, &config.gittins_params())?;
                Some(t)
            }
        };
        let rewards = config.prior.rewards.clone();
        let bonus = |b: BonusSpec| -> Result<BonusSource> {
            Ok(match b {
                BonusSpec::Zero => BonusSource::Zero,
                BonusSpec::Ucb(a) => BonusSource::Ucb(UcbParams::new(a)?),
                BonusSpec::Gittins => BonusSource::Gittins(Arc::clone(gittins.as_ref().expect("checked above"))),
            })
        };
        let mut index: Option<Arc<dyn IndexFunction>> = None;
        let mut values = None;
        let offset = config.prior.prior_offset();
        match spec {
            PolicySpec::Ucb { ucb_alpha } => index = Some(Arc::new(Ucb::new(ucb_alpha)?)),
            PolicySpec::BayesUcb { c } => index = Some(Arc::new(BayesUcb::new(config.horizon, c)?)),
            PolicySpec::Gittins => index = Some(Arc::new(GittinsIndex::new(gittins.clone().expect("checked above")))),
            PolicySpec::Elsv { bonus: b, depth } => {
                values = Some(Arc::new(SeparableValue::build(
                    bonus(b)?,
                    &rewards,
                    offset,
                    config.horizon + depth,
                    config.execution,
                )?))
            }
            PolicySpec::ElsvConstrained { bonus: b, .. } => {
                values = Some(Arc::new(SeparableValue::build(
                    bonus(b)?,
                    &rewards,
                    offset,
                    config.horizon + 1,
                    config.execution,
                )?))
            }
            PolicySpec::Thompson | PolicySpec::ThompsonConstrained | PolicySpec::Oracle => {}
        }
        Ok(PolicyFactory {
            spec,
            rewards,
            tie: config.tie_break,
            min_accepted: config.min_accepted,
            index,
            values,
        })
    }

    pub fn spec(&self) -> PolicySpec {
        self.spec
    }

    /// Precomputed frontier values, for lookahead policies.
    pub fn values(&self) -> Option<&Arc<SeparableValue>> {
        self.values.as_ref()
    }

    fn planner(&self, depth: u32, sample_count: usize) -> PlannerConfig {
        PlannerConfig {
            depth,
            sample_count,
            min_accepted: self.min_accepted,
            rewards: self.rewards.clone(),
            tie: self.tie,
        }
    }

    /// A fresh policy for one episode on `instance`.
    pub fn make(&self, instance: &ProblemInstance) -> Box<dyn Policy> {
        let rewards = self.rewards.clone();
        match self.spec {
            PolicySpec::Ucb { .. } | PolicySpec::BayesUcb { .. } | PolicySpec::Gittins => Box::new(IndexPolicy {
                index: Arc::clone(self.index.as_ref().expect("built for index policy")),
                rewards,
                tie: self.tie,
            }),
            PolicySpec::Thompson => Box::new(Thompson { rewards }),
            PolicySpec::ThompsonConstrained => Box::new(ThompsonConstrained {
                rewards,
                max_draws: 10_000,
                fallbacks: 0,
            }),
            PolicySpec::Elsv { depth, .. } => Box::new(Lookahead {
                values: Arc::clone(self.values.as_ref().expect("built for lookahead")),
                config: self.planner(depth, 0),
            }),
            PolicySpec::ElsvConstrained { sample_count, .. } => Box::new(ConstrainedLookahead {
                values: Arc::clone(self.values.as_ref().expect("built for lookahead")),
                config: self.planner(1, sample_count),
                fallbacks: 0,
            }),
            PolicySpec::Oracle => Box::new(Oracle {
                best: instance.best_arm(),
            }),
        }
    }
}

fn check_gittins(have: &GittinsParams, need: &GittinsParams) -> Result<()> {
    if have.max_pulls < need.max_pulls {
        return Err(Error::Config(format!(
            "Gittins table covers {} pulls but the experiment needs {}",
            have.max_pulls, need.max_pulls
        )));
    }
    Ok(())
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = ambient pool).
pub(crate) fn with_threads<T: Send>(threads: usize, exec: Execution, f: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    if threads > 0 && exec == Execution::Parallel {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
        return Ok(pool.install(f));
    }
    let _ = (threads, exec);
    Ok(f())
}
