//! Index policies: a per-arm score computed independently of the other
//! arms, decomposed as posterior mean plus exploration bonus.

use rand::Rng;
use rand_distr::Distribution;

use crate::argmax::{argmax, argmax_lowest, TieBreak};
use crate::bandit::{success_probability, ArmPosterior, BanditState};
use crate::beta::{beta_quantile, BetaSampler};
use crate::error::{Error, Result};

/// A per-arm index `z(arm, t) = mean(arm) + bonus(arm, t)`.
pub trait IndexFunction: Send + Sync {
    fn name(&self) -> String;

    fn bonus(&self, arm: ArmPosterior, t: u32) -> Result<f64>;

    fn index(&self, arm: ArmPosterior, t: u32) -> Result<f64> {
        Ok(success_probability(arm) + self.bonus(arm, t)?)
    }
}

/// Greedy: no exploration bonus.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroBonus;

impl IndexFunction for ZeroBonus {
    fn name(&self) -> String {
        "zero".into()
    }

    fn bonus(&self, _arm: ArmPosterior, _t: u32) -> Result<f64> {
        Ok(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcbParams {
    pub ucb_alpha: f64,
}

impl UcbParams {
    pub fn new(ucb_alpha: f64) -> Result<Self> {
        if !(ucb_alpha > 0.0 && ucb_alpha.is_finite()) {
            return Err(Error::Argument(format!("ucb_alpha must be positive, got {ucb_alpha}")));
        }
        Ok(UcbParams { ucb_alpha })
    }
}

impl Default for UcbParams {
    fn default() -> Self {
        UcbParams { ucb_alpha: 1.0 }
    }
}

/// alpha-UCB with the Bayesian posterior mean as the reward estimate.
/// The pull count in the bonus is floored at 1 so the prior state is finite.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ucb {
    pub params: UcbParams,
}

impl Ucb {
    pub fn new(ucb_alpha: f64) -> Result<Self> {
        Ok(Ucb {
            params: UcbParams::new(ucb_alpha)?,
        })
    }

    #[inline]
    pub fn bonus_value(&self, pulls: u32, t: u32) -> f64 {
        let n = pulls.max(1) as f64;
        (self.params.ucb_alpha * (t as f64).ln() / n).sqrt()
    }
}

impl IndexFunction for Ucb {
    fn name(&self) -> String {
        format!("ucb({})", self.params.ucb_alpha)
    }

    fn bonus(&self, arm: ArmPosterior, t: u32) -> Result<f64> {
        Ok(self.bonus_value(arm.pulls(), t))
    }
}

/// See [`Ucb`].
pub fn ucb_index(arm: ArmPosterior, t: u32, params: UcbParams) -> f64 {
    success_probability(arm) + Ucb { params }.bonus_value(arm.pulls(), t)
}

/// Bayes-UCB: a high posterior quantile of `Beta(alpha, beta)`.
#[derive(Debug, Clone, Copy)]
pub struct BayesUcb {
    pub horizon: u32,
    pub c: f64,
}

impl BayesUcb {
    pub fn new(horizon: u32, c: f64) -> Result<Self> {
        if horizon == 0 || !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Argument(format!("invalid Bayes-UCB parameters horizon={horizon} c={c}")));
        }
        Ok(BayesUcb { horizon, c })
    }

    /// `1 - 1 / (t (log T)^c)` clamped to `[0.5, 1 - 1e-12]`.
    pub fn level(&self, t: u32) -> f64 {
        let scale = (self.horizon as f64).ln().powf(self.c);
        let level = 1.0 - 1.0 / (t as f64 * scale);
        if level.is_nan() {
            0.5
        } else {
            level.clamp(0.5, 1.0 - 1e-12)
        }
    }
}

impl IndexFunction for BayesUcb {
    fn name(&self) -> String {
        format!("bayes_ucb({})", self.c)
    }

    fn bonus(&self, arm: ArmPosterior, t: u32) -> Result<f64> {
        Ok(self.index(arm, t)? - success_probability(arm))
    }

    fn index(&self, arm: ArmPosterior, t: u32) -> Result<f64> {
        beta_quantile(self.level(t), arm.alpha as f64, arm.beta as f64)
    }
}

/// See [`BayesUcb`].
pub fn bayes_ucb_index(arm: ArmPosterior, t: u32, horizon: u32, c: f64) -> Result<f64> {
    BayesUcb::new(horizon, c)?.index(arm, t)
}

/// Index policy with unit rewards: argmax of the index, lowest arm on ties.
pub fn index_policy_choose(state: &BanditState, index: &dyn IndexFunction) -> Result<usize> {
    let scores = state
        .arms
        .iter()
        .map(|&arm| index.index(arm, state.t))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_lowest(&scores))
}

/// Index policy under per-arm success rewards: argmax of `r_i * z_i`.
pub fn index_policy_choose_weighted<R: Rng + ?Sized>(
    state: &BanditState,
    index: &dyn IndexFunction,
    rewards: &[f64],
    tie: TieBreak,
    rng: &mut R,
) -> Result<usize> {
    let scores = state
        .arms
        .iter()
        .zip(rewards)
        .map(|(&arm, &r)| Ok(r * index.index(arm, state.t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax(&scores, tie, rng))
}

/// Thompson sampling: one posterior draw per arm, argmax (lowest index on ties).
pub fn thompson_choose<R: Rng + ?Sized>(state: &BanditState, rng: &mut R) -> usize {
    let draws: Vec<f64> = state.arms.iter().map(|&a| BetaSampler::new(a).sample(rng)).collect();
    first_max(&draws)
}

/// Thompson sampling on `theta_i * r_i`.
pub fn thompson_choose_weighted<R: Rng + ?Sized>(state: &BanditState, rewards: &[f64], rng: &mut R) -> usize {
    let draws: Vec<f64> = state
        .arms
        .iter()
        .zip(rewards)
        .map(|(&a, &r)| r * BetaSampler::new(a).sample(rng))
        .collect();
    first_max(&draws)
}

/// Thompson sampling from the order-constrained joint posterior: redraw the
/// joint sample until `theta_1 >= ... >= theta_N`, at most `max_draws`
/// times. Returns the chosen arm and whether the budget ran out (in which
/// case the last unconstrained draw is used).
pub fn thompson_constrained_choose<R: Rng + ?Sized>(
    state: &BanditState,
    rewards: &[f64],
    max_draws: usize,
    rng: &mut R,
) -> (usize, bool) {
    let samplers: Vec<BetaSampler> = state.arms.iter().map(|&a| BetaSampler::new(a)).collect();
    let mut theta = vec![0.0; samplers.len()];
    for _ in 0..max_draws.max(1) {
        if draw_ordered(&samplers, &mut theta, rng) {
            let scores: Vec<f64> = theta.iter().zip(rewards).map(|(t, r)| t * r).collect();
            return (first_max(&scores), false);
        }
    }
    for (slot, s) in theta.iter_mut().zip(&samplers) {
        *slot = s.sample(rng);
    }
    let scores: Vec<f64> = theta.iter().zip(rewards).map(|(t, r)| t * r).collect();
    (first_max(&scores), true)
}

/// Draws one joint posterior sample into `theta`, abandoning it as soon as
/// the ordering is violated. Returns whether the full sample is ordered.
pub(crate) fn draw_ordered<R: Rng + ?Sized>(samplers: &[BetaSampler], theta: &mut [f64], rng: &mut R) -> bool {
    for i in 0..samplers.len() {
        theta[i] = samplers[i].sample(rng);
        if i > 0 && theta[i] > theta[i - 1] {
            return false;
        }
    }
    true
}

// Continuous draws: exact ties have probability zero, so no tolerance.
fn first_max(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
