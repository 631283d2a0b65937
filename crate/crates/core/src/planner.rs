//! Value-driven action selection: one-step lookahead, n-step expectimax with
//! duplicate-state merging, and lookahead under an order constraint on the
//! arm means.

use std::collections::HashMap;

use rand::Rng;

use crate::argmax::{argmax, argmax_lowest, TieBreak};
use crate::bandit::{success_probability, ArmPosterior, BanditState};
use crate::beta::BetaSampler;
use crate::elsv::{SeparableValue, ValueTable};
use crate::error::{Error, Result};
use crate::index::draw_ordered;

/// Supplies `v_tau(state)` at frontier states.
pub trait FrontierValue {
    fn value(&self, tau: u32, arms: &[ArmPosterior]) -> Result<f64>;
}

impl FrontierValue for SeparableValue {
    fn value(&self, tau: u32, arms: &[ArmPosterior]) -> Result<f64> {
        SeparableValue::value(self, tau, arms)
    }
}

/// A fixed list of per-arm tables used at whatever frontier time is asked for.
pub struct FixedTables<'a, T>(pub &'a [T]);

impl<T: AsRef<ValueTable>> FrontierValue for FixedTables<'_, T> {
    fn value(&self, _tau: u32, arms: &[ArmPosterior]) -> Result<f64> {
        let mut total = 0.0;
        for (table, &arm) in self.0.iter().zip(arms) {
            total += table.as_ref().value(arm)?;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub depth: u32,
    pub sample_count: usize,
    pub min_accepted: usize,
    pub rewards: Vec<f64>,
    pub tie: TieBreak,
}

impl PlannerConfig {
    pub fn new(depth: u32, rewards: Vec<f64>) -> Result<Self> {
        let cfg = PlannerConfig {
            depth,
            sample_count: 10_000,
            min_accepted: 100,
            rewards,
            tie: TieBreak::Lowest,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("lookahead depth must be >= 1".into()));
        }
        if self.min_accepted == 0 || self.sample_count < self.min_accepted {
            return Err(Error::Config(format!(
                "need sample_count ({}) >= min_accepted ({}) >= 1",
                self.sample_count, self.min_accepted
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValue {
    pub arm_index: usize,
    pub value: f64,
}

/// `E[r + v(S')]` for pulling `arm_index`: `p (r_i + v(s+)) + (1 - p) v(s-)`.
pub fn q_value<T: AsRef<ValueTable>>(
    state: &BanditState,
    arm_index: usize,
    tables: &[T],
    rewards: &[f64],
) -> Result<f64> {
    q_with_mean(
        &FixedTables(tables),
        state.t + 1,
        &state.arms,
        arm_index,
        success_probability(state.arms[arm_index]),
        rewards[arm_index],
    )
}

fn q_with_mean(
    values: &dyn FrontierValue,
    tau: u32,
    arms: &[ArmPosterior],
    arm_index: usize,
    p: f64,
    reward: f64,
) -> Result<f64> {
    let mut next = arms.to_vec();
    let current = arms[arm_index];
    next[arm_index] = current.success();
    let up = values.value(tau, &next)?;
    next[arm_index] = current.failure();
    let down = values.value(tau, &next)?;
    Ok(p * (reward + up) + (1.0 - p) * down)
}

/// q of every arm for one-step lookahead.
pub fn one_step_q<T: AsRef<ValueTable>>(state: &BanditState, tables: &[T], rewards: &[f64]) -> Result<Vec<QValue>> {
    (0..state.n_arms())
        .map(|i| {
            Ok(QValue {
                arm_index: i,
                value: q_value(state, i, tables, rewards)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lookahead {
    pub arm: usize,
    pub q: Vec<f64>,
    /// Distinct non-frontier states whose children were generated (root included).
    pub expanded: usize,
    /// Distinct frontier states evaluated with the value function.
    pub frontier: usize,
}

struct Search<'a> {
    values: &'a dyn FrontierValue,
    rewards: &'a [f64],
    tau: u32,
    memo: HashMap<Vec<ArmPosterior>, f64>,
    frontier: HashMap<Vec<ArmPosterior>, f64>,
}

impl Search<'_> {
    fn node(&mut self, arms: &mut Vec<ArmPosterior>, remaining: u32) -> Result<f64> {
        if remaining == 0 {
            if let Some(&v) = self.frontier.get(arms.as_slice()) {
                return Ok(v);
            }
            let v = self.values.value(self.tau, arms)?;
            self.frontier.insert(arms.clone(), v);
            return Ok(v);
        }
        if let Some(&v) = self.memo.get(arms.as_slice()) {
            return Ok(v);
        }
        let mut best = f64::NEG_INFINITY;
        for i in 0..arms.len() {
            best = best.max(self.q(arms, i, remaining)?);
        }
        self.memo.insert(arms.clone(), best);
        Ok(best)
    }

    fn q(&mut self, arms: &mut Vec<ArmPosterior>, i: usize, remaining: u32) -> Result<f64> {
        let current = arms[i];
        let p = success_probability(current);
        arms[i] = current.success();
        let up = self.node(arms, remaining - 1)?;
        arms[i] = current.failure();
        let down = self.node(arms, remaining - 1)?;
        arms[i] = current;
        Ok(p * (self.rewards[i] + up) + (1.0 - p) * down)
    }
}

/// Expectimax to `depth` with duplicate states merged; frontier states at
/// time `t + depth` are evaluated with `values`.
pub fn lookahead(state: &BanditState, depth: u32, values: &dyn FrontierValue, rewards: &[f64]) -> Result<Lookahead> {
    if depth == 0 {
        return Err(Error::Argument("lookahead depth must be >= 1".into()));
    }
    let mut search = Search {
        values,
        rewards,
        tau: state.t + depth,
        memo: HashMap::new(),
        frontier: HashMap::new(),
    };
    let mut arms = state.arms.clone();
    let q = (0..arms.len())
        .map(|i| search.q(&mut arms, i, depth))
        .collect::<Result<Vec<_>>>()?;
    Ok(Lookahead {
        arm: argmax_lowest(&q),
        q,
        // the root is expanded without being memoized
        expanded: search.memo.len() + 1,
        frontier: search.frontier.len(),
    })
}

pub fn lookahead_choose(state: &BanditState, depth: u32, values: &dyn FrontierValue, rewards: &[f64]) -> Result<usize> {
    Ok(lookahead(state, depth, values, rewards)?.arm)
}

/// Same as [`lookahead_choose`] with a configurable tie rule.
pub fn lookahead_choose_with<R: Rng + ?Sized>(
    state: &BanditState,
    values: &dyn FrontierValue,
    config: &PlannerConfig,
    rng: &mut R,
) -> Result<usize> {
    let result = lookahead(state, config.depth, values, &config.rewards)?;
    Ok(argmax(&result.q, config.tie, rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedMeans {
    pub means: Vec<f64>,
    pub accepted: usize,
    pub drawn: usize,
    /// `true` when fewer than `min_accepted` draws respected the ordering
    /// and the unconstrained posterior means were used instead.
    pub fell_back: bool,
}

/// Posterior means under `theta_1 >= ... >= theta_N` by rejection sampling
/// of independent per-arm posterior draws.
pub fn constrained_posterior_means<R: Rng + ?Sized>(
    state: &BanditState,
    rng: &mut R,
    sample_count: usize,
    min_accepted: usize,
) -> ConstrainedMeans {
    let n = state.n_arms();
    let unconstrained = || state.arms.iter().map(|&a| success_probability(a)).collect::<Vec<_>>();
    if n == 1 {
        return ConstrainedMeans {
            means: unconstrained(),
            accepted: 0,
            drawn: 0,
            fell_back: false,
        };
    }
    let samplers: Vec<BetaSampler> = state.arms.iter().map(|&a| BetaSampler::new(a)).collect();
    let mut theta = vec![0.0; n];
    let mut sums = vec![0.0; n];
    let mut accepted = 0usize;
    for _ in 0..sample_count {
        if draw_ordered(&samplers, &mut theta, rng) {
            accepted += 1;
            for (s, t) in sums.iter_mut().zip(&theta) {
                *s += t;
            }
        }
    }
    if accepted < min_accepted.max(1) {
        return ConstrainedMeans {
            means: unconstrained(),
            accepted,
            drawn: sample_count,
            fell_back: true,
        };
    }
    ConstrainedMeans {
        means: sums.iter().map(|s| s / accepted as f64).collect(),
        accepted,
        drawn: sample_count,
        fell_back: false,
    }
}

/// One-step lookahead with the transition probabilities replaced by the
/// order-constrained posterior means.
pub fn constrained_lookahead<R: Rng + ?Sized>(
    state: &BanditState,
    values: &dyn FrontierValue,
    config: &PlannerConfig,
    rng: &mut R,
) -> Result<(usize, Vec<f64>, ConstrainedMeans)> {
    let means = constrained_posterior_means(state, rng, config.sample_count, config.min_accepted);
    let tau = state.t + 1;
    let q = (0..state.n_arms())
        .map(|i| q_with_mean(values, tau, &state.arms, i, means.means[i], config.rewards[i]))
        .collect::<Result<Vec<_>>>()?;
    let arm = argmax(&q, config.tie, rng);
    Ok((arm, q, means))
}

pub fn constrained_lookahead_choose<R: Rng + ?Sized>(
    state: &BanditState,
    values: &dyn FrontierValue,
    config: &PlannerConfig,
    rng: &mut R,
) -> Result<usize> {
    Ok(constrained_lookahead(state, values, config, rng)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elsv::{compute_value_table, decision_table, BonusSource};
    use crate::exec::Execution;
    use crate::index::{Ucb, ZeroBonus};
    use crate::rng::{stream, Purpose};
    use std::collections::HashSet;

    fn arm(a: u32, b: u32) -> ArmPosterior {
        ArmPosterior::new(a, b).unwrap()
    }

    fn random_state<R: Rng>(rng: &mut R, n: usize, max: u32) -> BanditState {
        let arms = (0..n).map(|_| arm(rng.gen_range(1..=max), rng.gen_range(1..=max))).collect();
        BanditState::from_arms(arms).unwrap()
    }

    #[test]
    fn zero_table_q_is_expected_reward() {
        let zero = compute_value_table(30, &ZeroBonus).unwrap();
        let one = BanditState::from_arms(vec![arm(2, 3)]).unwrap();
        assert!((q_value(&one, 0, &[&zero], &[1.0]).unwrap() - 0.4).abs() < 1e-15);

        let s = BanditState::from_arms(vec![arm(2, 3), arm(10, 10)]).unwrap();
        let q = one_step_q(&s, &[&zero, &zero], &[1.0, 1.0]).unwrap();
        assert!((q[0].value - 0.4).abs() < 1e-15 && (q[1].value - 0.5).abs() < 1e-15);
        assert_eq!(lookahead_choose(&s, 1, &FixedTables(&[&zero, &zero]), &[1.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn constant_bonus_shifts_all_q_equally() {
        struct Constant;
        impl crate::index::IndexFunction for Constant {
            fn name(&self) -> String {
                "c".into()
            }
            fn bonus(&self, _: ArmPosterior, _: u32) -> Result<f64> {
                Ok(0.3)
            }
        }
        let zero = compute_value_table(40, &ZeroBonus).unwrap();
        let cst = compute_value_table(40, &Constant).unwrap();
        let mut rng = stream(1, Purpose::Aux, 0);
        for _ in 0..200 {
            let s = random_state(&mut rng, 3, 6);
            let qz = one_step_q(&s, &[&zero, &zero, &zero], &[1.0; 3]).unwrap();
            let qc = one_step_q(&s, &[&cst, &cst, &cst], &[1.0; 3]).unwrap();
            let d0 = qc[0].value - qz[0].value;
            for i in 1..3 {
                assert!((qc[i].value - qz[i].value - d0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn depth_one_matches_one_step_q() {
        let mut rng = stream(2, Purpose::Aux, 0);
        let sv = SeparableValue::build(BonusSource::Ucb(Default::default()), &[1.0; 3], 0, 60, Execution::default()).unwrap();
        for _ in 0..10_000 {
            let s = random_state(&mut rng, 3, 10);
            let tables = sv.tables_at(s.t + 1).unwrap();
            let q: Vec<f64> = one_step_q(&s, &tables, &[1.0; 3]).unwrap().iter().map(|q| q.value).collect();
            let la = lookahead(&s, 1, &sv, &[1.0; 3]).unwrap();
            assert_eq!(la.q, q);
            assert_eq!(la.arm, argmax_lowest(&q));
        }
    }

    #[test]
    fn single_arm_any_depth() {
        let sv = SeparableValue::build(BonusSource::Ucb(Default::default()), &[1.0], 0, 30, Execution::default()).unwrap();
        let s = BanditState::from_arms(vec![arm(3, 2)]).unwrap();
        for depth in 1..=5 {
            assert_eq!(lookahead_choose(&s, depth, &sv, &[1.0]).unwrap(), 0);
        }
    }

    /// Brute force: enumerate every action-outcome path and hash the states.
    fn distinct_by_paths(root: &[ArmPosterior], depth: u32) -> (usize, usize, usize) {
        let mut layer = vec![root.to_vec()];
        let mut internal: HashSet<Vec<ArmPosterior>> = HashSet::new();
        let mut paths = 1usize;
        for _ in 0..depth {
            let mut next = Vec::new();
            for s in &layer {
                internal.insert(s.clone());
                for i in 0..s.len() {
                    for up in [true, false] {
                        let mut c = s.clone();
                        c[i] = if up { c[i].success() } else { c[i].failure() };
                        next.push(c);
                    }
                }
            }
            paths = next.len();
            layer = next;
        }
        let frontier: HashSet<Vec<ArmPosterior>> = layer.into_iter().collect();
        (internal.len(), frontier.len(), paths)
    }

    #[test]
    fn duplicate_states_are_merged() {
        let sv = SeparableValue::build(BonusSource::Zero, &[1.0; 2], 0, 20, Execution::Sequential).unwrap();
        let root = BanditState::from_arms(vec![arm(1, 1), arm(1, 1)]).unwrap();
        for depth in 1..=5u32 {
            let la = lookahead(&root, depth, &sv, &[1.0; 2]).unwrap();
            let (internal, frontier, paths) = distinct_by_paths(&root.arms, depth);
            assert_eq!(la.expanded, internal, "depth {depth}");
            assert_eq!(la.frontier, frontier, "depth {depth}");
            assert_eq!(paths, 4usize.pow(depth));
            // four non-negative counts summing to k: C(k + 3, 3) states at depth k
            let binom3 = |k: usize| (k + 1) * (k + 2) * (k + 3) / 6;
            assert_eq!(internal, (0..depth as usize).map(binom3).sum::<usize>());
            assert_eq!(frontier, binom3(depth as usize));
        }
        let la = lookahead(&root, 4, &sv, &[1.0; 2]).unwrap();
        assert_eq!(la.expanded, 35);
        assert!(la.expanded <= 45);
    }

    #[test]
    fn per_arm_shift_does_not_change_choice_at_any_depth() {
        let base = decision_table(40, &Ucb::default(), 1.0, 6).unwrap();
        let shifted = base.shifted(5.5);
        let mut rng = stream(3, Purpose::Aux, 0);
        for _ in 0..300 {
            let s = random_state(&mut rng, 3, 5);
            for depth in 1..=3 {
                let a = lookahead_choose(&s, depth, &FixedTables(&[&base, &base, &base]), &[1.0; 3]).unwrap();
                let b = lookahead_choose(&s, depth, &FixedTables(&[&base, &shifted, &base]), &[1.0; 3]).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn constrained_means_at_symmetric_prior() {
        let mut rng = stream(4, Purpose::Aux, 0);
        let s = BanditState::from_arms(vec![arm(1, 1), arm(1, 1)]).unwrap();
        let m = constrained_posterior_means(&s, &mut rng, 10_000, 100);
        assert!(!m.fell_back);
        assert!((m.accepted as f64 / 1e4 - 0.5).abs() < 0.02);
        assert!((m.means[0] - 2.0 / 3.0).abs() < 0.01, "{:?}", m.means);
        assert!((m.means[1] - 1.0 / 3.0).abs() < 0.01);

        // brute force: sort pairs of uniforms
        let mut orng = stream(40, Purpose::Aux, 0);
        let (mut hi, mut lo) = (0.0, 0.0);
        for _ in 0..10_000 {
            let (a, b): (f64, f64) = (orng.gen(), orng.gen());
            hi += a.max(b);
            lo += a.min(b);
        }
        assert!((hi / 1e4 - 2.0 / 3.0).abs() < 0.01 && (lo / 1e4 - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn constrained_means_when_order_is_already_certain() {
        let mut rng = stream(5, Purpose::Aux, 0);
        let s = BanditState::from_arms(vec![arm(50, 1), arm(1, 50)]).unwrap();
        let m = constrained_posterior_means(&s, &mut rng, 10_000, 100);
        assert!((m.means[0] - 50.0 / 51.0).abs() < 0.01);
        assert!((m.means[1] - 1.0 / 51.0).abs() < 0.01);
    }

    #[test]
    fn constrained_fallback_under_starvation() {
        let mut rng = stream(6, Purpose::Aux, 0);
        let s = BanditState::from_arms(vec![arm(1, 200), arm(200, 1)]).unwrap();
        let m = constrained_posterior_means(&s, &mut rng, 1000, 100);
        assert!(m.fell_back);
        assert_eq!(m.means, vec![1.0 / 201.0, 200.0 / 201.0]);
    }

    #[test]
    fn constrained_single_arm_is_plain_lookahead() {
        let sv = SeparableValue::build(BonusSource::Ucb(Default::default()), &[1.0], 0, 30, Execution::default()).unwrap();
        let cfg = PlannerConfig::new(1, vec![1.0]).unwrap();
        let mut rng = stream(7, Purpose::Aux, 0);
        let s = BanditState::from_arms(vec![arm(4, 7)]).unwrap();
        let (a, q, _) = constrained_lookahead(&s, &sv, &cfg, &mut rng).unwrap();
        let plain = lookahead(&s, 1, &sv, &[1.0]).unwrap();
        assert_eq!(a, plain.arm);
        assert_eq!(q, plain.q);
    }

    #[test]
    fn constrained_choice_with_zero_tables() {
        let sv = SeparableValue::build(BonusSource::Zero, &[0.8, 0.9, 1.0], 0, 10, Execution::default()).unwrap();
        let cfg = PlannerConfig::new(1, vec![0.8, 0.9, 1.0]).unwrap();
        let mut rng = stream(8, Purpose::Aux, 0);
        let s = BanditState::from_arms(vec![arm(1, 1); 3]).unwrap();
        // order statistics of three uniforms: 3/4, 1/2, 1/4
        let expected = [0.75 * 0.8, 0.5 * 0.9, 0.25 * 1.0];
        assert_eq!(argmax_lowest(&expected), 0);
        let (a, _, m) = constrained_lookahead(&s, &sv, &cfg, &mut rng).unwrap();
        for (got, want) in m.means.iter().zip([0.75, 0.5, 0.25]) {
            assert!((got - want).abs() < 0.02);
        }
        assert_eq!(a, 0);

        // without the constraint the means are equal and the largest reward wins
        let q: Vec<f64> = (0..3)
            .map(|i| q_with_mean(&sv, 2, &s.arms, i, 0.5, cfg.rewards[i]).unwrap())
            .collect();
        assert_eq!(argmax_lowest(&q), 2);
    }

    #[test]
    fn constrained_choice_is_deterministic_given_seed() {
        let sv = SeparableValue::build(BonusSource::Ucb(Default::default()), &[0.8, 0.9, 1.0], 0, 40, Execution::default()).unwrap();
        let cfg = PlannerConfig::new(1, vec![0.8, 0.9, 1.0]).unwrap();
        let mut srng = stream(9, Purpose::Aux, 0);
        for _ in 0..50 {
            let s = random_state(&mut srng, 3, 8);
            let a = constrained_lookahead(&s, &sv, &cfg, &mut stream(77, Purpose::Policy, 1)).unwrap();
            let b = constrained_lookahead(&s, &sv, &cfg, &mut stream(77, Purpose::Policy, 1)).unwrap();
            assert_eq!(a, b);
        }
    }
}
