//! The Beta-Bernoulli bandit MDP: per-arm posteriors, joint states,
//! hidden problem instances and priors.

use std::fmt;

use rand::Rng;
use rand_distr::Distribution;

use crate::beta::BetaSampler;
use crate::error::{Error, Result};

/// Beta posterior counts of one arm. `alpha - 1` successes and `beta - 1`
/// failures have been observed under the uniform prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArmPosterior {
    pub alpha: u32,
    pub beta: u32,
}

impl ArmPosterior {
    pub const UNIFORM: ArmPosterior = ArmPosterior { alpha: 1, beta: 1 };

    pub fn new(alpha: u32, beta: u32) -> Result<Self> {
        if alpha == 0 || beta == 0 {
            return Err(Error::Argument(format!(
                "Beta parameters must be >= 1, got ({alpha}, {beta})"
            )));
        }
        Ok(ArmPosterior { alpha, beta })
    }

    /// The `index`-th state (by increasing alpha) with `pulls` pulls.
    pub(crate) fn on_diagonal(pulls: u32, index: u32) -> Self {
        ArmPosterior {
            alpha: index + 1,
            beta: pulls + 1 - index,
        }
    }

    #[inline]
    pub fn pulls(self) -> u32 {
        self.alpha + self.beta - 2
    }

    #[inline]
    pub fn mean(self) -> f64 {
        success_probability(self)
    }

    #[inline]
    pub fn success(self) -> Self {
        ArmPosterior {
            alpha: self.alpha + 1,
            beta: self.beta,
        }
    }

    #[inline]
    pub fn failure(self) -> Self {
        ArmPosterior {
            alpha: self.alpha,
            beta: self.beta + 1,
        }
    }

    pub fn update(self, outcome: Outcome) -> Self {
        match outcome {
            Outcome::Success => self.success(),
            Outcome::Failure => self.failure(),
        }
    }
}

impl fmt::Display for ArmPosterior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.alpha, self.beta)
    }
}

/// Posterior mean `alpha / (alpha + beta)`, the probability the next pull succeeds.
#[inline]
pub fn success_probability(arm: ArmPosterior) -> f64 {
    arm.alpha as f64 / (arm.alpha + arm.beta) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Failure,
}

/// Joint MDP state: one posterior per arm plus the decision time `t >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BanditState {
    pub arms: Vec<ArmPosterior>,
    pub t: u32,
}

impl BanditState {
    pub fn new(arms: Vec<ArmPosterior>, t: u32) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::Argument("a bandit needs at least one arm".into()));
        }
        if t == 0 {
            return Err(Error::Argument("time steps start at t = 1".into()));
        }
        Ok(BanditState { arms, t })
    }

    /// The state before any pull, `t = 1`.
    pub fn initial(prior: &PriorSpec) -> Self {
        BanditState {
            arms: prior.prior_arms(),
            t: 1,
        }
    }

    /// State at time `1 + total pulls` for arms that started from the uniform prior.
    pub fn from_arms(arms: Vec<ArmPosterior>) -> Result<Self> {
        let pulls: u32 = arms.iter().map(|a| a.pulls()).sum();
        BanditState::new(arms, pulls + 1)
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn transition(&self, arm_index: usize, outcome: Outcome) -> Result<Self> {
        if arm_index >= self.arms.len() {
            return Err(Error::Argument(format!(
                "arm index {arm_index} out of range for {} arms",
                self.arms.len()
            )));
        }
        let mut arms = self.arms.clone();
        arms[arm_index] = arms[arm_index].update(outcome);
        Ok(BanditState { arms, t: self.t + 1 })
    }
}

/// See [`BanditState::transition`].
pub fn transition(state: &BanditState, arm_index: usize, outcome: Outcome) -> Result<BanditState> {
    state.transition(arm_index, outcome)
}

/// Hidden truth of one bandit problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub mu: Vec<f64>,
    pub rewards: Vec<f64>,
    pub horizon: u32,
}

impl ProblemInstance {
    pub fn new(mu: Vec<f64>, rewards: Vec<f64>, horizon: u32) -> Result<Self> {
        if mu.is_empty() || mu.len() != rewards.len() {
            return Err(Error::Argument(format!(
                "mu has {} entries and rewards {}",
                mu.len(),
                rewards.len()
            )));
        }
        if let Some(m) = mu.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::Argument(format!("success probability {m} outside [0, 1]")));
        }
        if let Some(r) = rewards.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::Argument(format!("reward {r} must be positive")));
        }
        if horizon == 0 {
            return Err(Error::Argument("horizon must be >= 1".into()));
        }
        Ok(ProblemInstance { mu, rewards, horizon })
    }

    /// Unit-reward instance.
    pub fn bernoulli(mu: Vec<f64>, horizon: u32) -> Result<Self> {
        let rewards = vec![1.0; mu.len()];
        ProblemInstance::new(mu, rewards, horizon)
    }

    pub fn n_arms(&self) -> usize {
        self.mu.len()
    }

    /// Expected reward `mu_i * r_i` of each arm.
    pub fn expected_reward(&self, arm: usize) -> f64 {
        self.mu[arm] * self.rewards[arm]
    }

    /// Best arm under the truth (lowest index on ties).
    pub fn best_arm(&self) -> usize {
        let values: Vec<f64> = (0..self.n_arms()).map(|i| self.expected_reward(i)).collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        values.iter().position(|&v| v == best).unwrap_or(0)
    }

    pub fn best_reward(&self) -> f64 {
        self.expected_reward(self.best_arm())
    }

    pub fn is_monotone(&self) -> bool {
        self.mu.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn to_config_string(&self) -> String {
        format!(
            "mu={}\nrewards={}\nhorizon={}\n",
            join(&self.mu),
            join(&self.rewards),
            self.horizon
        )
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let kv = crate::harness::config::KeyValues::parse(text, "<instance>")?;
        let mu = kv.require("mu")?.parse_f64_list()?;
        let rewards = match kv.get("rewards") {
            Some(v) => v.parse_f64_list()?,
            None => vec![1.0; mu.len()],
        };
        let horizon = kv.require("horizon")?.parse()?;
        ProblemInstance::new(mu, rewards, horizon)
    }
}

/// Prior over problem instances.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub n_arms: usize,
    pub constrained: bool,
    pub rewards: Vec<f64>,
    pub prior_alpha: Vec<u32>,
    pub prior_beta: Vec<u32>,
}

impl PriorSpec {
    /// Independent uniform priors with unit rewards.
    pub fn uniform(n_arms: usize) -> Self {
        PriorSpec {
            n_arms,
            constrained: false,
            rewards: vec![1.0; n_arms],
            prior_alpha: vec![1; n_arms],
            prior_beta: vec![1; n_arms],
        }
    }

    /// Ordered success probabilities `mu_1 >= ... >= mu_N` with the given
    /// strictly increasing rewards.
    pub fn constrained(rewards: Vec<f64>) -> Result<Self> {
        let n = rewards.len();
        let spec = PriorSpec {
            n_arms: n,
            constrained: true,
            rewards,
            prior_alpha: vec![1; n],
            prior_beta: vec![1; n],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Rewards `1 - discount` for discount levels 20%, 10%, 0%.
    pub fn discount_default() -> Self {
        PriorSpec::constrained(vec![0.8, 0.9, 1.0]).expect("default rewards are increasing")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_arms;
        if n == 0 {
            return Err(Error::Config("n_arms must be >= 1".into()));
        }
        if self.rewards.len() != n || self.prior_alpha.len() != n || self.prior_beta.len() != n {
            return Err(Error::Config(format!(
                "per-arm vectors must have length n_arms = {n} (rewards {}, prior_alpha {}, prior_beta {})",
                self.rewards.len(),
                self.prior_alpha.len(),
                self.prior_beta.len()
            )));
        }
        if self.rewards.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("rewards must be positive".into()));
        }
        if self.prior_alpha.iter().chain(&self.prior_beta).any(|&p| p == 0) {
            return Err(Error::Config("prior parameters must be >= 1".into()));
        }
        if self.constrained && !self.rewards.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "constrained prior requires strictly increasing rewards".into(),
            ));
        }
        Ok(())
    }

    pub fn prior_arms(&self) -> Vec<ArmPosterior> {
        self.prior_alpha
            .iter()
            .zip(&self.prior_beta)
            .map(|(&alpha, &beta)| ArmPosterior { alpha, beta })
            .collect()
    }

    /// Largest number of pseudo-pulls carried by any arm's prior.
    pub fn prior_offset(&self) -> u32 {
        self.prior_arms().iter().map(|a| a.pulls()).max().unwrap_or(0)
    }

    pub fn has_unit_rewards(&self) -> bool {
        self.rewards.iter().all(|&r| r == 1.0)
    }

    pub fn to_config_string(&self) -> String {
        format!(
            "n_arms={}\nconstrained={}\nrewards={}\nprior_alpha={}\nprior_beta={}\n",
            self.n_arms,
            self.constrained,
            join(&self.rewards),
            join(&self.prior_alpha),
            join(&self.prior_beta)
        )
    }
}

fn join<T: fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Draws the hidden success probabilities of one instance.
///
/// Constrained priors draw `N` uniforms and sort them descending, which is
/// exactly the uniform prior conditioned on `mu_1 >= ... >= mu_N`.
pub fn sample_instance<R: Rng + ?Sized>(prior: &PriorSpec, horizon: u32, rng: &mut R) -> Result<ProblemInstance> {
    prior.validate()?;
    let mu = if prior.constrained {
        let mut mu: Vec<f64> = (0..prior.n_arms).map(|_| rng.gen::<f64>()).collect();
        mu.sort_by(|a, b| b.total_cmp(a));
        mu
    } else {
        (0..prior.n_arms)
            .map(|i| {
                let arm = ArmPosterior {
                    alpha: prior.prior_alpha[i],
                    beta: prior.prior_beta[i],
                };
                if arm == ArmPosterior::UNIFORM {
                    rng.gen::<f64>()
                } else {
                    BetaSampler::new(arm).sample(rng)
                }
            })
            .collect()
    };
    ProblemInstance::new(mu, prior.rewards.clone(), horizon)
}

/// Bernoulli draw for one pull of `arm_index`.
pub fn pull<R: Rng + ?Sized>(instance: &ProblemInstance, arm_index: usize, rng: &mut R) -> Result<Outcome> {
    let mu = *instance.mu.get(arm_index).ok_or_else(|| {
        Error::Argument(format!(
            "arm index {arm_index} out of range for {} arms",
            instance.n_arms()
        ))
    })?;
    Ok(if rng.gen::<f64>() < mu {
        Outcome::Success
    } else {
        Outcome::Failure
    })
}

/// All per-arm states reachable within `t - 1` pulls, sorted by `(alpha + beta, alpha)`.
pub fn enumerate_arm_states(t: u32) -> Vec<ArmPosterior> {
    (0..t)
        .flat_map(|d| (0..=d).map(move |i| ArmPosterior::on_diagonal(d, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn arm(a: u32, b: u32) -> ArmPosterior {
        ArmPosterior::new(a, b).unwrap()
    }

    #[test]
    fn success_probability_examples() {
        assert_eq!(success_probability(arm(2, 3)), 0.4);
        assert_eq!(success_probability(arm(1, 1)), 0.5);
        assert_eq!(success_probability(arm(10, 10)), 0.5);
    }

    #[test]
    fn zero_parameters_rejected() {
        assert!(ArmPosterior::new(0, 1).is_err());
        assert!(ArmPosterior::new(1, 0).is_err());
    }

    #[test]
    fn transition_examples() {
        let s = BanditState::new(vec![arm(1, 1), arm(1, 1)], 1).unwrap();
        let next = s.transition(0, Outcome::Success).unwrap();
        assert_eq!(next.arms, vec![arm(2, 1), arm(1, 1)]);
        assert_eq!(next.t, 2);

        let s = BanditState::from_arms(vec![arm(2, 3), arm(10, 10)]).unwrap();
        assert_eq!(s.transition(0, Outcome::Failure).unwrap().arms, vec![arm(2, 4), arm(10, 10)]);
        assert_eq!(s.transition(1, Outcome::Success).unwrap().arms, vec![arm(2, 3), arm(11, 10)]);
        assert!(matches!(s.transition(2, Outcome::Success), Err(Error::Argument(_))));
    }

    #[test]
    fn transition_probabilities_normalize() {
        for s in enumerate_arm_states(40) {
            let p = success_probability(s);
            let q = s.beta as f64 / (s.alpha + s.beta) as f64;
            assert!((p + q - 1.0).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(enumerate_arm_states(1), vec![arm(1, 1)]);
        let two = enumerate_arm_states(2);
        assert_eq!(two.len(), 3);
        for s in [arm(1, 1), arm(2, 1), arm(1, 2)] {
            assert!(two.contains(&s));
        }
        assert_eq!(enumerate_arm_states(10).len(), 55);
        for t in 1..=100u32 {
            let states = enumerate_arm_states(t);
            assert_eq!(states.len() as u32, t * (t + 1) / 2);
            assert!(states.iter().all(|s| s.pulls() < t));
        }
    }

    #[test]
    fn pull_extremes() {
        let inst = ProblemInstance::bernoulli(vec![1.0, 0.0], 10).unwrap();
        let mut rng = stream(1, Purpose::Aux, 0);
        for _ in 0..1000 {
            assert_eq!(pull(&inst, 0, &mut rng).unwrap(), Outcome::Success);
            assert_eq!(pull(&inst, 1, &mut rng).unwrap(), Outcome::Failure);
        }
        assert!(pull(&inst, 2, &mut rng).is_err());
    }

    #[test]
    fn pull_frequency_and_posterior_consistency() {
        let inst = ProblemInstance::bernoulli(vec![0.3], 1).unwrap();
        let mut rng = stream(2, Purpose::Aux, 0);
        let mut state = BanditState::initial(&PriorSpec::uniform(1));
        let mut successes = 0u32;
        let n = 100_000;
        for _ in 0..n {
            let o = pull(&inst, 0, &mut rng).unwrap();
            if o == Outcome::Success {
                successes += 1;
            }
            state = state.transition(0, o).unwrap();
        }
        let frac = successes as f64 / n as f64;
        assert!((frac - 0.3).abs() < 0.01, "{frac}");
        assert_eq!(state.arms[0].alpha - 1, successes);
        assert_eq!(state.arms[0].beta - 1, n - successes);
        assert_eq!(state.t, n + 1);
    }

    #[test]
    fn unconstrained_prior_mean() {
        let prior = PriorSpec::uniform(1);
        let mut rng = stream(3, Purpose::Aux, 0);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_instance(&prior, 1, &mut rng).unwrap().mu[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn constrained_prior_is_ordered_with_order_statistic_means() {
        let prior = PriorSpec::constrained(vec![0.9, 1.0]).unwrap();
        let mut rng = stream(4, Purpose::Aux, 0);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n)
            .map(|_| sample_instance(&prior, 1, &mut rng).unwrap().mu)
            .collect();
        assert!(draws.iter().all(|m| m[0] >= m[1]));
        let mean_first = draws.iter().map(|m| m[0]).sum::<f64>() / n as f64;

        // brute force: max of two independent uniforms from a separate stream
        let mut oracle_rng = stream(5, Purpose::Aux, 0);
        let oracle = (0..n)
            .map(|_| oracle_rng.gen::<f64>().max(oracle_rng.gen::<f64>()))
            .sum::<f64>()
            / n as f64;
        assert!((mean_first - 2.0 / 3.0).abs() < 0.005, "{mean_first}");
        assert!((oracle - 2.0 / 3.0).abs() < 0.005, "{oracle}");

        // stochastic dominance of the first marginal over the second
        for x in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let cdf0 = draws.iter().filter(|m| m[0] <= x).count();
            let cdf1 = draws.iter().filter(|m| m[1] <= x).count();
            assert!(cdf0 <= cdf1);
        }

        let three = PriorSpec::discount_default();
        for _ in 0..10_000 {
            assert!(sample_instance(&three, 1, &mut rng).unwrap().is_monotone());
        }
    }

    #[test]
    fn prior_validation() {
        assert!(PriorSpec::constrained(vec![1.0, 0.9]).is_err());
        let mut p = PriorSpec::uniform(2);
        p.rewards.pop();
        assert!(p.validate().is_err());
    }

    #[test]
    fn instance_config_round_trip() {
        let inst = ProblemInstance::new(vec![0.25, 0.125], vec![0.8, 1.0], 50).unwrap();
        let back = ProblemInstance::from_config_str(&inst.to_config_string()).unwrap();
        assert_eq!(inst, back);
    }
}
