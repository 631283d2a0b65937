use crate::bandit::{pull, sample_instance, BanditState, ProblemInstance};
use crate::error::{Error, Result};
use crate::exec::try_map_indexed;
use crate::harness::config::ExperimentConfig;
use crate::harness::policy::{with_threads, Policy, PolicyFactory};
use crate::rng::{stream, Purpose, StreamRng};

/// Expected per-step regret of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub regret: Vec<f64>,
    pub fallbacks: u64,
}

impl EpisodeTrace {
    pub fn cumulative(&self) -> Vec<f64> {
        self.regret
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }
}

/// Simulates `instance.horizon` decisions from `start`. Outcomes are drawn
/// from `outcomes`; the policy gets `policy_rng`.
pub fn run_episode(
    policy: &mut dyn Policy,
    instance: &ProblemInstance,
    start: BanditState,
    outcomes: &mut StreamRng,
    policy_rng: &mut StreamRng,
) -> Result<EpisodeTrace> {
    if start.n_arms() != instance.n_arms() {
        return Err(Error::Config(format!(
            "state has {} arms, instance has {}",
            start.n_arms(),
            instance.n_arms()
        )));
    }
    let best = instance.best_reward();
    let mut state = start;
    let mut regret = Vec::with_capacity(instance.horizon as usize);
    for _ in 0..instance.horizon {
        let arm = policy.choose(&state, policy_rng)?;
        // Clamp rounding noise so that equal-valued arms give exactly zero.
        regret.push((best - instance.expected_reward(arm)).max(0.0));
        let outcome = pull(instance, arm, outcomes)?;
        state = state.transition(arm, outcome)?;
    }
    Ok(EpisodeTrace {
        regret,
        fallbacks: policy.fallbacks(),
    })
}

/// Bayesian regret curve with a 95% normal-approximation band.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub label: String,
    /// Mean cumulative regret after `t = 1..=T` decisions.
    pub mean: Vec<f64>,
    /// `mean -/+ 1.96 sd / sqrt(n)`; both equal the mean for one instance.
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub n_instances: usize,
    pub fallbacks: u64,
    pub config: Option<ExperimentConfig>,
}

impl RegretCurve {
    /// Aggregates cumulative traces in the order given.
    pub fn from_traces(label: impl Into<String>, traces: &[Vec<f64>]) -> Result<Self> {
        let n = traces.len();
        if n == 0 {
            return Err(Error::Argument("no traces to aggregate".into()));
        }
        let len = traces[0].len();
        if traces.iter().any(|t| t.len() != len) {
            return Err(Error::Argument("traces have different lengths".into()));
        }
        let mut mean = vec![0.0; len];
        for trace in traces {
            for (m, x) in mean.iter_mut().zip(trace) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut half_width = vec![0.0; len];
        if n > 1 {
            let mut var = vec![0.0; len];
            for trace in traces {
                for ((v, x), m) in var.iter_mut().zip(trace).zip(&mean) {
                    *v += (x - m) * (x - m);
                }
            }
            for (h, v) in half_width.iter_mut().zip(&var) {
                *h = 1.96 * (v / (n - 1) as f64).sqrt() / (n as f64).sqrt();
            }
        }
        Ok(RegretCurve {
            label: label.into(),
            ci_low: mean.iter().zip(&half_width).map(|(m, h)| m - h).collect(),
            ci_high: mean.iter().zip(&half_width).map(|(m, h)| m + h).collect(),
            mean,
            n_instances: n,
            fallbacks: 0,
            config: None,
        })
    }

    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    /// With one instance there is no spread estimate and the band is zero.
    pub fn is_single_instance(&self) -> bool {
        self.n_instances == 1
    }

    /// Fewer than 30 instances: the normal approximation is unreliable.
    pub fn ci_is_rough(&self) -> bool {
        self.n_instances < 30
    }

    /// Mean cumulative regret after `t` decisions (1-based).
    pub fn at(&self, t: usize) -> f64 {
        self.mean[t - 1]
    }

    pub fn ci_at(&self, t: usize) -> (f64, f64) {
        (self.ci_low[t - 1], self.ci_high[t - 1])
    }

    pub fn half_width_at(&self, t: usize) -> f64 {
        (self.ci_high[t - 1] - self.ci_low[t - 1]) / 2.0
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("curves are non-empty")
    }

    pub fn final_ci(&self) -> (f64, f64) {
        self.ci_at(self.horizon())
    }
}

/// Per-instance streams: instance parameters, outcomes, policy randomness.
pub fn instance_streams(master_seed: u64, k: usize) -> (StreamRng, StreamRng, StreamRng) {
    (
        stream(master_seed, Purpose::Instance, k as u64),
        stream(master_seed, Purpose::Outcomes, k as u64),
        stream(master_seed, Purpose::Policy, k as u64),
    )
}

pub fn bayes_regret(config: &ExperimentConfig) -> Result<RegretCurve> {
    let factory = PolicyFactory::new(config)?;
    bayes_regret_with(config, &factory)
}

/// [`bayes_regret`] with prebuilt policy resources.
pub fn bayes_regret_with(config: &ExperimentConfig, factory: &PolicyFactory) -> Result<RegretCurve> {
    config.validate()?;
    if factory.spec() != config.policy {
        return Err(Error::Config(format!(
            "factory built for {} but config runs {}",
            factory.spec(),
            config.policy
        )));
    }
    let start = BanditState::initial(&config.prior);
    let run = || {
        try_map_indexed(config.n_instances, config.execution, |k| {
            let (mut inst_rng, mut outcomes, mut policy_rng) = instance_streams(config.master_seed, k);
            let mut episode = || -> Result<EpisodeTrace> {
                let instance = sample_instance(&config.prior, config.horizon, &mut inst_rng)?;
                let mut policy = factory.make(&instance);
                run_episode(policy.as_mut(), &instance, start.clone(), &mut outcomes, &mut policy_rng)
            };
            episode().map_err(|e| Error::Instance {
                instance: k,
                source: Box::new(e),
            })
        })
    };
    let episodes = with_threads(config.threads, config.execution, run)??;
    let fallbacks = episodes.iter().map(|e| e.fallbacks).sum();
    let traces: Vec<Vec<f64>> = episodes.iter().map(EpisodeTrace::cumulative).collect();
    let mut curve = RegretCurve::from_traces(config.policy.to_string(), &traces)?;
    curve.fallbacks = fallbacks;
    curve.config = Some(config.clone());
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{ArmPosterior, PriorSpec};
    use crate::harness::config::PolicySpec;

    struct Fixed(usize);

    impl Policy for Fixed {
        fn choose(&mut self, _: &BanditState, _: &mut StreamRng) -> Result<usize> {
            Ok(self.0)
        }
    }

    fn two_arm() -> (ProblemInstance, BanditState) {
        let inst = ProblemInstance::bernoulli(vec![0.9, 0.1], 10).unwrap();
        let start = BanditState::from_arms(vec![ArmPosterior::UNIFORM; 2]).unwrap();
        (inst, start)
    }

    #[test]
    fn worst_and_best_arm_traces() {
        let (inst, start) = two_arm();
        let (_, mut o, mut p) = instance_streams(1, 0);
        let worst = run_episode(&mut Fixed(1), &inst, start.clone(), &mut o, &mut p).unwrap();
        assert!((worst.cumulative()[9] - 8.0).abs() < 1e-12);
        let best = run_episode(&mut Fixed(0), &inst, start, &mut o, &mut p).unwrap();
        assert!(best.regret.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn single_instance_has_zero_band() {
        let cfg = ExperimentConfig::new(PriorSpec::uniform(2), PolicySpec::Thompson, 20, 1, 3);
        let curve = bayes_regret(&cfg).unwrap();
        assert!(curve.is_single_instance());
        assert_eq!(curve.ci_low, curve.mean);
        assert_eq!(curve.ci_high, curve.mean);
    }

    #[test]
    fn curves_are_non_decreasing_and_reproducible() {
        let cfg = ExperimentConfig::new(PriorSpec::uniform(3), PolicySpec::Ucb { ucb_alpha: 1.0 }, 50, 40, 9);
        let a = bayes_regret(&cfg).unwrap();
        let b = bayes_regret(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.mean.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(a.horizon(), 50);
    }

    #[test]
    fn oracle_has_zero_regret() {
        let cfg = ExperimentConfig::new(PriorSpec::uniform(3), PolicySpec::Oracle, 30, 20, 5);
        let curve = bayes_regret(&cfg).unwrap();
        assert!(curve.mean.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn constrained_policy_needs_constrained_prior() {
        let cfg = ExperimentConfig::new(PriorSpec::uniform(3), PolicySpec::ThompsonConstrained, 30, 20, 5);
        assert!(matches!(bayes_regret(&cfg), Err(Error::Config(_))));
    }
}
