use banditlab::harness::regret::instance_streams;
use banditlab::harness::*;
use banditlab::{BanditState, PriorSpec, ProblemInstance};

fn episode_totals(policy: &str, mu: &[f64], seeds: usize) -> Vec<f64> {
    let cfg = ExperimentConfig::new(PriorSpec::uniform(mu.len()), policy.parse().unwrap(), 200, seeds, 7);
    let factory = PolicyFactory::new(&cfg).unwrap();
    let instance = ProblemInstance::bernoulli(mu.to_vec(), 200).unwrap();
    (0..seeds)
        .map(|k| {
            let (_, mut outcomes, mut rng) = instance_streams(7, k);
            let mut p = factory.make(&instance);
            let trace = run_episode(p.as_mut(), &instance, BanditState::initial(&cfg.prior), &mut outcomes, &mut rng).unwrap();
            trace.regret.iter().sum()
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// On well separated means greedy rarely locks in, so it beats UCB on
// average there.
#[test]
fn greedy_versus_ucb_on_separated_arms() {
    for mu in [[0.9, 0.1], [0.1, 0.9]] {
        let greedy = episode_totals("elsv(zero,1)", &mu, 1000);
        let ucb = episode_totals("ucb(1)", &mu, 1000);
        assert!(mean(&greedy) < mean(&ucb), "{mu:?}: {} vs {}", mean(&greedy), mean(&ucb));
        let ucb_worst = ucb.iter().cloned().fold(0.0, f64::max);
        assert!(ucb_worst < 20.0, "{ucb_worst}");
    }
}

// Lock-in shows up under the prior as a heavy tail of stuck episodes.
#[test]
fn greedy_regret_is_more_dispersed_than_ucb() {
    let run = |policy: PolicySpec| bayes_regret(&ExperimentConfig::new(PriorSpec::uniform(2), policy, 200, 1000, 7)).unwrap();
    let greedy = run(PolicySpec::Elsv {
        bonus: BonusSpec::Zero,
        depth: 1,
    });
    let ucb = run(PolicySpec::Ucb { ucb_alpha: 1.0 });
    assert!(greedy.half_width_at(200) > 2.0 * ucb.half_width_at(200));
}

#[test]
fn ucb_regret_is_sublinear_at_desk_scale() {
    let cfg = ExperimentConfig::new(PriorSpec::uniform(3), PolicySpec::Ucb { ucb_alpha: 1.0 }, 200, 2000, 11);
    let curve = bayes_regret(&cfg).unwrap();
    let ratio = curve.at(200) / curve.at(100);
    assert!(ratio > 1.0 && ratio < 2.0, "{ratio}");
}

#[test]
fn runs_are_bitwise_reproducible() {
    let cfg = ExperimentConfig::new(PriorSpec::discount_default(), PolicySpec::ThompsonConstrained, 60, 64, 99);
    let a = bayes_regret(&cfg).unwrap();
    let b = bayes_regret(&cfg).unwrap();
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.ci_high, b.ci_high);
    let mut seq = cfg.clone();
    seq.execution = banditlab::exec::Execution::Sequential;
    assert_eq!(bayes_regret(&seq).unwrap().mean, a.mean);
}

#[test]
fn elsv_ucb_depth_one_matches_ucb_curve_exactly() {
    for alpha in [1.0, 0.4] {
        let ucb = ExperimentConfig::new(PriorSpec::uniform(3), PolicySpec::Ucb { ucb_alpha: alpha }, 100, 200, 5);
        let elsv = ExperimentConfig {
            policy: PolicySpec::Elsv {
                bonus: BonusSpec::Ucb(alpha),
                depth: 1,
            },
            ..ucb.clone()
        };
        assert_eq!(bayes_regret(&ucb).unwrap().mean, bayes_regret(&elsv).unwrap().mean);
    }
}

#[test]
fn per_step_regret_is_never_negative() {
    let prior = PriorSpec::discount_default();
    let cfg = ExperimentConfig::new(prior.clone(), PolicySpec::Thompson, 100, 50, 3);
    let factory = PolicyFactory::new(&cfg).unwrap();
    for k in 0..50 {
        let (mut i, mut o, mut p) = instance_streams(3, k);
        let instance = banditlab::sample_instance(&prior, 100, &mut i).unwrap();
        let mut policy = factory.make(&instance);
        let trace = run_episode(policy.as_mut(), &instance, BanditState::initial(&prior), &mut o, &mut p).unwrap();
        assert!(trace.regret.iter().all(|&r| r >= 0.0));
    }
}

#[test]
fn mismatched_inputs_are_errors() {
    let mut cfg = ExperimentConfig::new(PriorSpec::uniform(2), PolicySpec::Gittins, 50, 4, 0);
    cfg.gittins_table = Some("/nonexistent/table.csv".into());
    assert!(matches!(bayes_regret(&cfg), Err(banditlab::Error::Io { .. })));
    let err = run_episode(
        PolicyFactory::new(&ExperimentConfig::new(PriorSpec::uniform(2), PolicySpec::Oracle, 5, 1, 0))
            .unwrap()
            .make(&ProblemInstance::bernoulli(vec![0.5, 0.2], 5).unwrap())
            .as_mut(),
        &ProblemInstance::bernoulli(vec![0.5, 0.2, 0.1], 5).unwrap(),
        BanditState::initial(&PriorSpec::uniform(2)),
        &mut instance_streams(0, 0).1,
        &mut instance_streams(0, 0).2,
    );
    assert!(err.is_err());
}

#[test]
fn regret_csv_round_trip() {
    let cfg = ExperimentConfig::new(PriorSpec::uniform(2), PolicySpec::Thompson, 10, 40, 1);
    let curve = bayes_regret(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    export_regret_csv(&curve, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert_eq!(text.lines().next().unwrap(), "t,mean_cum_regret,ci_low,ci_high,n");
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[2] <= f[1] && f[1] <= f[3]);
    }
    let loaded = load_regret_csv(&path).unwrap();
    assert_eq!(loaded.mean, curve.mean);
    assert_eq!(loaded.n_instances, 40);
    assert_eq!(loaded.ci_low, curve.ci_low);
    assert_eq!(loaded.ci_high, curve.ci_high);
}

#[test]
fn decomposition_holds_for_greedy_and_ucb_lookahead() {
    for bonus in [BonusSpec::Zero, BonusSpec::Ucb(1.0)] {
        let cfg = ExperimentConfig::new(PriorSpec::uniform(2), PolicySpec::Elsv { bonus, depth: 1 }, 50, 300, 2);
        let report = verify_decomposition(&cfg).unwrap().check().unwrap();
        assert!(report.is_finite());
        assert!(report.min_pathwise_slack > -1e-9);
    }
}

#[test]
fn ucb_residual_is_optimistic_on_average_early() {
    use banditlab::beta::BetaSampler;
    use banditlab::elsv::decision_table;
    use banditlab::index::{index_policy_choose, Ucb};
    use banditlab::{ArmPosterior, BonusSource, UcbParams};
    use rand::distributions::Distribution;

    let bonus = BonusSource::Ucb(UcbParams::default());
    let state = BanditState::from_arms(vec![ArmPosterior::new(2, 1).unwrap(), ArmPosterior::new(1, 2).unwrap()]).unwrap();
    let tables: Vec<_> = (0..2).map(|_| decision_table(state.t, &bonus, 1.0, 0).unwrap()).collect();
    let chosen = index_policy_choose(&state, &Ucb::new(1.0).unwrap()).unwrap();
    let samplers: Vec<_> = state.arms.iter().map(|&a| BetaSampler::new(a)).collect();
    let mut rng = banditlab::rng::stream(5, banditlab::rng::Purpose::Aux, 0);
    let draws = 10_000;
    let mut total = 0.0;
    for _ in 0..draws {
        let mu: Vec<f64> = samplers.iter().map(|s| s.sample(&mut rng)).collect();
        total += residual_phi(&mu, &state, chosen, &tables, &[1.0, 1.0]).unwrap();
    }
    assert!(total / draws as f64 >= 0.0, "{}", total / draws as f64);
}
