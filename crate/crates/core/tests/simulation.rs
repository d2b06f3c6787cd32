use std::path::PathBuf;

use coxcindex::simulation::{
    gen_covariates, gen_survival, replication_rng, simulate, stratified_split, CvSettings, ExperimentDesign,
    StratifiedSettings, METRIC_ALL_PAIRS, METRIC_BASELINE_ADJUSTED, METRIC_NULL_MODEL, METRIC_WITHIN_STRATA,
};
use coxcindex::{
    run_cv_experiment, run_stratified_experiment, Censoring, CovariateDesign, CvMetric,
    CvScenario, ExperimentConfig, SimConfig,
};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn lag1_correlation(x: &[Vec<f64>]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for row in x {
        for w in row.windows(2) {
            num += w[0] * w[1];
            den += 0.5 * (w[0] * w[0] + w[1] * w[1]);
        }
    }
    num / den
}

#[test]
fn ar1_moments() {
    let x = gen_covariates(5000, 10, CovariateDesign::Ar1 { rho: 0.7 }, 1).unwrap();
    assert!((lag1_correlation(&x) - 0.7).abs() < 0.03);
    for j in 0..10 {
        let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
        let m = mean(&col);
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.1, "column {j}: {var}");
    }
    let iid = gen_covariates(5000, 10, CovariateDesign::IidNormal, 2).unwrap();
    assert!(lag1_correlation(&iid).abs() < 3.0 / (5000.0_f64 * 10.0).sqrt());
    let zero = gen_covariates(5000, 10, CovariateDesign::Ar1 { rho: 0.0 }, 3).unwrap();
    assert!(lag1_correlation(&zero).abs() < 3.0 / (5000.0_f64 * 10.0).sqrt());
}

#[test]
fn exponential_survival_times() {
    let n = 5000;
    let x = vec![vec![0.0]; n];
    let strata = vec![0; n];
    let (t1, e) = gen_survival(&x, &strata, &[0.0], &[1.0], None, 4).unwrap();
    assert!(e.iter().all(|&v| v));
    assert!((mean(&t1) - 1.0).abs() < 0.05);

    // Kolmogorov-Smirnov distance to Exp(1), 5% critical value
    let mut sorted = t1.clone();
    sorted.sort_by(f64::total_cmp);
    let ks = sorted
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let cdf = 1.0 - (-t).exp();
            (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
        })
        .fold(0.0, f64::max);
    assert!(ks < 1.36 / (n as f64).sqrt(), "{ks}");

    let (t2, _) = gen_survival(&x, &strata, &[0.0], &[2.0], None, 5).unwrap();
    assert!((mean(&t2) / mean(&t1) - 0.5).abs() < 0.05);
}

#[test]
fn capped_predictor_keeps_times_finite() {
    let x = vec![vec![1e9], vec![-1e9]];
    let (t, _) = gen_survival(&x, &[0, 0], &[1.0], &[1.0], None, 6).unwrap();
    assert!(t.iter().all(|v| v.is_finite() && *v > 0.0));
}

#[test]
fn censoring_fractions() {
    let n = 5000;
    let x = vec![vec![0.0]; n];
    let (t, _) = gen_survival(&x, &vec![0; n], &[0.0], &[1.0], None, 7).unwrap();
    let fraction = |rate: f64| {
        let (obs, events) = coxcindex::simulation::apply_censoring(&t, Censoring::Exponential { rate }, 8).unwrap();
        assert!(obs.iter().zip(&t).all(|(o, t)| o <= t));
        events.iter().filter(|&&e| !e).count() as f64 / n as f64
    };
    assert!(fraction(1e-6) < 0.01);
    assert!((fraction(1.0) - 0.5).abs() < 0.03);
}

#[test]
fn generators_are_deterministic() {
    let cfg = SimConfig::cv_scenario(CvScenario::Ar1Misspecified);
    let a = simulate(&mut replication_rng(9, 3), &cfg).unwrap();
    let b = simulate(&mut replication_rng(9, 3), &cfg).unwrap();
    assert_eq!(a.dataset, b.dataset);
    let c = simulate(&mut replication_rng(9, 4), &cfg).unwrap();
    assert_ne!(a.dataset, c.dataset);
}

#[test]
fn split_is_stratified() {
    let cfg = SimConfig::stratified_default();
    let mut rng = replication_rng(10, 0);
    let sim = simulate(&mut rng, &cfg).unwrap();
    let (train, test) = stratified_split(&mut rng, &sim.dataset, 0.7).unwrap();
    assert_eq!(train.len() + test.len(), cfg.n);
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..cfg.n).collect::<Vec<_>>());
    for &k in sim.dataset.strata() {
        let size = |idx: &[usize]| idx.iter().filter(|&&i| sim.dataset.observation(i).stratum == k).count();
        assert_eq!(size(&train), 70);
        assert_eq!(size(&test), 30);
    }
}

#[test]
fn single_replication_shape() {
    let cfg = SimConfig {
        n: 200,
        ..SimConfig::stratified_default()
    };
    let result = run_stratified_experiment(&cfg, &StratifiedSettings::default(), 1).unwrap();
    assert_eq!(result.replications.len(), 1);
    for metric in [METRIC_WITHIN_STRATA, METRIC_ALL_PAIRS, METRIC_BASELINE_ADJUSTED] {
        let v = result.replications[0].value(metric).unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn null_signal_concordance_is_half() {
    // equal baselines, so that cross-stratum pairs carry no signal either
    let cfg = SimConfig {
        beta_true: vec![0.0; 10],
        baseline_hazards: vec![1.0; 10],
        ..SimConfig::stratified_default()
    };
    let result = run_stratified_experiment(&cfg, &StratifiedSettings::default(), 100).unwrap();
    assert_eq!(result.n_failed, 0);
    for metric in [METRIC_WITHIN_STRATA, METRIC_ALL_PAIRS, METRIC_BASELINE_ADJUSTED] {
        let m = mean(&result.series(metric));
        assert!((m - 0.5).abs() < 0.03, "{metric}: {m}");
    }
}

#[test]
fn experiments_are_reproducible() {
    let cfg = SimConfig {
        n: 300,
        ..SimConfig::stratified_default()
    };
    let a = run_stratified_experiment(&cfg, &StratifiedSettings::default(), 3).unwrap();
    let b = run_stratified_experiment(&cfg, &StratifiedSettings::default(), 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cv_experiment_beats_null_model() {
    let cfg = SimConfig::cv_scenario(CvScenario::IidCorrect);
    let settings = CvSettings {
        n_lambda: 20,
        ..CvSettings::default()
    };
    let result = run_cv_experiment(&cfg, &settings, 20).unwrap();
    assert_eq!(result.n_failed, 0);
    let mut better = 0;
    for rec in &result.replications {
        let null = rec.value(METRIC_NULL_MODEL).unwrap();
        assert!((null - 3.0).abs() < 1e-12);
        if CvMetric::ALL.iter().all(|m| rec.value(m.name()).unwrap() < null) {
            better += 1;
        }
    }
    assert!(better * 100 >= 95 * result.replications.len());
}

#[test]
fn equal_selection_gives_equal_error() {
    let cfg = SimConfig::cv_scenario(CvScenario::IidCorrect);
    let settings = CvSettings {
        n_lambda: 10,
        ..CvSettings::default()
    };
    let result = run_cv_experiment(&cfg, &settings, 4).unwrap();
    for rec in &result.replications {
        for a in &rec.values {
            for b in &rec.values {
                if a.lambda.is_some() && a.lambda == b.lambda {
                    assert_eq!(a.value, b.value);
                }
            }
        }
    }
}

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    let text = std::fs::read_to_string(config_dir().join(name)).unwrap();
    ExperimentConfig::from_toml(&text).unwrap()
}

fn assert_same_simulation(got: &SimConfig, want: &SimConfig) {
    assert_eq!(got.baseline_hazards.len(), want.baseline_hazards.len());
    for (a, b) in got.baseline_hazards.iter().zip(&want.baseline_hazards) {
        assert!((a - b).abs() < 1e-12);
    }
    let strip = |c: &SimConfig| SimConfig {
        baseline_hazards: Vec::new(),
        ..c.clone()
    };
    assert_eq!(strip(got), strip(want));
}

#[test]
fn shipped_configs_match_presets() {
    let regular = load("stratified_regular.toml");
    assert_same_simulation(&regular.simulation, &SimConfig::stratified_default());
    assert_eq!(regular.replications, 200);
    assert!(matches!(regular.design, ExperimentDesign::Stratified(s) if s == StratifiedSettings::default()));
    assert_same_simulation(&load("stratified_low_signal.toml").simulation, &SimConfig::stratified_low_signal());

    for (file, scenario) in [
        ("cv_iid_correct.toml", CvScenario::IidCorrect),
        ("cv_ar1_correct.toml", CvScenario::Ar1Correct),
        ("cv_iid_misspecified.toml", CvScenario::IidMisspecified),
        ("cv_ar1_misspecified.toml", CvScenario::Ar1Misspecified),
    ] {
        let cfg = load(file);
        assert_same_simulation(&cfg.simulation, &SimConfig::cv_scenario(scenario));
        assert_eq!(cfg.replications, 50);
        assert!(matches!(cfg.design, ExperimentDesign::Cv(s) if s == CvSettings::default()));
    }
}

#[test]
fn config_round_trips_and_rejects_unknown_fields() {
    let cfg = load("cv_ar1_misspecified.toml");
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    let text = std::fs::read_to_string(config_dir().join("stratified_regular.toml")).unwrap();
    let bad = text.replace("[simulation]", "[simulation]\nsurprise = 1");
    assert!(ExperimentConfig::from_toml(&bad).is_err());
}
