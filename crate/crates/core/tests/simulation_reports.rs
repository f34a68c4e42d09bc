use std::fs;

use indexmap::IndexMap;

use annoplan::corpus::{split_by_context, Dataset, SplitRatios};
use annoplan::metrics::EvalResult;
use annoplan::scorer::{BaselineConfig, ScorerConfig};
use annoplan::simulation::{
    compare_strategies, export_report, load_learning_curve, run_simulation, saturation_report, write_curve_csv,
    CurvePoint, EvalSets, LearningCurve, Metric, SeedCurve, SimulationConfig,
};
use annoplan::strategies::{StrategySpec, WithinRule};
use annoplan::synthetic::{generate, SyntheticConfig};
use annoplan::ErrorKind;

fn split() -> (Dataset, Dataset, Vec<Dataset>) {
    let ds = generate(&SyntheticConfig {
        n_contexts: 20,
        seed: 13,
        ..SyntheticConfig::default()
    });
    let (train, holdout, _) = split_by_context(&ds, SplitRatios([0.8, 0.2, 0.0]), 2).unwrap();
    let ood = generate(&SyntheticConfig {
        name: "ood".into(),
        n_contexts: 4,
        seed: 14,
        style: annoplan::synthetic::Style::NameFirst,
        ..SyntheticConfig::default()
    });
    (train, holdout, vec![ood])
}

fn config(strategy: StrategySpec) -> SimulationConfig {
    SimulationConfig {
        batch_fraction: 0.25,
        strategy,
        seeds: vec![0, 1],
        scorer: ScorerConfig::Baseline {
            config: BaselineConfig {
                epochs: 15,
                ..BaselineConfig::default()
            },
        },
        ..SimulationConfig::default()
    }
}

fn eval(f1: f64) -> EvalResult {
    EvalResult {
        exact_match: f1,
        f1,
        n_samples: 10,
    }
}

/// A hand-built curve over two eval sets.
fn scripted(strategy: StrategySpec, f1s: &[(f64, f64)], seeds: usize) -> LearningCurve {
    let points: Vec<CurvePoint> = f1s
        .iter()
        .enumerate()
        .map(|(i, (holdout, ood))| CurvePoint {
            iteration: i,
            labeled_count: i + 1,
            labeled_fraction: (i + 1) as f64 / f1s.len() as f64,
            scores: IndexMap::from([("holdout".to_string(), eval(*holdout)), ("ood".to_string(), eval(*ood))]),
        })
        .collect();
    LearningCurve {
        config: SimulationConfig {
            strategy,
            seeds: (0..seeds as u64).collect(),
            ..SimulationConfig::default()
        },
        train_name: "train".into(),
        train_size: f1s.len(),
        in_domain_name: "holdout".into(),
        generalization_names: vec!["ood".into()],
        reference: IndexMap::from([("holdout".to_string(), eval(80.0)), ("ood".to_string(), eval(50.0))]),
        per_seed: (0..seeds as u64)
            .map(|seed| SeedCurve {
                seed,
                points: points.clone(),
            })
            .collect(),
        points,
    }
}

#[test]
fn pool_is_conserved_and_averages_are_pointwise() {
    let (train, holdout, ood) = split();
    let sets = EvalSets::new(&holdout, &ood);
    let strategies = [
        StrategySpec::Random,
        StrategySpec::Uncertainty,
        StrategySpec::Difficulty,
        StrategySpec::ContextRoundrobin {
            within: WithinRule::Uncertainty,
        },
    ];
    for strategy in strategies {
        let curve = run_simulation(&train, &sets, &config(strategy.clone())).unwrap();
        for seed in &curve.per_seed {
            let counts: Vec<usize> = seed.points.iter().map(|p| p.labeled_count).collect();
            assert!(counts.windows(2).all(|w| w[0] < w[1]), "{strategy}");
            assert_eq!(*counts.last().unwrap(), train.len(), "{strategy}");
        }
        for (i, p) in curve.points.iter().enumerate() {
            for name in [&holdout.name, &ood[0].name] {
                let mean = curve.per_seed.iter().map(|s| s.points[i].scores[name].f1).sum::<f64>() / 2.0;
                assert!((p.scores[name].f1 - mean).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn identical_seed_replicas_average_to_themselves() {
    let (train, holdout, _) = split();
    let mut c = config(StrategySpec::Uncertainty);
    c.seeds = vec![7, 7, 7];
    let curve = run_simulation(&train, &EvalSets::new(&holdout, &[]), &c).unwrap();
    assert_eq!(curve.points, curve.per_seed[0].points);
}

#[test]
fn simulation_is_deterministic() {
    let (train, holdout, ood) = split();
    let sets = EvalSets::new(&holdout, &ood);
    let c = config(StrategySpec::Difficulty);
    assert_eq!(run_simulation(&train, &sets, &c).unwrap(), run_simulation(&train, &sets, &c).unwrap());
}

#[test]
fn export_cardinality_and_reexport_stability() {
    let curve = scripted(StrategySpec::Random, &[(70.0, 40.0), (80.0, 50.0)], 1);
    let mut csv = Vec::new();
    write_curve_csv(&curve, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.iter().filter(|r| r.starts_with("seed,")).count(), 4);
    assert_eq!(rows.iter().filter(|r| r.starts_with("mean,")).count(), 4);

    let dir = tempfile::tempdir().unwrap();
    let report = saturation_report(&curve, 0.995).unwrap();
    let paths = export_report(&curve, &report, dir.path(), "random").unwrap();
    let before: Vec<Vec<u8>> = [&paths.curve_csv, &paths.curve_json, &paths.saturation_json]
        .iter()
        .map(|p| fs::read(p).unwrap())
        .collect();
    export_report(&curve, &report, dir.path(), "random").unwrap();
    let after: Vec<Vec<u8>> = [&paths.curve_csv, &paths.curve_json, &paths.saturation_json]
        .iter()
        .map(|p| fs::read(p).unwrap())
        .collect();
    assert_eq!(before, after);
    assert_eq!(load_learning_curve(&paths.curve_json).unwrap(), curve);
}

#[test]
fn unwritable_destination_leaves_nothing_behind() {
    let curve = scripted(StrategySpec::Random, &[(70.0, 40.0), (80.0, 50.0)], 1);
    let report = saturation_report(&curve, 0.995).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no").join("such").join("dir");
    let err = export_report(&curve, &report, &missing, "random").unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Io);
    assert!(!missing.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn saturation_report_and_gap() {
    // holdout cutoff 79.6 first met at 3/4; ood cutoff 49.75 met at 1/4.
    let curve = scripted(
        StrategySpec::Random,
        &[(70.0, 49.9), (79.5, 50.0), (79.7, 51.0), (80.1, 50.0)],
        1,
    );
    let report = saturation_report(&curve, 0.995).unwrap();
    let f1: Vec<_> = report.entries.iter().filter(|e| e.metric == Metric::F1).collect();
    assert_eq!(f1[0].saturation_fraction, Some(0.75));
    assert_eq!(f1[1].saturation_fraction, Some(0.25));
    assert!(report.entries.iter().any(|e| e.metric == Metric::Em));
    let gap = report.gaps.iter().find(|g| g.metric == Metric::F1).unwrap();
    assert_eq!(gap.gap, Some(0.5));
}

#[test]
fn strategy_comparison() {
    let random = scripted(StrategySpec::Random, &[(70.0, 40.0), (75.0, 45.0), (80.0, 50.0), (80.0, 50.0)], 2);
    let same = scripted(StrategySpec::Uncertainty, &[(70.0, 40.0), (75.0, 45.0), (80.0, 50.0), (80.0, 50.0)], 2);
    let faster = scripted(StrategySpec::Difficulty, &[(80.0, 50.0), (80.0, 50.0), (80.0, 50.0), (80.0, 50.0)], 2);
    let never = scripted(
        StrategySpec::ContextRoundrobin {
            within: WithinRule::Random,
        },
        &[(10.0, 10.0), (20.0, 20.0), (30.0, 30.0), (40.0, 40.0)],
        2,
    );
    let rows = compare_strategies(&[random.clone(), same, faster, never], Metric::F1, 0.995).unwrap();
    let row = |strategy: &str, set: &str| rows.iter().find(|r| r.strategy == strategy && r.eval_set == set).unwrap();
    assert_eq!(row("uncertainty", "holdout").savings_vs_random, Some(0.0));
    assert!((row("difficulty", "holdout").savings_vs_random.unwrap() - 50.0).abs() < 1e-9);
    assert_eq!(row("difficulty", "holdout").median_seed_saturation, Some(0.25));
    let never_row = row("context_roundrobin", "holdout");
    assert!(never_row.never_saturates);
    assert_eq!(never_row.savings_vs_random, None);

    let mut shifted = random.clone();
    shifted.reference.insert("holdout".into(), eval(81.0));
    shifted.config.strategy = StrategySpec::Uncertainty;
    assert!(compare_strategies(&[random.clone(), shifted], Metric::F1, 0.995).is_err());
    let mut lone = random;
    lone.config.strategy = StrategySpec::Uncertainty;
    assert!(compare_strategies(&[lone], Metric::F1, 0.995).is_err());
}
