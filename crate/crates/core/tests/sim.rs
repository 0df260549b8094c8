use misclass_core::sim::*;
use misclass_core::*;

fn tiny(truth: Variant) -> ScenarioConfig {
    ScenarioConfig {
        n_causes: 3,
        n_countries: 3,
        n_per_country: 40,
        replications: 2,
        methods: vec![Variant::Homogeneous, Variant::FullyHet],
        sampler: SamplerConfig {
            chains: 1,
            warmup: 150,
            draws: 60,
            ..SamplerConfig::default()
        },
        seed: 9,
        ..ScenarioConfig::desk(truth)
    }
}

#[test]
fn large_samples_reproduce_the_truth() {
    let truth = vec![
        MisclassMatrix::from_rows(&[vec![0.7, 0.2, 0.1], vec![0.1, 0.6, 0.3], vec![0.25, 0.25, 0.5]]).unwrap(),
        MisclassMatrix::from_rows(&[vec![0.5, 0.3, 0.2], vec![0.2, 0.7, 0.1], vec![0.1, 0.1, 0.8]]).unwrap(),
    ];
    let cfg = ScenarioConfig {
        n_causes: 3,
        n_countries: 2,
        n_per_country: 10_000,
        truth_matrices: Some(truth.clone()),
        ..ScenarioConfig::desk(Variant::FullyHet)
    };
    let data = generate_dataset(&cfg, 4).unwrap();
    assert_eq!(data.truth, truth);
    for (counts, phi) in data.counts.iter().zip(&truth) {
        assert_eq!(counts.total(), 10_000);
        let p = counts.proportions();
        for i in 0..3 {
            assert!(counts.row_total(i) > 3000);
            for j in 0..3 {
                assert!((p[i].as_ref().unwrap()[j] - phi.get(i, j)).abs() < 0.05);
            }
        }
    }
}

#[test]
fn truth_scenarios_have_their_structure() {
    let homogeneous = generate_dataset(&tiny(Variant::Homogeneous), 1).unwrap();
    assert!(homogeneous.truth.windows(2).all(|w| w[0] == w[1]));

    let partly = generate_dataset(&tiny(Variant::PartlyHet), 1).unwrap();
    let parts: Vec<SensRelFp> = partly.truth.iter().map(decompose).collect();
    for w in parts.windows(2) {
        assert_ne!(w[0].sensitivity, w[1].sensitivity);
        for i in 0..3 {
            let (a, b) = (w[0].rel_fp[i].as_ref().unwrap(), w[1].rel_fp[i].as_ref().unwrap());
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    let fully = generate_dataset(&tiny(Variant::FullyHet), 1).unwrap();
    let parts: Vec<SensRelFp> = fully.truth.iter().map(decompose).collect();
    assert_ne!(parts[0].rel_fp, parts[1].rel_fp);
}

#[test]
fn datasets_depend_only_on_their_seed() {
    let cfg = tiny(Variant::FullyHet);
    let seed = replication_seed(&cfg, 1);
    let a = generate_dataset(&cfg, seed).unwrap();
    let b = generate_dataset(&ScenarioConfig { replications: 7, ..cfg.clone() }, seed).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, generate_dataset(&cfg, replication_seed(&cfg, 0)).unwrap());
}

#[test]
fn margins_shape_the_row_totals() {
    let cfg = ScenarioConfig {
        n_per_country: 20_000,
        margins: Some(vec![0.6, 0.3, 0.1]),
        ..tiny(Variant::Homogeneous)
    };
    let data = generate_dataset(&cfg, 2).unwrap();
    for counts in &data.counts {
        let share = counts.row_total(0) as f64 / 20_000.0;
        assert!((share - 0.6).abs() < 0.02);
    }
}

#[test]
fn tiny_study_is_reproducible_and_complete() {
    let cfg = tiny(Variant::FullyHet);
    let a = run_study(&cfg).unwrap();
    let b = run_study(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.results.len() + a.failures.len(), 4);
    assert_eq!(a.summaries.len(), 2);
    assert_eq!(a.comparisons.len(), 2);
    let cmp = a.comparison(Variant::Homogeneous, Variant::FullyHet).unwrap();
    assert!(cmp.waic_wins <= 2 && cmp.loo_wins <= 2);
    for r in &a.results {
        assert!(r.waic.is_finite() && r.loo_ic.is_finite());
        assert!(r.mse >= 0.0 && r.interval_score > 0.0);
        assert!(r.holdout_interval_score.is_none());
    }
}

#[test]
fn holdout_scores_when_enabled() {
    let cfg = ScenarioConfig {
        replications: 1,
        holdout_folds: 3,
        ..tiny(Variant::PartlyHet)
    };
    let study = run_study(&cfg).unwrap();
    for r in &study.results {
        assert!(r.holdout_interval_score.unwrap() > 0.0);
    }
    assert!(study.summary(Variant::FullyHet).unwrap().holdout_interval_score.is_some());
}
