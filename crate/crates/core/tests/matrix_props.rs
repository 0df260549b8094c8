use misclass_core::matrix::ROW_SUM_TOL;
use misclass_core::*;
use proptest::prelude::*;

fn base_params() -> impl Strategy<Value = BaseParams> {
    prop_oneof![Just(3usize), Just(4), Just(5), Just(8)].prop_flat_map(|c| {
        (
            prop::collection::vec(0.01f64..0.99, c),
            prop::collection::vec(0.05f64..1.0, c),
        )
            .prop_map(|(a, w)| {
                let total: f64 = w.iter().sum();
                BaseParams::new(a, w.iter().map(|x| x / total).collect()).unwrap()
            })
    })
}

fn stochastic_matrix() -> impl Strategy<Value = MisclassMatrix> {
    (2usize..7).prop_flat_map(|c| {
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, c), c).prop_map(|rows| {
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|r| {
                    let t: f64 = r.iter().sum();
                    r.into_iter().map(|x| x / t).collect()
                })
                .collect();
            MisclassMatrix::from_rows(&rows).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn base_matrix_rows_sum_to_one(p in base_params()) {
        let m = build_base_matrix(&p);
        for i in 0..m.dim() {
            prop_assert!((m.row(i).iter().sum::<f64>() - 1.0).abs() < ROW_SUM_TOL);
        }
    }

    #[test]
    fn base_matrix_has_constant_odds(p in base_params()) {
        let spread = OddsTable::from_probs(&build_base_matrix(&p)).max_spread().unwrap();
        prop_assert!(spread < 1e-10, "{spread}");
    }

    #[test]
    fn constant_odds_recover_base_params(p in base_params()) {
        let m = build_base_matrix(&p);
        let back = build_base_matrix(&recover_base_params(&m).unwrap());
        prop_assert!(back.max_abs_diff(&m) < 1e-8);
    }

    #[test]
    fn odds_compose_transitively(p in base_params()) {
        let eta = OddsTable::from_probs(&build_base_matrix(&p)).common_odds();
        let c = p.dim();
        for j in 0..c {
            for k in 0..c {
                for l in 0..c {
                    let lhs = eta[j][k].unwrap() * eta[k][l].unwrap();
                    let rhs = eta[j][l].unwrap();
                    prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
                }
            }
        }
    }

    #[test]
    fn rel_fp_of_base_matrix_ignores_accuracy(p in base_params()) {
        let d = decompose(&build_base_matrix(&p));
        let want = base_rel_fp(p.pull()).unwrap();
        for (got, want) in d.rel_fp.iter().zip(&want) {
            for (g, w) in got.as_ref().unwrap().iter().zip(want) {
                prop_assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decompose_recompose_round_trip(m in stochastic_matrix()) {
        let back = recompose(&decompose(&m)).unwrap();
        prop_assert!(back.max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn pooling_adds_totals(
        rows in prop::collection::vec(prop::collection::vec(0u64..40, 9), 1..7)
    ) {
        let causes = CauseSet::numbered(3).unwrap();
        let mats: Vec<CountMatrix> = rows
            .iter()
            .map(|r| CountMatrix::new(causes.clone(), r.clone()).unwrap())
            .collect();
        let pooled = pool(&mats).unwrap();
        prop_assert_eq!(pooled.total(), mats.iter().map(CountMatrix::total).sum::<u64>());
    }
}

#[test]
fn perturbed_matrix_has_positive_spread() {
    let p = BaseParams::new(vec![0.5, 0.4, 0.3, 0.6], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let mut rows: Vec<Vec<f64>> = (0..4).map(|i| build_base_matrix(&p).row(i).to_vec()).collect();
    rows[0][2] *= 1.5;
    let t: f64 = rows[0].iter().sum();
    rows[0].iter_mut().for_each(|x| *x /= t);
    let odds = OddsTable::from_probs(&MisclassMatrix::from_rows(&rows).unwrap());
    assert!(odds.pair(1, 2).unwrap().spread.unwrap() > 1e-3);
    assert!(odds.pair(2, 3).unwrap().spread.unwrap() > 1e-3);
    assert!(odds.pair(1, 3).unwrap().spread.unwrap() < 1e-12);
}

#[test]
fn never_predicted_cause_is_missing() {
    let causes = CauseSet::numbered(4).unwrap();
    let t = CountMatrix::from_rows(
        causes,
        &[vec![0, 5, 3, 2], vec![0, 7, 2, 1], vec![0, 1, 9, 4], vec![0, 2, 2, 8]],
    )
    .unwrap();
    let odds = OddsTable::from_counts(&t);
    for p in odds.pairs.iter().filter(|p| p.j == 0 || p.k == 0) {
        assert!(p.entries.iter().all(|e| e.1.is_none()));
        assert_eq!(p.spread, None);
    }
    assert!(odds.pair(1, 2).unwrap().spread.is_some());
}

#[test]
fn uniform_pull_rel_fp() {
    let q = base_rel_fp(&[0.2; 5]).unwrap();
    assert!(q.iter().flatten().all(|&x| (x - 0.25).abs() < 1e-15));
    let q = base_rel_fp(&[0.5, 0.3, 0.2]).unwrap();
    assert!((q[0][0] - 0.6).abs() < 1e-15 && (q[0][1] - 0.4).abs() < 1e-15);
    assert!(base_rel_fp(&[1.0, 0.0]).is_err());
}

#[test]
fn identity_decomposes_to_degenerate_rows() {
    let d = decompose(&MisclassMatrix::identity(3));
    assert!(d.rel_fp.iter().all(Option::is_none));
    assert_eq!(recompose(&d).unwrap(), MisclassMatrix::identity(3));
}
