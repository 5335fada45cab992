use loco_core::engine::partition_features;
use loco_core::linalg::{cholesky, dot, norm, standardize_columns, DenseMatrix};
use loco_core::projections::fwht;
use loco_core::solvers::{ridge_closed_form, ridge_objective, ridge_sdca, RidgeProblem, SdcaOptions};
use proptest::prelude::*;

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = DenseMatrix> {
    (rows, cols).prop_flat_map(|(n, d)| {
        prop::collection::vec(-3.0f64..3.0, n * d).prop_map(move |v| DenseMatrix::new(n, d, v).unwrap())
    })
}

fn problem() -> impl Strategy<Value = (DenseMatrix, Vec<f64>)> {
    matrix(4..20, 1..12).prop_flat_map(|x| {
        let n = x.rows();
        (Just(x), prop::collection::vec(-5.0f64..5.0, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn standardizing_twice_changes_nothing(x in matrix(3..15, 1..6)) {
        let once = standardize_columns(&x).unwrap().matrix;
        let twice = standardize_columns(&once).unwrap().matrix;
        prop_assert!(once.sub(&twice).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn cholesky_round_trip(a in matrix(1..12, 1..12)) {
        let mut s = a.gram();
        s.add_to_diagonal(1.0);
        let l = cholesky(&s).unwrap();
        let back = l.matmul(&l.transpose()).unwrap();
        prop_assert!(back.sub(&s).unwrap().max_abs() < 1e-9 * s.max_abs());
    }

    #[test]
    fn sdca_gap_bounds_suboptimality((x, y) in problem(), lambda in 0.05f64..2.0) {
        let p = RidgeProblem::new(&x, &y, lambda).unwrap();
        let exact = ridge_closed_form(&p).unwrap();
        let (w, diag) = ridge_sdca(&p, &SdcaOptions { gap_tol: 1e-6, max_epochs: 20, seed: 1 }).unwrap();
        let best = ridge_objective(&x, &y, &exact, lambda).unwrap();
        let got = ridge_objective(&x, &y, &w, lambda).unwrap();
        prop_assert!(got >= best - 1e-9 * best.max(1.0));
        prop_assert!(got - best <= diag.gap + 1e-9 * best.max(1.0));
    }

    #[test]
    fn ridge_norm_shrinks_with_lambda((x, y) in problem(), l1 in 0.01f64..1.0, factor in 1.5f64..10.0) {
        let a = ridge_closed_form(&RidgeProblem::new(&x, &y, l1).unwrap()).unwrap();
        let b = ridge_closed_form(&RidgeProblem::new(&x, &y, l1 * factor).unwrap()).unwrap();
        prop_assert!(norm(&b) <= norm(&a) * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn ridge_commutes_with_feature_rotation((x, y) in problem(), seed in prop::collection::vec(-1.0f64..1.0, 12)) {
        let d = x.cols();
        let v = &seed[..d];
        prop_assume!(norm(v) > 0.1);
        // Householder reflection Q = I − 2vvᵀ/‖v‖².
        let vv = dot(v, v);
        let q = DenseMatrix::from_fn(d, d, |i, j| f64::from(u8::from(i == j)) - 2.0 * v[i] * v[j] / vv);
        let xq = x.matmul(&q).unwrap();
        let b = ridge_closed_form(&RidgeProblem::new(&x, &y, 0.3).unwrap()).unwrap();
        let bq = ridge_closed_form(&RidgeProblem::new(&xq, &y, 0.3).unwrap()).unwrap();
        let rotated = q.t_matvec(&b).unwrap();
        let err: f64 = rotated.iter().zip(&bq).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-8 * norm(&b).max(1.0));
    }

    #[test]
    fn hadamard_is_an_involution(log in 0u32..8, raw in prop::collection::vec(-10.0f64..10.0, 128)) {
        let v = &raw[..1 << log];
        let h = fwht(v).unwrap();
        prop_assert!((norm(&h) - norm(v)).abs() < 1e-9 * norm(v).max(1.0));
        let back = fwht(&h).unwrap();
        prop_assert!(back.iter().zip(v).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn partition_is_a_balanced_cover(p in 1usize..300, k in 1usize..20, seed in any::<u64>()) {
        prop_assume!(k <= p);
        let part = partition_features(p, k, seed).unwrap();
        let mut seen = vec![false; p];
        for b in part.blocks() {
            prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(b.len() == p / k || b.len() == p / k + 1);
            for &i in b {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
    }
}
