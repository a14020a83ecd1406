//! Invariants checked on random graphs and features.

use gadc_core::diffusion::{beta, plain_row_stochastic, DENSE_VERIFY_CAP};
use gadc_core::perturb::random_graph;
use gadc_core::seed::{rng, rng_indexed, Stream};
use gadc_core::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn graph(seed: u64, n: usize, p: f64) -> Graph {
    random_graph(n, p, &mut rng(seed, Stream::GraphEdges)).unwrap()
}

fn feats(seed: u64, n: usize, d: usize) -> FeatureMatrix {
    let mut r = rng(seed, Stream::Features);
    FeatureMatrix::new(Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut r))).unwrap()
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn cfg(lambda: f64, k: usize, kind: NormKind) -> DiffusionConfig {
    DiffusionConfig {
        lambda,
        k,
        kind,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalized_adjacency_in_unit_range(seed in any::<u64>(), n in 1usize..40, p in 0.0f64..0.5) {
        let g = graph(seed, n, p);
        for kind in [NormKind::Symmetric, NormKind::RowStochastic] {
            let na = normalize(&g, kind);
            prop_assert!(na.matrix.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert_eq!(na.matrix.nnz(), 2 * g.edge_count() + n);
        }
        prop_assert!(normalize(&g, NormKind::Symmetric).matrix.max_asymmetry() < 1e-15);
        for s in normalize(&g, NormKind::RowStochastic).matrix.row_sums() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn row_sums_equal_beta(seed in any::<u64>(), n in 1usize..40, p in 0.0f64..0.4, lambda in 0.1f64..50.0, k in 0usize..20) {
        let (_, t) = plain_row_stochastic(&graph(seed, n, p));
        let s = materialize_s(&t, &cfg(lambda, k, NormKind::RowStochastic), DENSE_VERIFY_CAP).unwrap();
        let b = beta(lambda, k);
        for row in s.rows() {
            prop_assert!((row.sum() - b).abs() < 1e-12);
            let sq: f64 = row.iter().map(|v| v * v).sum();
            prop_assert!(sq >= b * b / n as f64 - 1e-12 && sq <= b * b + 1e-12);
        }
    }

    #[test]
    fn diffusion_is_linear(seed in any::<u64>(), n in 2usize..30, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = graph(seed, n, 0.3);
        let t = TransitionMatrix::plain(&normalize(&g, NormKind::Symmetric));
        let c = cfg(5.0, 7, NormKind::Symmetric);
        let x = feats(seed, n, 3);
        let y = feats(seed ^ 1, n, 3);
        let combo = FeatureMatrix::new(x.as_array() * a + y.as_array() * b).unwrap();
        let lhs = diffuse_features(&t, &combo, &c).unwrap();
        let rhs = diffuse_features(&t, &x, &c).unwrap().into_array() * a
            + diffuse_features(&t, &y, &c).unwrap().into_array() * b;
        prop_assert!(max_abs(&(lhs.into_array() - rhs)) < 1e-12);
    }

    #[test]
    fn s_grows_entrywise_with_k(seed in any::<u64>(), n in 1usize..25, k in 0usize..12) {
        let g = graph(seed, n, 0.3);
        let t = TransitionMatrix::plain(&normalize(&g, NormKind::Symmetric));
        let s0 = materialize_s(&t, &cfg(2.0, k, NormKind::Symmetric), DENSE_VERIFY_CAP).unwrap();
        let s1 = materialize_s(&t, &cfg(2.0, k + 1, NormKind::Symmetric), DENSE_VERIFY_CAP).unwrap();
        prop_assert!(s0.iter().all(|&v| v >= 0.0));
        prop_assert!(s1.iter().zip(&s0).all(|(a, b)| a >= b));
        prop_assert!(max_abs(&(&s0 - &s0.t())) < 1e-14);
    }

    #[test]
    fn dropping_low_orders_removes_first_two_terms(seed in any::<u64>(), n in 1usize..25, k in 2usize..10) {
        let g = graph(seed, n, 0.3);
        let na = normalize(&g, NormKind::Symmetric);
        let t = TransitionMatrix::plain(&na);
        let x = feats(seed, n, 2);
        let full = cfg(3.0, k, NormKind::Symmetric);
        let dropped = DiffusionConfig { drop_low_order: true, ..full };
        let f_full = diffuse_features(&t, &x, &full).unwrap().into_array();
        let f_drop = diffuse_features(&t, &x, &dropped).unwrap().into_array();
        let tx = na.matrix.to_dense().dot(x.as_array());
        let low = (x.as_array() + &(tx * full.ratio())) * full.alpha();
        prop_assert!(max_abs(&(f_full - f_drop - low)) < 1e-12);
    }

    #[test]
    fn option3_equals_option2_on_edges(seed in any::<u64>(), n in 2usize..30, d in 1usize..6) {
        let g = graph(seed, n, 0.25);
        let x = feats(seed, n, d);
        let p2 = phi_option2(&x, 1000).unwrap();
        let p3 = phi_option3(&g, &x).unwrap();
        prop_assert_eq!(p3.nnz(), 2 * g.edge_count());
        for (i, j, v) in p3.iter() {
            prop_assert!((v - p2[[i, j]]).abs() <= 1e-12);
        }
        let fro: f64 = p2.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(fro == 0.0 || (fro - 1.0).abs() < 1e-12);
    }

    #[test]
    fn option4_is_symmetric_on_attacked_pattern(seed in any::<u64>(), n in 2usize..30) {
        let g = graph(seed, n, 0.3);
        let x = feats(seed, n, 3);
        let t = reconstruct_option4(&g, &x).unwrap();
        prop_assert!(t.op.max_asymmetry() < 1e-15);
        let base = normalize(&g, NormKind::Symmetric).matrix;
        let pattern: Vec<(usize, usize)> = t.op.entries().map(|(i, j, _)| (i, j)).collect();
        let want: Vec<(usize, usize)> = base.iter().map(|(i, j, _)| (i, j)).collect();
        prop_assert_eq!(pattern, want);
        prop_assert!(t.op.entries().all(|(_, _, v)| (0.0..=1.0 + 1e-15).contains(&v)));
    }

    #[test]
    fn tau_between_one_and_n(seed in any::<u64>(), n in 1usize..30, p in 0.0f64..0.5) {
        let (_, t) = plain_row_stochastic(&graph(seed, n, p));
        let s = materialize_s(&t, &cfg(4.0, 6, NormKind::RowStochastic), DENSE_VERIFY_CAP).unwrap();
        let (tau, per_node) = connectivity_factor(s.view()).unwrap();
        prop_assert!(tau >= 1.0 - 1e-12 && tau <= n as f64 + 1e-9);
        prop_assert_eq!(per_node.len(), n);
    }

    #[test]
    fn perturbation_keeps_graph_simple(seed in any::<u64>(), rate in 0.0f64..1.5, mode_ix in 0usize..3) {
        let mode = [PerturbMode::AddCrossClass, PerturbMode::RemoveWithinClass, PerturbMode::Mixed][mode_ix];
        let g = graph(seed, 30, 0.2);
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let (p, s) = perturb_structure(&g, &labels, rate, mode, seed).unwrap();
        prop_assert!(p.is_undirected());
        prop_assert_eq!(p.self_loop_count(), 0);
        prop_assert_eq!(p.edge_count() + s.removed, g.edge_count() + s.added);
        prop_assert_eq!(s.requested, (rate * g.edge_count() as f64).floor() as usize);
        prop_assert!(s.added + s.removed <= s.requested);
        let again = perturb_structure(&g, &labels, rate, mode, seed).unwrap().0;
        prop_assert_eq!(p, again);
    }

    #[test]
    fn scores_shift_does_not_change_prediction(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let mut r = rng_indexed(seed, Stream::Verify, 0);
        let s = Array2::from_shape_simple_fn((6, 4), || StandardNormal.sample(&mut r));
        prop_assert_eq!(gadc_core::model::predict(s.view()), gadc_core::model::predict((&s + shift).view()));
    }

    #[test]
    fn row_normalization_gives_unit_l1_rows(seed in any::<u64>(), n in 1usize..20, d in 1usize..6) {
        let x = row_normalize_features(&feats(seed, n, d));
        for row in x.as_array().rows() {
            let l1: f64 = row.iter().map(|v| v.abs()).sum();
            prop_assert!(l1 == 0.0 || (l1 - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn streams_are_independent() {
    use rand::Rng;
    let a: u64 = rng(7, Stream::Init).random();
    let b: u64 = rng(7, Stream::Dropout).random();
    let c: u64 = rng_indexed(7, Stream::Init, 1).random();
    assert!(a != b && a != c && b != c);
    let again: u64 = rng(7, Stream::Init).random();
    assert_eq!(a, again);
}
