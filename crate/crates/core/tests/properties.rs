use proptest::prelude::*;
use signedprop_core::balance::{is_structurally_balanced, row_softmax, sid, SignedGraph};
use signedprop_core::propagate::{clamp_fc, pairwise_dynamics, signed_step, PairwiseParams};
use signedprop_core::rng::{seeded, streams};
use signedprop_core::spectral::f_beta;
use signedprop_core::{homophily_level, row_normalize, DenseMatrix, LabelSet, SparseGraph};

fn square(max_n: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0..5.0f64, n * n)
            .prop_map(move |v| DenseMatrix::from_vec(n, n, v).unwrap())
    })
}

fn graph_and_classes() -> impl Strategy<Value = (SparseGraph, Vec<usize>)> {
    (2..=16usize).prop_flat_map(|n| {
        (
            prop::collection::vec((0..n, 0..n), 0..3 * n),
            prop::collection::vec(0..3usize, n),
        )
            .prop_map(move |(pairs, classes)| {
                let mut g = SparseGraph::new(n);
                for (i, j) in pairs.into_iter().filter(|(i, j)| i != j) {
                    g.add_edge(i, j).unwrap();
                }
                (g, classes)
            })
    })
}

fn signs_for(part: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(part.len(), part.len(), |i, j| {
        if part[i] == part[j] {
            1.0
        } else {
            -1.0
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn row_normalization_is_idempotent(a in square(8)) {
        let once = row_normalize(&a).unwrap();
        let twice = row_normalize(&once).unwrap();
        prop_assert!(once.max_abs_diff(&twice).unwrap() < 1e-12);
        for s in once.row_sums() {
            prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn homophily_ignores_class_names((g, classes) in graph_and_classes(), shift in 1..3usize) {
        let renamed: Vec<usize> = classes.iter().map(|c| (c + shift) % 3).collect();
        let h = homophily_level(&g, &LabelSet::fully_labeled(classes)).ok();
        let h2 = homophily_level(&g, &LabelSet::fully_labeled(renamed)).ok();
        prop_assert_eq!(h.is_some(), g.num_edges() > 0);
        prop_assert_eq!(h, h2);
    }

    #[test]
    fn sid_is_invariant_under_node_relabeling(
        (a, classes, perm) in (2..=10usize).prop_flat_map(|n| (
            prop::collection::vec(-1.0..1.0f64, n * n).prop_map(move |v| DenseMatrix::from_vec(n, n, v).unwrap()),
            prop::collection::vec(0..3usize, n),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        ))
    ) {
        let n = classes.len();
        let permuted = DenseMatrix::from_fn(n, n, |i, j| a[(perm[i], perm[j])]);
        let permuted_classes: Vec<usize> = perm.iter().map(|&p| classes[p]).collect();
        let r1 = sid(&a, &LabelSet::fully_labeled(classes), 0.0).unwrap();
        let r2 = sid(&permuted, &LabelSet::fully_labeled(permuted_classes), 0.0).unwrap();
        prop_assert!((r1.sid - r2.sid).abs() < 1e-9);
        prop_assert!((r1.p_avg - r2.p_avg).abs() < 1e-9);
        prop_assert!((r1.n_avg - r2.n_avg).abs() < 1e-9);
    }

    #[test]
    fn softmax_rows_are_distributions(a in square(8)) {
        let s = row_softmax(&a.scale(-3.0));
        for row in s.row_iter() {
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clamp_is_idempotent(z in -1e6..1e6f64, c in 1e-3..1e3f64) {
        let once = clamp_fc(z, c);
        prop_assert_eq!(clamp_fc(once, c), once);
        prop_assert!(once.abs() <= c);
    }

    #[test]
    fn attraction_only_stays_in_the_initial_range(
        x0 in prop::collection::vec(-1.0..1.0f64, 2..12),
        alpha in 0.0..1.0f64,
        seed in any::<u64>(),
    ) {
        let n = x0.len();
        let signs = DenseMatrix::filled(n, n, 1.0);
        let params = PairwiseParams { alpha, beta: 0.0, c: 1.0, steps: 500, record_every: 0 };
        let run = pairwise_dynamics(&x0, &signs, &params, &mut seeded(seed, streams::DYNAMICS)).unwrap();
        let lo = x0.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(run.final_state.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
    }

    #[test]
    fn constants_are_fixed_points(n in 5..20usize, value in -10.0..10.0f64, alpha in 0.0..1.0f64, beta in 0.0..3.0f64) {
        let cycle: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let skip: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 2) % n)).collect();
        let g = SignedGraph::from_supports(
            &SparseGraph::from_edges(n, &cycle).unwrap(),
            &SparseGraph::from_edges(n, &skip).unwrap(),
        ).unwrap();
        let x = DenseMatrix::filled(n, 3, value);
        let next = signed_step(&x, &g, alpha, beta).unwrap();
        prop_assert!(next.max_abs_diff(&x).unwrap() < 1e-12 * value.abs().max(1.0));
    }

    #[test]
    fn repulsion_spectrum_grows_with_beta(n in 5..14usize, b1 in 0.0..5.0f64, db in 0.0..5.0f64) {
        let path: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let chords: Vec<(usize, usize)> = (0..n - 3).map(|i| (i, i + 3)).collect();
        let pos = SparseGraph::from_edges(n, &path).unwrap();
        let neg = SparseGraph::from_edges(n, &chords).unwrap();
        let f1 = f_beta(&pos, &neg, 0.2, b1).unwrap();
        let f2 = f_beta(&pos, &neg, 0.2, b1 + db).unwrap();
        prop_assert!(f2 >= f1 - 1e-10);
    }

    #[test]
    fn balanced_partitions_have_zero_imbalance(part in prop::collection::vec(0..2usize, 2..30)) {
        let signs = signs_for(&part);
        prop_assert_eq!(sid(&signs, &LabelSet::fully_labeled(part.clone()), 0.0).unwrap().sid, 0.0);
        prop_assert!(is_structurally_balanced(&signs, 0.0).unwrap().is_weakly_balanced());
    }
}
