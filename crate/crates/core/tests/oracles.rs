use nalgebra::DMatrix;
use signedprop_core::csbm::{generate, CsbmParams};
use signedprop_core::rng::{seeded, streams};
use signedprop_core::spectral::{critical_beta, f_beta};
use signedprop_core::unify::{
    dropedge_mask, random_a_hat, random_features, signed_form, BaselineKind,
};
use signedprop_core::{DenseMatrix, SparseGraph};

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// λmax of the deflated update matrix, computed with nalgebra.
fn f_oracle(pos: &SparseGraph, neg: &SparseGraph, alpha: f64, beta: f64) -> f64 {
    let n = pos.n();
    let a_pos = to_na(&pos.to_dense());
    let a_neg = to_na(&neg.to_dense());
    let l_pos = DMatrix::from_diagonal(&a_pos.column_sum()) - &a_pos;
    let l_neg = DMatrix::from_diagonal(&a_neg.column_sum()) - &a_neg;
    let m = DMatrix::identity(n, n) - l_pos * alpha + l_neg * beta
        - DMatrix::from_element(n, n, 1.0 / n as f64);
    m.symmetric_eigen().eigenvalues.max()
}

#[test]
fn critical_beta_matches_dense_oracle() {
    // path 0-1-2-3 with one repelling chord
    let pos = SparseGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
    let neg = SparseGraph::from_edges(4, &[(0, 3)]).unwrap();
    for beta in [0.0, 0.3, 1.0, 2.5] {
        assert!(
            (f_beta(&pos, &neg, 0.25, beta).unwrap() - f_oracle(&pos, &neg, 0.25, beta)).abs()
                < 1e-10
        );
    }
    let star = critical_beta(&pos, &neg, 0.25).unwrap().beta_star;
    assert!((f_oracle(&pos, &neg, 0.25, star) - 1.0).abs() < 1e-8);
}

#[test]
fn triangle_with_one_negative_edge() {
    let pos = SparseGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let neg = SparseGraph::from_edges(3, &[(0, 2)]).unwrap();
    let star = critical_beta(&pos, &neg, 0.3).unwrap();
    assert!((f_oracle(&pos, &neg, 0.3, star.beta_star) - 1.0).abs() < 1e-8);
    assert!(f_oracle(&pos, &neg, 0.3, 0.9 * star.beta_star) < 1.0);
    assert!(f_oracle(&pos, &neg, 0.3, 1.1 * star.beta_star) > 1.0);
}

#[test]
fn doubling_repulsion_halves_the_threshold() {
    let pos = SparseGraph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
    let neg = SparseGraph::from_weighted_edges(5, &[(0, 3, 1.0), (1, 4, 1.0)]).unwrap();
    let heavy = SparseGraph::from_weighted_edges(5, &[(0, 3, 2.0), (1, 4, 2.0)]).unwrap();
    let b1 = critical_beta(&pos, &neg, 0.2).unwrap().beta_star;
    let b2 = critical_beta(&pos, &heavy, 0.2).unwrap().beta_star;
    assert!((b1 / b2 - 2.0).abs() < 1e-6);
}

#[test]
fn no_repulsion_means_no_threshold() {
    let pos = SparseGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    assert!(!critical_beta(&pos, &SparseGraph::new(3), 0.3)
        .unwrap()
        .is_finite());
}

#[test]
fn appnp_approaches_personalized_pagerank() {
    let mut rng = seeded(2, streams::INSTANCES);
    let a = random_a_hat(12, 0.4, &mut rng);
    let x = random_features(12, 3, &mut rng);
    let alpha = 0.6;
    let kind = BaselineKind::Appnp { alpha, k: 200 };
    let h = signed_form(&kind, &a, &x).unwrap().evaluate(&x).unwrap();
    let solve = (DMatrix::identity(12, 12) - to_na(&a) * alpha)
        .try_inverse()
        .unwrap()
        * to_na(&x)
        * (1.0 - alpha);
    assert!((to_na(&h) - solve).abs().max() < 1e-10);
}

#[test]
fn csbm_degrees_match_expectation() {
    let base = CsbmParams::reference(0);
    let expected = (base.n as f64 / 2.0 - 1.0) * base.p + base.n as f64 / 2.0 * base.q;
    let mean: f64 = (0..200)
        .map(|s| {
            let g = generate(&base.clone().with_seed(s)).unwrap().graph;
            2.0 * g.num_edges() as f64 / g.n() as f64
        })
        .sum::<f64>()
        / 200.0;
    assert!((mean - expected).abs() < 0.1, "{mean} vs {expected}");
}

#[test]
fn csbm_class_means_match_parameters() {
    let inst = generate(&CsbmParams::reference(4)).unwrap();
    let (mut m0, mut m1) = (0.0, 0.0);
    for i in 0..50 {
        m0 += inst.features.row(i).iter().sum::<f64>();
        m1 += inst.features.row(50 + i).iter().sum::<f64>();
    }
    assert!((m0 / 400.0 + 1.0).abs() < 0.2 && (m1 / 400.0 - 1.0).abs() < 0.2);
}

#[test]
fn dropedge_drops_the_expected_share() {
    let g = SparseGraph::complete(60);
    let total = g.num_edges() as f64;
    let dropped: f64 = (0..50)
        .map(|s| {
            dropedge_mask(&g, 0.3, &mut seeded(s, streams::DROPEDGE))
                .unwrap()
                .1
                .num_edges() as f64
        })
        .sum::<f64>()
        / 50.0;
    assert!((dropped / total - 0.3).abs() < 0.01);
    let (kept, gone) = dropedge_mask(&g, 0.3, &mut seeded(1, streams::DROPEDGE)).unwrap();
    assert_eq!(kept.num_edges() + gone.num_edges(), g.num_edges());
    assert!(kept.edges().all(|(i, j, _)| !gone.has_edge(i, j)));
}
