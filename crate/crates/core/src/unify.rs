//! Anti-oversmoothing baselines written as signed propagation, with direct
//! implementations to check the identities against.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::SparseGraph;
use crate::math;
use crate::matrix::DenseMatrix;
use crate::rng::{seeded, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineKind {
    Sgc,
    BatchNorm,
    PairNorm,
    ContraNorm {
        alpha: f64,
        tau: f64,
    },
    DropEdge {
        drop_prob: f64,
        seed: u64,
    },
    Residual {
        alpha: f64,
    },
    /// `k + 1` propagation steps of `(1 − α)X₀ + αÂX`.
    Appnp {
        alpha: f64,
        k: usize,
    },
    /// Fusion weights `α_0..α_k`, summing to one.
    JknetDagnn {
        weights: Vec<f64>,
    },
}

impl BaselineKind {
    pub const TAGS: [&'static str; 8] = [
        "sgc",
        "batchnorm",
        "pairnorm",
        "contranorm",
        "dropedge",
        "residual",
        "appnp",
        "jknet_dagnn",
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            BaselineKind::Sgc => "sgc",
            BaselineKind::BatchNorm => "batchnorm",
            BaselineKind::PairNorm => "pairnorm",
            BaselineKind::ContraNorm { .. } => "contranorm",
            BaselineKind::DropEdge { .. } => "dropedge",
            BaselineKind::Residual { .. } => "residual",
            BaselineKind::Appnp { .. } => "appnp",
            BaselineKind::JknetDagnn { .. } => "jknet_dagnn",
        }
    }

    /// Kind with default parameters for `tag`; `jknet` and `dagnn` are aliases.
    pub fn from_tag(tag: &str, k: usize) -> Result<Self> {
        Ok(match tag {
            "sgc" => BaselineKind::Sgc,
            "batchnorm" => BaselineKind::BatchNorm,
            "pairnorm" => BaselineKind::PairNorm,
            "contranorm" => BaselineKind::ContraNorm {
                alpha: 0.5,
                tau: 1.0,
            },
            "dropedge" => BaselineKind::DropEdge {
                drop_prob: 0.3,
                seed: 0,
            },
            "residual" => BaselineKind::Residual { alpha: 0.5 },
            "appnp" => BaselineKind::Appnp { alpha: 0.9, k },
            "jknet_dagnn" | "jknet" | "dagnn" => BaselineKind::JknetDagnn {
                weights: vec![1.0 / (k + 1) as f64; k + 1],
            },
            other => return Err(invalid!("unknown baseline '{other}'")),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaselineKind::ContraNorm { tau, .. } if !(*tau > 0.0) => {
                Err(invalid!("ContraNorm needs tau > 0"))
            }
            BaselineKind::DropEdge { drop_prob, .. } if !(0.0..=1.0).contains(drop_prob) => {
                Err(invalid!("drop probability {drop_prob} outside [0, 1]"))
            }
            BaselineKind::JknetDagnn { weights } => {
                let total: f64 = weights.iter().sum();
                if weights.is_empty() || math::abs(total - 1.0) > 1e-12 {
                    Err(invalid!(
                        "fusion weights must be non-empty and sum to 1, got {total}"
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormInput {
    /// Applied to the current layer's features.
    Current,
    /// Applied to the initial features `X₀`.
    Initial,
}

/// `self_weight·X + pos_weight·pos·X − neg_weight·neg·X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedForm {
    pub pos: DenseMatrix,
    pub neg: DenseMatrix,
    pub self_weight: f64,
    pub pos_weight: f64,
    pub neg_weight: f64,
    pub input: FormInput,
}

impl SignedForm {
    fn plain(pos: DenseMatrix, neg: DenseMatrix, input: FormInput) -> Self {
        Self {
            pos,
            neg,
            self_weight: 0.0,
            pos_weight: 1.0,
            neg_weight: 1.0,
            input,
        }
    }

    pub fn evaluate(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = x.scale(self.self_weight);
        out.add_scaled(self.pos_weight, &self.pos.matmul(x)?)?;
        out.add_scaled(-self.neg_weight, &self.neg.matmul(x)?)?;
        Ok(out)
    }

    /// The single matrix the form applies: `self·I + pw·pos − nw·neg`.
    pub fn effective(&self) -> DenseMatrix {
        let mut m = self
            .pos
            .axpby(self.pos_weight, &self.neg, -self.neg_weight)
            .expect("pos and neg share a shape");
        for i in 0..m.rows() {
            m[(i, i)] += self.self_weight;
        }
        m
    }
}

fn powers(a: &DenseMatrix, upto: usize) -> Result<Vec<DenseMatrix>> {
    let mut out = Vec::with_capacity(upto + 1);
    out.push(DenseMatrix::identity(a.rows()));
    for i in 0..upto {
        let next = out[i].matmul(a)?;
        out.push(next);
    }
    Ok(out)
}

fn mean_rows(a: &DenseMatrix) -> DenseMatrix {
    // (11ᵀ/n)·a: every row is the column mean of a
    let means = a.column_means();
    DenseMatrix::from_fn(a.rows(), a.cols(), |_, j| means[j])
}

fn check_stochastic(a_hat: &DenseMatrix) -> Result<()> {
    a_hat.ensure_square()?;
    if a_hat.has_negative() {
        return Err(invalid!("Â must be non-negative"));
    }
    Ok(())
}

/// Undirected support of `a_hat`, off the diagonal.
pub fn support_graph(a_hat: &DenseMatrix) -> SparseGraph {
    let n = a_hat.rows();
    let mut g = SparseGraph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if a_hat[(i, j)] != 0.0 || a_hat[(j, i)] != 0.0 {
                g.add_edge(i, j).expect("indices in range");
            }
        }
    }
    g
}

/// Drops each undirected edge independently with probability `drop_prob`.
/// Returns `(kept, dropped)`.
pub fn dropedge_mask<R: Rng + ?Sized>(
    a: &SparseGraph,
    drop_prob: f64,
    rng: &mut R,
) -> Result<(SparseGraph, SparseGraph)> {
    if !(0.0..=1.0).contains(&drop_prob) {
        return Err(invalid!("drop probability {drop_prob} outside [0, 1]"));
    }
    let mut kept = SparseGraph::new(a.n()).with_self_loops(a.self_loops());
    let mut dropped = SparseGraph::new(a.n());
    for (i, j, w) in a.edges() {
        let u: f64 = rng.random();
        if u < drop_prob {
            dropped.add_weighted_edge(i, j, w)?;
        } else {
            kept.add_weighted_edge(i, j, w)?;
        }
    }
    Ok((kept, dropped))
}

/// Entries of `a_hat` restricted to the dropped edges, keeping the original degrees.
fn dropped_part(a_hat: &DenseMatrix, drop_prob: f64, seed: u64) -> Result<DenseMatrix> {
    let support = support_graph(a_hat);
    let (_, dropped) = dropedge_mask(&support, drop_prob, &mut seeded(seed, streams::DROPEDGE))?;
    Ok(DenseMatrix::from_fn(a_hat.rows(), a_hat.cols(), |i, j| {
        if i != j && dropped.has_edge(i, j) {
            a_hat[(i, j)]
        } else {
            0.0
        }
    }))
}

/// Signed `(pos, neg)` pair of `kind` at the given features.
pub fn signed_form(
    kind: &BaselineKind,
    a_hat: &DenseMatrix,
    x: &DenseMatrix,
) -> Result<SignedForm> {
    kind.validate()?;
    check_stochastic(a_hat)?;
    let n = a_hat.rows();
    let form = match kind {
        BaselineKind::Sgc => {
            SignedForm::plain(a_hat.clone(), DenseMatrix::zeros(n, n), FormInput::Current)
        }
        BaselineKind::BatchNorm | BaselineKind::PairNorm => {
            SignedForm::plain(a_hat.clone(), mean_rows(a_hat), FormInput::Current)
        }
        BaselineKind::ContraNorm { alpha, tau } => {
            if x.rows() != n {
                return Err(crate::error::shape_err((n, x.cols()), x.shape()));
            }
            SignedForm {
                pos: a_hat.clone(),
                neg: x.gram_rows().matmul(a_hat)?,
                self_weight: 0.0,
                pos_weight: 1.0 + alpha,
                neg_weight: alpha / tau,
                input: FormInput::Current,
            }
        }
        BaselineKind::DropEdge { drop_prob, seed } => SignedForm::plain(
            a_hat.clone(),
            dropped_part(a_hat, *drop_prob, *seed)?,
            FormInput::Current,
        ),
        BaselineKind::Residual { alpha } => SignedForm {
            pos: a_hat.clone(),
            neg: DenseMatrix::identity(n),
            self_weight: 1.0,
            pos_weight: *alpha,
            neg_weight: *alpha,
            input: FormInput::Current,
        },
        BaselineKind::Appnp { alpha, k } => {
            let p = powers(a_hat, k + 1)?;
            let mut pos = DenseMatrix::zeros(n, n);
            let mut neg = DenseMatrix::zeros(n, n);
            let mut coef = 1.0;
            for (i, pi) in p.iter().enumerate() {
                pos.add_scaled(coef, pi)?;
                if i <= *k {
                    neg.add_scaled(alpha * coef, pi)?;
                }
                coef *= alpha;
            }
            SignedForm::plain(pos, neg, FormInput::Initial)
        }
        BaselineKind::JknetDagnn { weights } => {
            let k = weights.len() - 1;
            let p = powers(a_hat, k + 1)?;
            let mut pos = p[k + 1].clone();
            for (w, pi) in weights.iter().zip(&p) {
                pos.add_scaled(*w, pi)?;
            }
            let mass: f64 = weights.iter().sum();
            SignedForm::plain(pos, p[k + 1].scale(mass), FormInput::Initial)
        }
    };
    Ok(form)
}

/// `ÂX` centered on its column means: the pre-scaling part of BatchNorm and PairNorm.
pub fn centered_numerator(a_hat: &DenseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    let h = a_hat.matmul(x)?;
    h.sub(&mean_rows(&h))
}

/// Per-column scale applied to the centered numerator by BatchNorm (`1/σ_j`)
/// or PairNorm (`√n/‖·‖_F` on every column), with zero epsilon.
pub fn normalization_scale(kind: &BaselineKind, numerator: &DenseMatrix) -> Result<Vec<f64>> {
    let n = numerator.rows() as f64;
    match kind {
        BaselineKind::BatchNorm => (0..numerator.cols())
            .map(|j| {
                let var = numerator.row_iter().map(|r| r[j] * r[j]).sum::<f64>() / n;
                if var == 0.0 {
                    Err(Error::Degenerate(alloc::format!(
                        "column {j} has zero variance"
                    )))
                } else {
                    Ok(1.0 / math::sqrt(var))
                }
            })
            .collect(),
        BaselineKind::PairNorm => {
            let gamma = numerator.frobenius_norm() / math::sqrt(n);
            if gamma == 0.0 {
                return Err(Error::Degenerate(String::from(
                    "centered features are all zero",
                )));
            }
            Ok(vec![1.0 / gamma; numerator.cols()])
        }
        other => Err(invalid!("{} has no normalization scale", other.tag())),
    }
}

fn scale_columns(m: &DenseMatrix, s: &[f64]) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] * s[j])
}

/// The method as originally defined: one layer, or the full unroll for APPNP and JKNET.
pub fn direct_baseline_step(
    kind: &BaselineKind,
    a_hat: &DenseMatrix,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    kind.validate()?;
    check_stochastic(a_hat)?;
    match kind {
        BaselineKind::Sgc => a_hat.matmul(x),
        BaselineKind::BatchNorm | BaselineKind::PairNorm => {
            let num = centered_numerator(a_hat, x)?;
            let s = normalization_scale(kind, &num)?;
            Ok(scale_columns(&num, &s))
        }
        BaselineKind::ContraNorm { alpha, tau } => {
            let h = a_hat.matmul(x)?;
            let mut out = h.scale(1.0 + alpha);
            out.add_scaled(-alpha / tau, &x.matmul(&x.transpose().matmul(&h)?)?)?;
            Ok(out)
        }
        BaselineKind::DropEdge { drop_prob, seed } => {
            let dropped = dropped_part(a_hat, *drop_prob, *seed)?;
            a_hat.sub(&dropped)?.matmul(x)
        }
        BaselineKind::Residual { alpha } => {
            let mut out = x.scale(1.0 - alpha);
            out.add_scaled(*alpha, &a_hat.matmul(x)?)?;
            Ok(out)
        }
        BaselineKind::Appnp { alpha, k } => {
            let mut h = x.clone();
            for _ in 0..=*k {
                let mut next = x.scale(1.0 - alpha);
                next.add_scaled(*alpha, &a_hat.matmul(&h)?)?;
                h = next;
            }
            Ok(h)
        }
        BaselineKind::JknetDagnn { weights } => {
            let mut h = x.clone();
            let mut out = x.scale(weights[0]);
            for w in &weights[1..] {
                h = a_hat.matmul(&h)?;
                out.add_scaled(*w, &h)?;
            }
            Ok(out)
        }
    }
}

/// Largest elementwise gap between the direct method and its signed form.
/// BatchNorm and PairNorm are compared on the centered numerator, and the
/// full normalized output is compared with the signed form times its scale.
pub fn equivalence_gap(kind: &BaselineKind, a_hat: &DenseMatrix, x: &DenseMatrix) -> Result<f64> {
    let form = signed_form(kind, a_hat, x)?;
    let signed = form.evaluate(x)?;
    match kind {
        BaselineKind::BatchNorm | BaselineKind::PairNorm => {
            let num = centered_numerator(a_hat, x)?;
            let s = normalization_scale(kind, &num)?;
            let full = direct_baseline_step(kind, a_hat, x)?;
            let gap_num = num.max_abs_diff(&signed)?;
            let gap_full = full.max_abs_diff(&scale_columns(&signed, &s))?;
            Ok(gap_num.max(gap_full))
        }
        _ => direct_baseline_step(kind, a_hat, x)?.max_abs_diff(&signed),
    }
}

/// Random row-normalized adjacency of an Erdős–Rényi graph with edge probability `density`.
pub fn random_a_hat<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> DenseMatrix {
    let mut g = SparseGraph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = rng.random();
            if u < density {
                g.add_edge(i, j).expect("indices in range");
            }
        }
    }
    g.row_normalized().to_dense()
}

pub fn random_features<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng))
}

/// Max gap over `trials` random instances with `n` nodes and `d` features.
pub fn verify_equivalence<R: Rng + ?Sized>(
    kind: &BaselineKind,
    trials: usize,
    n: usize,
    d: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let a_hat = random_a_hat(n, 0.3, rng);
        let x = random_features(n, d, rng);
        let instance_kind = match kind {
            BaselineKind::DropEdge { drop_prob, .. } => BaselineKind::DropEdge {
                drop_prob: *drop_prob,
                seed: rng.random(),
            },
            other => other.clone(),
        };
        worst = worst.max(equivalence_gap(&instance_kind, &a_hat, &x)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cycle() -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn residual_negative_is_identity() {
        let f = signed_form(
            &BaselineKind::Residual { alpha: 0.3 },
            &two_cycle(),
            &DenseMatrix::zeros(2, 1),
        )
        .unwrap();
        assert_eq!(f.neg, DenseMatrix::identity(2));
    }

    #[test]
    fn batchnorm_negative_two_cycle() {
        let f = signed_form(
            &BaselineKind::BatchNorm,
            &two_cycle(),
            &DenseMatrix::zeros(2, 1),
        )
        .unwrap();
        assert_eq!(f.neg.as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn appnp_k0_polynomials() {
        let a = two_cycle();
        let f = signed_form(
            &BaselineKind::Appnp { alpha: 0.5, k: 0 },
            &a,
            &DenseMatrix::zeros(2, 1),
        )
        .unwrap();
        let want_pos = DenseMatrix::identity(2).axpby(1.0, &a, 0.5).unwrap();
        assert_eq!(f.pos, want_pos);
        assert_eq!(f.neg, DenseMatrix::identity(2).scale(0.5));
    }

    #[test]
    fn trivial_direct_cases() {
        let a = two_cycle();
        let x = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        assert_eq!(
            direct_baseline_step(&BaselineKind::Residual { alpha: 0.0 }, &a, &x).unwrap(),
            x
        );
        for k in 0..4 {
            assert_eq!(
                direct_baseline_step(&BaselineKind::Appnp { alpha: 0.0, k }, &a, &x).unwrap(),
                x
            );
        }
    }

    #[test]
    fn pairnorm_keeps_centered_unit_input() {
        // Â = I, X centered with ‖X‖_F = √n
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ])
        .unwrap();
        let out =
            direct_baseline_step(&BaselineKind::PairNorm, &DenseMatrix::identity(4), &x).unwrap();
        assert!(out.max_abs_diff(&x).unwrap() < 1e-10);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let x = DenseMatrix::filled(2, 1, 1.0);
        let err = direct_baseline_step(&BaselineKind::BatchNorm, &two_cycle(), &x).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn dropedge_extremes() {
        let g = SparseGraph::complete(5);
        let mut rng = seeded(1, streams::DROPEDGE);
        let (kept, dropped) = dropedge_mask(&g, 0.0, &mut rng).unwrap();
        assert_eq!((kept.num_edges(), dropped.num_edges()), (10, 0));
        let (kept, dropped) = dropedge_mask(&g, 1.0, &mut rng).unwrap();
        assert_eq!((kept.num_edges(), dropped), (0, g.clone()));
    }

    #[test]
    fn every_kind_matches_on_random_instances() {
        let mut rng = seeded(11, 0);
        let kinds = [
            BaselineKind::Sgc,
            BaselineKind::BatchNorm,
            BaselineKind::PairNorm,
            BaselineKind::ContraNorm {
                alpha: 0.7,
                tau: 2.0,
            },
            BaselineKind::DropEdge {
                drop_prob: 0.4,
                seed: 0,
            },
            BaselineKind::Residual { alpha: 0.35 },
            BaselineKind::Appnp { alpha: 0.8, k: 4 },
            BaselineKind::from_tag("jknet", 3).unwrap(),
        ];
        for kind in &kinds {
            let gap = verify_equivalence(kind, 10, 12, 5, &mut rng).unwrap();
            assert!(gap < 1e-10, "{}: {gap}", kind.tag());
        }
    }

    #[test]
    fn validation() {
        assert!(BaselineKind::ContraNorm {
            alpha: 1.0,
            tau: 0.0
        }
        .validate()
        .is_err());
        assert!(BaselineKind::JknetDagnn {
            weights: vec![0.5, 0.4]
        }
        .validate()
        .is_err());
        assert!(BaselineKind::from_tag("gcnii", 2).is_err());
    }
}
