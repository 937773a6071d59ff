//! Signed graphs, structural imbalance and the SBP negative-graph constructions.
//!
//! Sign conventions: an entry of an effective signed matrix is a positive edge
//! when it exceeds `zero_tol`, a negative edge when it is below `-zero_tol`,
//! and absent otherwise. SID counts absent pairs as violations on both sides,
//! so a sparse unsigned graph is far from balanced even though none of its
//! edges carry the wrong sign.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::graph::SparseGraph;
use crate::labels::LabelSet;
use crate::math;
use crate::matrix::DenseMatrix;
use crate::operator::Operator;

/// Default magnitude below which an effective entry counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

/// Pair of non-negative operators `(Â⁺, Â⁻)`; strengths are applied at propagation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedGraph {
    pos: Operator,
    neg: Operator,
}

impl SignedGraph {
    pub fn new(pos: Operator, neg: Operator) -> Result<Self> {
        if pos.n() != neg.n() {
            return Err(shape_err((pos.n(), pos.n()), (neg.n(), neg.n())));
        }
        if !pos.is_nonnegative() || !neg.is_nonnegative() {
            return Err(invalid!(
                "signed-graph operators must be entrywise non-negative"
            ));
        }
        Ok(Self { pos, neg })
    }

    /// Row-normalized positive and negative supports.
    pub fn from_supports(pos: &SparseGraph, neg: &SparseGraph) -> Result<Self> {
        Self::new(pos.row_normalized().into(), neg.row_normalized().into())
    }

    /// Unsigned propagation: `(Â, 0)`.
    pub fn unsigned(a_hat: Operator) -> Result<Self> {
        let n = a_hat.n();
        Self::new(a_hat, Operator::Zero(n))
    }

    pub fn n(&self) -> usize {
        self.pos.n()
    }

    pub fn pos(&self) -> &Operator {
        &self.pos
    }

    pub fn neg(&self) -> &Operator {
        &self.neg
    }

    /// True when every nonzero row of both operators sums to one within `tol`.
    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        [&self.pos, &self.neg].iter().all(|op| {
            op.row_sums()
                .iter()
                .all(|&s| s == 0.0 || math::abs(s - 1.0) <= tol)
        })
    }
}

/// `alpha·pos − beta·neg`, entrywise.
pub fn effective_signed_matrix(g: &SignedGraph, alpha: f64, beta: f64) -> DenseMatrix {
    let pos = g.pos.to_dense();
    let neg = g.neg.to_dense();
    pos.axpby(alpha, &neg, -beta)
        .expect("operators share a shape")
}

/// Structural imbalance in count and percent form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidReport {
    /// Mean number of same-class partners joined by a non-positive entry.
    pub p_avg: f64,
    /// Mean number of cross-class partners joined by a non-negative entry.
    pub n_avg: f64,
    /// `(p_avg + n_avg) / 2`.
    pub sid: f64,
    pub p_pct: f64,
    pub n_pct: f64,
    pub sid_pct: f64,
}

/// Structural imbalance degree of an effective signed matrix against `labels`.
///
/// Percent columns divide by the number of same-class (resp. cross-class)
/// partners, excluding the node itself.
pub fn sid(a_s: &DenseMatrix, labels: &LabelSet, zero_tol: f64) -> Result<SidReport> {
    a_s.ensure_square()?;
    labels.check_len(a_s.rows())?;
    if zero_tol < 0.0 {
        return Err(invalid!("zero tolerance must be non-negative"));
    }
    let n = a_s.rows();
    let (mut p_count, mut n_count) = (0usize, 0usize);
    let (mut same_pairs, mut cross_pairs) = (0usize, 0usize);
    for v in 0..n {
        let cv = labels.class(v);
        for (u, &x) in a_s.row(v).iter().enumerate() {
            if u == v {
                continue;
            }
            if labels.class(u) == cv {
                same_pairs += 1;
                if x <= zero_tol {
                    p_count += 1;
                }
            } else {
                cross_pairs += 1;
                if x >= -zero_tol {
                    n_count += 1;
                }
            }
        }
    }
    let nf = n.max(1) as f64;
    let pct = |count: usize, total: usize| {
        if total == 0 {
            0.0
        } else {
            100.0 * count as f64 / total as f64
        }
    };
    let p_avg = p_count as f64 / nf;
    let n_avg = n_count as f64 / nf;
    let p_pct = pct(p_count, same_pairs);
    let n_pct = pct(n_count, cross_pairs);
    Ok(SidReport {
        p_avg,
        n_avg,
        sid: (p_avg + n_avg) / 2.0,
        p_pct,
        n_pct,
        sid_pct: (p_pct + n_pct) / 2.0,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "partition", rename_all = "snake_case")]
pub enum BalanceVerdict {
    /// Two-group partition, 0/1 per node.
    Balanced(Vec<usize>),
    /// Group id per node; at least two groups and not two-colorable.
    WeaklyBalanced(Vec<usize>),
    Unbalanced,
}

impl BalanceVerdict {
    pub fn is_balanced(&self) -> bool {
        matches!(self, BalanceVerdict::Balanced(_))
    }

    /// Balanced graphs are also weakly balanced.
    pub fn is_weakly_balanced(&self) -> bool {
        !matches!(self, BalanceVerdict::Unbalanced)
    }

    pub fn partition(&self) -> Option<&[usize]> {
        match self {
            BalanceVerdict::Balanced(p) | BalanceVerdict::WeaklyBalanced(p) => Some(p),
            BalanceVerdict::Unbalanced => None,
        }
    }
}

/// Balance verdict for the sign pattern of `signs`.
pub fn is_structurally_balanced(signs: &DenseMatrix, zero_tol: f64) -> Result<BalanceVerdict> {
    signs.ensure_square()?;
    let n = signs.rows();
    let mut pos_adj = vec![Vec::new(); n];
    let mut neg_edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let x = signs[(i, j)];
            if x > zero_tol {
                pos_adj[i].push(j);
                pos_adj[j].push(i);
            } else if x < -zero_tol {
                neg_edges.push((i, j));
            }
        }
    }
    Ok(classify(n, &pos_adj, &neg_edges))
}

/// Balance verdict from explicit positive and negative supports.
pub fn balance_of_supports(pos: &SparseGraph, neg: &SparseGraph) -> Result<BalanceVerdict> {
    if pos.n() != neg.n() {
        return Err(shape_err((pos.n(), pos.n()), (neg.n(), neg.n())));
    }
    let pos_adj: Vec<Vec<usize>> = (0..pos.n()).map(|i| pos.neighbors(i).collect()).collect();
    let neg_edges: Vec<(usize, usize)> = neg.edges().map(|(i, j, _)| (i, j)).collect();
    Ok(classify(pos.n(), &pos_adj, &neg_edges))
}

fn classify(n: usize, pos_adj: &[Vec<usize>], neg_edges: &[(usize, usize)]) -> BalanceVerdict {
    // positive components
    let mut comp = vec![usize::MAX; n];
    let mut m = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = m;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &pos_adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = m;
                    queue.push_back(v);
                }
            }
        }
        m += 1;
    }
    if neg_edges.iter().any(|&(i, j)| comp[i] == comp[j]) {
        return BalanceVerdict::Unbalanced;
    }
    if m < 2 {
        // one positive component: the trivial two-coloring
        return BalanceVerdict::Balanced(vec![0; n]);
    }

    // two-color the component graph along negative edges
    let mut comp_adj = vec![Vec::new(); m];
    for &(i, j) in neg_edges {
        comp_adj[comp[i]].push(comp[j]);
        comp_adj[comp[j]].push(comp[i]);
    }
    let mut color = vec![usize::MAX; m];
    let mut group_roots = Vec::new();
    let mut bipartite = true;
    'outer: for s in 0..m {
        if color[s] != usize::MAX {
            continue;
        }
        group_roots.push(s);
        color[s] = 0;
        queue.push_back(s);
        while let Some(c) = queue.pop_front() {
            for &d in &comp_adj[c] {
                if color[d] == usize::MAX {
                    color[d] = 1 - color[c];
                    queue.push_back(d);
                } else if color[d] == color[c] {
                    bipartite = false;
                    break 'outer;
                }
            }
        }
    }
    if !bipartite {
        return BalanceVerdict::WeaklyBalanced(comp);
    }
    if color.iter().all(|&c| c == 0) {
        // several negative-free groups: move the last one to the other side
        let root = *group_roots.last().expect("m >= 2 implies a root");
        flip_group(root, &comp_adj, &mut color);
    }
    BalanceVerdict::Balanced(comp.iter().map(|&c| color[c]).collect())
}

fn flip_group(root: usize, comp_adj: &[Vec<usize>], color: &mut [usize]) {
    let mut seen = vec![false; color.len()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(c) = queue.pop_front() {
        color[c] = 1 - color[c];
        for &d in &comp_adj[c] {
            if !seen[d] {
                seen[d] = true;
                queue.push_back(d);
            }
        }
    }
}

/// Label-induced negative graph: `+1` between trained nodes of different
/// classes, `−1` between trained nodes of the same class (diagonal included),
/// `0` whenever either node is outside the training mask.
pub fn label_sbp_negative(labels: &LabelSet) -> DenseMatrix {
    let n = labels.len();
    DenseMatrix::from_fn(n, n, |i, j| {
        if !(labels.is_trained(i) && labels.is_trained(j)) {
            0.0
        } else if labels.class(i) != labels.class(j) {
            1.0
        } else {
            -1.0
        }
    })
}

/// Feature-induced negative graph `−X₀X₀ᵀ`.
pub fn feature_sbp_negative(x0: &DenseMatrix) -> DenseMatrix {
    let mut g = x0.gram_rows();
    g.map_in_place(|v| -v);
    g
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn row_softmax(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    row_softmax_in_place(&mut out);
    out
}

pub fn row_softmax_in_place(out: &mut DenseMatrix) {
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = math::exp(*v - max);
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
}

/// Drops every edge whose endpoints are both trained and carry different classes.
pub fn label_sbp_v2_prune(a: &SparseGraph, labels: &LabelSet) -> Result<SparseGraph> {
    labels.check_len(a.n())?;
    let mut out = SparseGraph::new(a.n()).with_self_loops(a.self_loops());
    for (i, j, w) in a.edges() {
        let cut =
            labels.is_trained(i) && labels.is_trained(j) && labels.class(i) != labels.class(j);
        if !cut {
            out.add_weighted_edge(i, j, w)?;
        }
    }
    Ok(out)
}

/// Outcome of comparing Label-SBP imbalance with `(1 − p)·n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidBound {
    pub sid_count: f64,
    pub bound: f64,
    pub labeled_ratio: f64,
    pub ok: bool,
    /// Largest `|P(v)| + |N(v)|` over trained nodes, divided by the number of
    /// untrained nodes; at most 1 whenever `beta > alpha·max(pos)`.
    pub trained_row_ratio: f64,
}

/// Label-SBP imbalance of `alpha·pos − beta·A_l` with `A_l = label_sbp_negative(labels)`,
/// using exact-zero sign semantics.
///
/// Trained pairs get a strictly correct sign only when `beta` exceeds every
/// `alpha·pos` entry; `pos` is typically `Â`, whose entries are at most 1.
pub fn sid_bound_check(
    labels: &LabelSet,
    pos: &Operator,
    alpha: f64,
    beta: f64,
) -> Result<SidBound> {
    labels.check_len(pos.n())?;
    let n = labels.len();
    let a_l = label_sbp_negative(labels);
    let a_s = pos.to_dense().axpby(alpha, &a_l, -beta)?;
    let report = sid(&a_s, labels, 0.0)?;
    let p = labels.labeled_ratio();
    let bound = (1.0 - p) * n as f64 / 2.0;

    let untrained = n - labels.train_count();
    let mut worst = 0usize;
    for v in labels.train_indices() {
        let cv = labels.class(v);
        let count = (0..n)
            .filter(|&u| u != v)
            .filter(|&u| {
                let x = a_s[(v, u)];
                if labels.class(u) == cv {
                    x <= 0.0
                } else {
                    x >= 0.0
                }
            })
            .count();
        worst = worst.max(count);
    }
    let trained_row_ratio = if untrained == 0 {
        if worst == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        worst as f64 / untrained as f64
    };
    Ok(SidBound {
        sid_count: report.sid,
        bound,
        labeled_ratio: p,
        ok: report.sid <= bound + 1e-9,
        trained_row_ratio,
    })
}
