//! Undirected graphs, row normalization and homophily.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::labels::LabelSet;
use crate::matrix::{CsrMatrix, DenseMatrix};

/// Symmetric sparse adjacency. Each unordered pair `{i, j}` is stored once per
/// endpoint list and can be queried from either side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseGraph {
    n: usize,
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: bool,
}

impl SparseGraph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![Vec::new(); n],
            self_loops: false,
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::new(n);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn from_weighted_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Self::new(n);
        for &(i, j, w) in edges {
            g.add_weighted_edge(i, j, w)?;
        }
        Ok(g)
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Self {
        let mut g = Self::new(n);
        for i in 0..n {
            g.adj[i] = (0..n).filter(|&j| j != i).map(|j| (j, 1.0)).collect();
        }
        g
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.add_weighted_edge(i, j, 1.0)
    }

    /// Inserts `{i, j}`. Re-adding an existing edge with the same weight is a no-op.
    pub fn add_weighted_edge(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(invalid!("edge {{{i},{j}}} out of range for n={}", self.n));
        }
        if i == j {
            return Err(invalid!("self-loop on node {i}"));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(invalid!("edge weight must be positive and finite, got {w}"));
        }
        match self.adj[i].binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => {
                if self.adj[i][pos].1 != w {
                    return Err(invalid!(
                        "edge {{{i},{j}}} already present with another weight"
                    ));
                }
                Ok(())
            }
            Err(pos) => {
                self.adj[i].insert(pos, (j, w));
                let pos_j = self.adj[j]
                    .binary_search_by_key(&i, |&(k, _)| k)
                    .unwrap_err();
                self.adj[j].insert(pos_j, (i, w));
                Ok(())
            }
        }
    }

    /// Adds the identity before normalization when set.
    pub fn with_self_loops(mut self, on: bool) -> Self {
        self.self_loops = on;
        self
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].iter().map(|&(j, _)| j)
    }

    pub fn weighted_neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search_by_key(&j, |&(k, _)| k).is_ok()
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adj[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .ok()
            .map(|p| self.adj[i][p].1)
    }

    /// Number of incident edges (ignores weights and the self-loop flag).
    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    /// Edges as `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    /// Connected-component id per node, numbered in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().iter().all(|&c| c == 0)
    }

    /// Dense 0/weight adjacency (self-loop flag not applied).
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for (i, row) in self.adj.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// Sparse adjacency operator; the identity is added when the self-loop flag is set.
    pub fn adjacency(&self) -> CsrMatrix {
        let rows = (0..self.n).map(|i| self.row_with_loop(i)).collect();
        CsrMatrix::from_rows(self.n, rows).expect("adjacency rows are sorted by construction")
    }

    fn row_with_loop(&self, i: usize) -> Vec<(usize, f64)> {
        let mut row = self.adj[i].clone();
        if self.self_loops {
            let pos = row.binary_search_by_key(&i, |&(k, _)| k).unwrap_err();
            row.insert(pos, (i, 1.0));
        }
        row
    }

    /// `D⁻¹A`; zero-degree rows stay zero.
    pub fn row_normalized(&self) -> CsrMatrix {
        let rows = (0..self.n)
            .map(|i| {
                let row = self.row_with_loop(i);
                let deg: f64 = row.iter().map(|&(_, w)| w).sum();
                if deg > 0.0 {
                    row.into_iter().map(|(j, w)| (j, w / deg)).collect()
                } else {
                    row
                }
            })
            .collect();
        CsrMatrix::from_rows(self.n, rows).expect("normalized rows keep the sorted layout")
    }
}

/// Row normalization to a row-stochastic operator.
pub trait RowNormalize {
    type Output;
    fn row_normalize(&self) -> Result<Self::Output>;
}

impl RowNormalize for SparseGraph {
    type Output = CsrMatrix;

    fn row_normalize(&self) -> Result<CsrMatrix> {
        Ok(self.row_normalized())
    }
}

impl RowNormalize for DenseMatrix {
    type Output = DenseMatrix;

    fn row_normalize(&self) -> Result<DenseMatrix> {
        self.ensure_square()?;
        if self.has_negative() {
            return Err(invalid!("row normalization requires non-negative entries"));
        }
        let mut out = self.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        Ok(out)
    }
}

pub fn row_normalize<T: RowNormalize>(a: &T) -> Result<T::Output> {
    a.row_normalize()
}

/// Mean over non-isolated nodes of the fraction of neighbors sharing the node's label.
pub fn homophily_level(g: &SparseGraph, labels: &LabelSet) -> Result<f64> {
    labels.check_len(g.n())?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for v in 0..g.n() {
        let deg = g.degree(v);
        if deg == 0 {
            continue;
        }
        let same = g
            .neighbors(v)
            .filter(|&u| labels.class(u) == labels.class(v))
            .count();
        total += same as f64 / deg as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric(alloc::string::String::from(
            "homophily is undefined when every node is isolated",
        )));
    }
    Ok(total / counted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn normalize_two_cycle() {
        let g = SparseGraph::from_edges(2, &[(0, 1)]).unwrap();
        let a = g.row_normalized().to_dense();
        assert_eq!(a.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn normalize_star_row() {
        let g = SparseGraph::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let a = g.row_normalized();
        assert_eq!(a.to_dense().row(0), &[0.0, 0.5, 0.5]);
    }

    #[test]
    fn isolated_row_stays_zero() {
        let g = SparseGraph::from_edges(3, &[(0, 1)]).unwrap();
        let a = g.row_normalized().to_dense();
        assert_eq!(a.row(2), &[0.0, 0.0, 0.0]);
        let dense = DenseMatrix::zeros(3, 3).row_normalize().unwrap();
        assert_eq!(dense.row(1), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn dense_normalize_rejects_negative() {
        let m = DenseMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(row_normalize(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn self_loop_flag_adds_identity() {
        let g = SparseGraph::from_edges(2, &[(0, 1)])
            .unwrap()
            .with_self_loops(true);
        let a = g.row_normalized().to_dense();
        assert_eq!(a.as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn edges_are_symmetric_and_deduplicated() {
        let mut g = SparseGraph::new(3);
        g.add_edge(2, 0).unwrap();
        g.add_edge(0, 2).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert!(g.has_edge(0, 2) && g.has_edge(2, 0));
        assert!(g.add_edge(1, 1).is_err());
        assert!(g.add_edge(0, 3).is_err());
        assert!(g.add_weighted_edge(0, 2, 2.0).is_err());
    }

    #[test]
    fn homophily_examples() {
        let one = SparseGraph::from_edges(2, &[(0, 1)]).unwrap();
        let same = LabelSet::fully_labeled(vec![0, 0]);
        let diff = LabelSet::fully_labeled(vec![0, 1]);
        assert_eq!(homophily_level(&one, &same).unwrap(), 1.0);
        assert_eq!(homophily_level(&one, &diff).unwrap(), 0.0);

        // path a-b-c with labels (0,0,1): a→1, b→1/2, c→0
        let path = SparseGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let labels = LabelSet::fully_labeled(vec![0, 0, 1]);
        assert!((homophily_level(&path, &labels).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn homophily_undefined_without_edges() {
        let g = SparseGraph::new(3);
        let labels = LabelSet::fully_labeled(vec![0, 1, 0]);
        assert!(matches!(
            homophily_level(&g, &labels),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn components_and_connectivity() {
        let g = SparseGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.components(), vec![0, 0, 1, 1]);
        assert!(!g.is_connected());
        assert!(SparseGraph::complete(4).is_connected());
    }
}
