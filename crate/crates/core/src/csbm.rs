//! Two-class contextual stochastic block model.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::SparseGraph;
use crate::labels::LabelSet;
use crate::math;
use crate::matrix::DenseMatrix;
use crate::rng::{seeded, streams};

/// Default feature dimension.
pub const DEFAULT_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsbmParams {
    /// Total node count; must be even.
    pub n: usize,
    /// Intra-class edge probability.
    pub p: f64,
    /// Inter-class edge probability.
    pub q: f64,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl CsbmParams {
    /// `N = 100`, `p = 2 ln 100 / 100`, `q = ln 100 / 100`, means `∓1` in 8 dimensions.
    pub fn reference(seed: u64) -> Self {
        let n = 100;
        let log_n = math::ln(n as f64);
        Self {
            n,
            p: 2.0 * log_n / n as f64,
            q: log_n / n as f64,
            mu1: vec![-1.0; DEFAULT_DIM],
            mu2: vec![1.0; DEFAULT_DIM],
            sigma: 1.0,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu1.len()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n.is_multiple_of(2) {
            return Err(invalid!("node count must be even, got {}", self.n));
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid!("{name}={v} is not a probability"));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid!("sigma must be positive, got {}", self.sigma));
        }
        if self.mu1.len() != self.mu2.len() || self.mu1.is_empty() {
            return Err(invalid!("class means must share a positive dimension"));
        }
        if self.mu1 == self.mu2 {
            return Err(invalid!("class means must differ"));
        }
        Ok(())
    }
}

/// One sampled CSBM instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CsbmInstance {
    pub graph: SparseGraph,
    pub features: DenseMatrix,
    /// Ground truth for every node; the training mask is left fully set.
    pub labels: LabelSet,
}

/// Samples a graph, Gaussian features and labels. Nodes `0..N/2` are class 0.
pub fn generate(params: &CsbmParams) -> Result<CsbmInstance> {
    params.validate()?;
    let n = params.n;
    let half = n / 2;
    let class_of = |i: usize| usize::from(i >= half);

    let mut edge_rng = seeded(params.seed, streams::CSBM_EDGES);
    let mut graph = SparseGraph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let prob = if class_of(i) == class_of(j) {
                params.p
            } else {
                params.q
            };
            // one draw per pair keeps the stream aligned across probabilities
            let u: f64 = edge_rng.random();
            if u < prob {
                graph.add_edge(i, j)?;
            }
        }
    }

    let mut feat_rng = seeded(params.seed, streams::CSBM_FEATURES);
    let noise = Normal::new(0.0, params.sigma).map_err(|e| invalid!("{e}"))?;
    let d = params.dim();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        let mu = if class_of(i) == 0 {
            &params.mu1
        } else {
            &params.mu2
        };
        for &m in mu {
            data.push(m + noise.sample(&mut feat_rng));
        }
    }
    let features = DenseMatrix::from_vec(n, d, data)?;
    let labels = LabelSet::fully_labeled((0..n).map(class_of).collect());
    Ok(CsbmInstance {
        graph,
        features,
        labels,
    })
}

/// Redistributes the edge budget `p + q`: `p' = (p+q)(1+φ)/2`, `q' = (p+q)(1−φ)/2`.
pub fn homophily_sweep(base: &CsbmParams, phi: f64) -> Result<CsbmParams> {
    if !(-1.0..=1.0).contains(&phi) {
        return Err(invalid!("phi={phi} outside [-1, 1]"));
    }
    let budget = base.p + base.q;
    let p = budget * (1.0 + phi) / 2.0;
    let q = budget * (1.0 - phi) / 2.0;
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(invalid!("phi={phi} yields probabilities p={p}, q={q}"));
    }
    Ok(CsbmParams {
        p,
        q,
        ..base.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, p: f64, q: f64, seed: u64) -> CsbmParams {
        CsbmParams {
            n,
            p,
            q,
            ..CsbmParams::reference(seed)
        }
    }

    #[test]
    fn degenerate_probabilities() {
        let cliques = generate(&params(10, 1.0, 0.0, 1)).unwrap();
        assert_eq!(cliques.graph.num_edges(), 2 * 10);
        assert!(cliques.graph.has_edge(0, 4) && !cliques.graph.has_edge(4, 5));
        let empty = generate(&params(10, 0.0, 0.0, 1)).unwrap();
        assert_eq!(empty.graph.num_edges(), 0);
    }

    #[test]
    fn labels_split_in_halves() {
        let inst = generate(&CsbmParams::reference(0)).unwrap();
        assert_eq!(inst.labels.class(0), 0);
        assert_eq!(inst.labels.class(49), 0);
        assert_eq!(inst.labels.class(50), 1);
        assert_eq!(inst.features.shape(), (100, 8));
    }

    #[test]
    fn same_seed_same_instance() {
        let a = generate(&CsbmParams::reference(7)).unwrap();
        let b = generate(&CsbmParams::reference(7)).unwrap();
        assert_eq!(a, b);
        let c = generate(&CsbmParams::reference(8)).unwrap();
        assert_ne!(a.graph, c.graph);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(generate(&params(11, 0.1, 0.1, 0)).is_err());
        assert!(generate(&params(10, 1.5, 0.1, 0)).is_err());
        let mut same_means = CsbmParams::reference(0);
        same_means.mu2 = same_means.mu1.clone();
        assert!(generate(&same_means).is_err());
        let mut flat = CsbmParams::reference(0);
        flat.sigma = 0.0;
        assert!(generate(&flat).is_err());
    }

    #[test]
    fn sweep_endpoints() {
        let base = params(100, 0.3, 0.1, 0);
        let mid = homophily_sweep(&base, 0.0).unwrap();
        assert!((mid.p - 0.2).abs() < 1e-15 && (mid.q - 0.2).abs() < 1e-15);
        assert_eq!(homophily_sweep(&base, 1.0).unwrap().q, 0.0);
        assert_eq!(homophily_sweep(&base, -1.0).unwrap().p, 0.0);
        assert!(homophily_sweep(&params(100, 0.9, 0.8, 0), 1.0).is_err());
        assert!(homophily_sweep(&base, 1.5).is_err());
    }
}
