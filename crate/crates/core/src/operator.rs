use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::matrix::{CsrMatrix, DenseMatrix};

/// Square linear operator acting on node-feature matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operator {
    Zero(usize),
    Identity(usize),
    Sparse(CsrMatrix),
    Dense(DenseMatrix),
}

impl Operator {
    pub fn n(&self) -> usize {
        match self {
            Operator::Zero(n) | Operator::Identity(n) => *n,
            Operator::Sparse(m) => m.n(),
            Operator::Dense(m) => m.rows(),
        }
    }

    /// `self · x`.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.n() {
            return Err(shape_err((self.n(), x.cols()), x.shape()));
        }
        match self {
            Operator::Zero(_) => Ok(DenseMatrix::zeros(x.rows(), x.cols())),
            Operator::Identity(_) => Ok(x.clone()),
            Operator::Sparse(m) => m.matmul_dense(x),
            Operator::Dense(m) => m.matmul(x),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Operator::Zero(n) => DenseMatrix::zeros(*n, *n),
            Operator::Identity(n) => DenseMatrix::identity(*n),
            Operator::Sparse(m) => m.to_dense(),
            Operator::Dense(m) => m.clone(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            Operator::Zero(_) | Operator::Identity(_) => true,
            Operator::Sparse(m) => (0..m.n()).all(|i| m.row(i).all(|(_, v)| v >= 0.0)),
            Operator::Dense(m) => !m.has_negative(),
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        match self {
            Operator::Zero(n) => alloc::vec![0.0; *n],
            Operator::Identity(n) => alloc::vec![1.0; *n],
            Operator::Sparse(m) => m.row_sums(),
            Operator::Dense(m) => m.row_sums(),
        }
    }

    /// Column indices of the nonzero off-diagonal entries in row `i`.
    pub fn row_support(&self, i: usize) -> Vec<usize> {
        match self {
            Operator::Zero(_) | Operator::Identity(_) => Vec::new(),
            Operator::Sparse(m) => m
                .row(i)
                .filter(|&(j, v)| j != i && v != 0.0)
                .map(|(j, _)| j)
                .collect(),
            Operator::Dense(m) => (0..m.cols())
                .filter(|&j| j != i && m[(i, j)] != 0.0)
                .collect(),
        }
    }
}

impl From<CsrMatrix> for Operator {
    fn from(m: CsrMatrix) -> Self {
        Operator::Sparse(m)
    }
}

impl From<DenseMatrix> for Operator {
    fn from(m: DenseMatrix) -> Self {
        Operator::Dense(m)
    }
}
