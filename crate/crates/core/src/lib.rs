#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod balance;
pub mod csbm;
pub mod eigen;
pub mod error;
pub mod graph;
pub mod head;
pub mod labels;
mod math;
pub mod matrix;
pub mod operator;
pub mod propagate;
pub mod rng;
pub mod spectral;
pub mod unify;

pub use error::{Error, Result};
pub use graph::{homophily_level, row_normalize, RowNormalize, SparseGraph};
pub use labels::LabelSet;
pub use matrix::{CsrMatrix, DenseMatrix};
pub use operator::Operator;
