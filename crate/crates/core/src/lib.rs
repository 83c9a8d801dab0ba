//! Level-set distances between samples, baseline two-sample statistics,
//! permutation inference and the shape pipeline.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod error;
pub mod inference;
pub mod levelsets;
pub mod lsdistance;
pub mod numfmt;
pub mod setops;
pub mod shapes;
pub mod sparsity;

pub use crate::data::{LevelGrid, PointCloud, RngSpec};
pub use crate::error::{Error, Result};
