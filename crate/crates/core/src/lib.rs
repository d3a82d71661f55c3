//! Numerical toolkit for the logarithmic Laplacian: pointwise evaluation,
//! explicit barriers, the Kelvin transform and a Galerkin Dirichlet solver.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod error;
pub mod field;
pub mod geometry;
pub mod kelvin;
pub mod operator;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod stats;

pub use error::{LoglapError, Result};
