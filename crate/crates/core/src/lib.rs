//! Simulation and limit theory for the joint fluctuations of traces of
//! overlapping principal submatrices of one Wigner matrix, and for the
//! correlated Gaussian free fields that describe them.

// `!(x > 0.0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ensembles;
pub mod error;
pub mod gff;
pub mod indexing;
pub mod keyed;
pub mod matrixops;
pub mod montecarlo;
pub mod theory;

pub use error::{Error, Result};
