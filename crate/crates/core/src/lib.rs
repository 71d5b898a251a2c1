//! Lattice unit cells, periodic frame homogenization and tree-ensemble
//! surrogates for the effective Young's modulus of strut lattices.

pub mod boosting;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod homogenization;
pub mod lattice;
pub mod model;
pub mod tree;

pub use error::{Error, Result};
