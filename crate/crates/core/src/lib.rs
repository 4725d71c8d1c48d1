//! Near-orthonormal invariant polynomial bases for planted random-graph models.
//!
//! The crate enumerates template graphs, classifies node matchings between
//! templates, computes exact moments of edge monomials under hidden-subclique,
//! stochastic-block and Toeplitz-seriation models (independent or permutation
//! latent sampling, with optional ε-alterations), assembles the exact Gram
//! matrix of the normalized basis, and evaluates low-degree advantage and
//! correlation criteria. A Monte-Carlo simulator cross-validates every moment.

pub mod analysis;
pub mod basis;
pub mod error;
pub mod graph_core;
pub mod matchings;
pub mod mc_oracle;
pub mod models;
pub mod rational;

pub use error::{LdError, Result};
