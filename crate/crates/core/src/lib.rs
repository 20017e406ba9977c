//! Pseudo-Riemannian geometry of optimal transport costs.
//!
//! The crate builds the split pseudo-metric and companion Riemannian metric
//! induced on a product domain by a cost and two densities, solves discrete
//! transport problems, studies the graph of the resulting map as a spacelike
//! submanifold, and reports the residuals and observed constants of the
//! curvature-based interior estimates.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod canonical;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod graph;
pub mod linalg;
pub mod pipeline;
pub mod transport;

pub use error::{Error, Result};
