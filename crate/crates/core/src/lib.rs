//! Competitive online allocation of capacity-limited inventories.
//!
//! The crate provides the single-inventory pursuit rule ([`cr_pursuit`]), the
//! divide-and-conquer allowance-and-pursuit algorithm ([`anp`]), a primal-dual
//! threshold baseline ([`baseline_pd`]), exact offline solvers ([`offline`])
//! and a harness that measures empirical competitive ratios ([`bench`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod anp;
pub mod baseline_pd;
pub mod bench;
pub mod cr_pursuit;
pub mod error;
pub mod model;
pub mod offline;
pub mod quad;
pub mod report;

pub use error::{Error, Result};

/// Absolute tolerance on function values for root finding.
pub const TOL_ROOT: f64 = 1e-10;
/// Absolute tolerance on constraint satisfaction.
pub const TOL_FEAS: f64 = 1e-8;
