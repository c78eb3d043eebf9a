//! Analysis and Monte Carlo solution of Dirichlet problems for degenerate
//! second-order operators `L = Σ Xᵢ² + X₀ + c`.

// Negated float comparisons are deliberate: they send NaN down the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod check;
pub mod domain;
pub mod expr;
pub mod linalg;
pub mod problem;
pub mod report;
pub mod sde_mc;
pub mod vf_algebra;
