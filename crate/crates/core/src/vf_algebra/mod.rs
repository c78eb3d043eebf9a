//! Vector fields, Lie brackets and the degeneracy diagnostics built on them:
//! the eigenvalue ladder `λ^(k)`, the degeneracy set `K`, the subcriticality
//! fit and the noncharacteristic checks.

mod checks;
mod degeneracy;
mod field;
mod lambda;
mod subcritical;

pub use checks::{noncharacteristic_check, thm2_checks, NoncharPoint, NoncharReport, Thm2Report, THM2_B_THRESHOLD};
pub use degeneracy::{classify_k, DegeneracyReport, PointRecord};
pub use field::{bracket_count, enumerate_brackets, lie_bracket, FieldSummary, VectorField, MAX_BRACKET_ORDER};
pub use lambda::{lambda_k, numeric_bracket_columns, BracketSet, FieldMatrix, NumericBase};
pub use subcritical::{
    subcritical_fit, subcritical_fit_with, FitConfig, FitSampling, FitStatus, Hypersurface, Inside, SubcriticalFit,
    MIN_GRADIENT, ON_SURFACE_TOL,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bracket order {k} exceeds the maximum of {max}")]
    BracketOrderTooLarge { k: usize, max: usize },
    #[error("field {label} is not finite at {point:?}")]
    NonFinite { point: Vec<f64>, label: String },
    #[error("level-set function has vanishing gradient at {point:?}")]
    DegenerateLevelSet { point: Vec<f64> },
    #[error("point {point:?} is not on the surface (|psi| = {residual:e})")]
    NotOnSurface { point: Vec<f64>, residual: f64 },
}
