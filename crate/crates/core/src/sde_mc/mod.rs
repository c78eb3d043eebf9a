//! Monte Carlo solution of the Dirichlet problem by simulating the
//! operator's diffusion to its first exit from `D`.
//!
//! Paths follow `dξ = b(ξ)dt + Σ √2·Xᵢ(ξ) dWᵢ` with the Itô drift `b` from
//! [`ito_drift`], so the path generator is `Σ Xᵢ² + X₀`. The estimate of
//! `u(x)` averages `g(ξ_τ)·exp(∫₀^τ c) − ∫₀^τ f·exp(∫₀^t c) dt`.

mod drift;
mod estimate;
mod path;
pub mod rng;

pub use drift::ito_drift;
pub use estimate::{
    convergence_csv, convergence_study, estimate_grid, estimate_point, estimates_csv, simulate_paths, ConvergenceRow,
    Estimate,
};
pub use path::{ExitRecord, PathConfig, Simulator};

use thiserror::Error;

use crate::domain::DomainError;

#[derive(Debug, Clone, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid path configuration: {0}")]
    Config(String),
    #[error("point has {found} coordinates, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("start point {point:?} is not inside the domain")]
    OutsideDomain { point: Vec<f64> },
    #[error(
        "{:.4}% of paths did not exit by t_max = {t_max} ({} invalid); raise t_max or check that some noise field is uniformly nondegenerate in one coordinate",
        100.0 * estimate.unexited_frac,
        estimate.n_invalid
    )]
    TooManyUnexited { estimate: Box<Estimate>, t_max: f64 },
}
