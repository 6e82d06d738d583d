//! Drift and diffusion coefficient fields.
//!
//! A [`DriftField`] is a pure evaluator `x ↦ b(x)` with a declared finite
//! singular set, an optional closed-form `L_d` norm, and an optional support
//! radius. A [`DiffusionField`] evaluates to a symmetric matrix `a(x)` with
//! eigenvalues in the ellipticity band `[δ, 1/δ]` together with a symmetric
//! factor `σ(x)` satisfying `σσ* = a`.
//!
//! Fields are immutable after construction and safe to share across workers;
//! every operation here is reentrant.

mod diffusion;
mod drift;
mod quadrature;

pub use diffusion::{DiffusionField, SymmetricSqrt};
pub use drift::DriftField;
pub use quadrature::{ld_norm, QuadRegion};

/// Errors from field construction, evaluation, and norm quadrature.
#[derive(Debug, Clone, thiserror::Error)]
pub enum FieldError {
    #[error("drift evaluated at declared singular point {point:?}")]
    SingularPoint { point: Vec<f64> },

    #[error("dimension mismatch: field has dimension {expected}, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid field parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error(
        "L_{dim} norm quadrature does not converge near a singular point \
         (refinement partial sums {partial_sums:?})"
    )]
    NormDivergence { dim: usize, partial_sums: Vec<f64> },

    #[error("quadrature region is invalid: {0}")]
    InvalidRegion(String),

    #[error("diffusion matrix at {point:?} is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { point: Vec<f64>, asymmetry: f64 },

    #[error(
        "diffusion matrix at {point:?} has eigenvalue {eigenvalue:.6} outside \
         [{delta:.6}, {inv_delta:.6}]"
    )]
    EllipticityViolation {
        point: Vec<f64>,
        eigenvalue: f64,
        delta: f64,
        inv_delta: f64,
    },
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<(), FieldError> {
    if x.len() != expected {
        return Err(FieldError::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}
