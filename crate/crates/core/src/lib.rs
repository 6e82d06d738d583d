//! Monte-Carlo laboratory for Itô diffusions `dx_t = b(x_t) dt + √a(x_t) dw_t`
//! whose drift is only critically integrable (`|b| ∈ L_d`), possibly unbounded
//! along a singular set.
//!
//! The crate simulates truncated-drift Euler ensembles with per-path
//! counter-based random streams, evaluates path functionals (exits, hitting
//! times, occupation clocks, tube crossings), estimates discounted and domain
//! Green's measures on grids, and runs a registry of statistical experiments
//! that compare the estimates against closed-form Brownian oracles or check
//! structural properties (reverse Hölder ratios, doubling, A_∞ fits,
//! small-set occupation exponents, exponential exit tails).
//!
//! Ensemble generation is data-parallel over path indices (rayon, behind the
//! default `parallel` feature) with a sequential fallback that produces
//! bit-identical output.

pub mod config;
pub mod fields;
pub mod green;
pub mod inkspots;
pub mod simulate;
pub mod stats;
pub mod stopping;
pub mod verify;

mod la;

pub use config::ExperimentConfig;
pub use fields::{DiffusionField, DriftField, FieldError};
pub use simulate::{Ensemble, Path, SimConfig, SimError};
pub use stopping::{ExitRecord, Region};
pub use verify::{ExperimentKind, ExperimentReport, Verdict};

/// Crate-wide error type: each module has its own error enum, collected here.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Field(#[from] fields::FieldError),
    #[error(transparent)]
    Sim(#[from] simulate::SimError),
    #[error(transparent)]
    Stop(#[from] stopping::StopError),
    #[error(transparent)]
    Green(#[from] green::GreenError),
    #[error(transparent)]
    Ink(#[from] inkspots::InkError),
    #[error(transparent)]
    Verify(#[from] verify::VerifyError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
}

pub type Result<T> = std::result::Result<T, Error>;
