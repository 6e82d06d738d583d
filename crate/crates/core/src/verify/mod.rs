//! Analytic oracles, power-law fitting, and the experiment registry that
//! maps each estimated inequality onto a pre-registered statistical check.

pub mod experiments;
pub mod fit;
pub mod oracles;
pub mod report;
pub mod thresholds;

pub use experiments::{run_experiment, ExperimentKind};
pub use fit::{fit_power_law, ScalingFit};
pub use report::{ExperimentReport, Quantity, Verdict};

use crate::fields::FieldError;
use crate::green::GreenError;
use crate::inkspots::InkError;
use crate::simulate::SimError;
use crate::stopping::StopError;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("fit error: {0}")]
    Fit(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("unknown experiment kind `{0}`")]
    UnknownKind(String),

    #[error("experiment configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stop(#[from] StopError),
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Ink(#[from] InkError),
}
