//! Time-discretized simulation of `dx_t = b(x_t) dt + σ(x_t) dw_t` with
//! capped drift: explicit Euler steps, per-path counter-based random streams,
//! and deterministic data-parallel ensemble folds.
//!
//! The determinism contract: every byte of ensemble output is a pure
//! function of `(SimConfig, drift spec, diffusion spec)` — independent of
//! worker count, scheduling, and of whether the `parallel` feature is active.

mod ensemble;
mod path;
mod residual;
mod rng;
mod sampler;

pub use ensemble::{run_sharded, run_sharded_sequential, shard_ranges, ENSEMBLE_SHARDS};
pub use path::Path;
pub use residual::{
    drift_integral, generator_apply, ito_residual, martingale_residual, Constant, IntervalStat,
    Linear, NormSquared, QuarticAxis, SmoothBump, TestFunction,
};
pub use rng::PathRng;
pub use sampler::{euler_step, Ensemble, StepVisitor};

use crate::fields::FieldError;

/// Hard cap on the ambient dimension, sized for stack scratch buffers.
pub const MAX_DIM: usize = 8;

/// Errors from simulation configuration and path generation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("path {path_index} aborted at step {step}: non-finite state {state:?}")]
    StepOverflow {
        path_index: u64,
        step: usize,
        state: Vec<f64>,
    },

    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Drift truncation policy. The coupled default `M(dt) = dt^{-1/2}` ties the
/// regularization level to the step size so that refining the grid also
/// relaxes the cap; results are always reported along refinement schedules of
/// the pair `(dt, M)`, never at a single resolution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    DtCoupled,
    Level(f64),
}

impl Truncation {
    pub fn level(&self, dt: f64) -> f64 {
        match self {
            Truncation::DtCoupled => dt.powf(-0.5),
            Truncation::Level(m) => *m,
        }
    }
}

/// Ensemble simulation parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dim: usize,
    /// Time step.
    pub dt: f64,
    /// Horizon; rounded up to a whole number of steps.
    pub horizon: f64,
    /// Drift cap policy.
    pub truncation: Truncation,
    pub master_seed: u64,
    pub n_paths: u64,
    /// Common start point of every path.
    pub start: Vec<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(SimError::InvalidConfig(format!(
                "dimension {} outside 1..={MAX_DIM}",
                self.dim
            )));
        }
        if !(self.dt > 0.0) {
            return Err(SimError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.horizon < self.dt {
            return Err(SimError::InvalidConfig(format!(
                "horizon {} shorter than one step {}",
                self.horizon, self.dt
            )));
        }
        if !(self.truncation.level(self.dt) > 0.0) {
            return Err(SimError::InvalidConfig("truncation level must be positive".into()));
        }
        if self.n_paths == 0 {
            return Err(SimError::InvalidConfig("n_paths must be at least 1".into()));
        }
        if self.start.len() != self.dim {
            return Err(SimError::InvalidConfig(format!(
                "start point has dimension {}, config says {}",
                self.start.len(),
                self.dim
            )));
        }
        if !self.start.iter().all(|v| v.is_finite()) {
            return Err(SimError::InvalidConfig("start point must be finite".into()));
        }
        Ok(())
    }

    /// Number of Euler steps: the horizon rounded up to a whole grid.
    pub fn n_steps(&self) -> usize {
        ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// The realized drift cap `M`.
    pub fn cap_level(&self) -> f64 {
        self.truncation.level(self.dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SimConfig {
        SimConfig {
            dim: 2,
            dt: 0.1,
            horizon: 1.0,
            truncation: Truncation::DtCoupled,
            master_seed: 1,
            n_paths: 4,
            start: vec![0.0, 0.0],
        }
    }

    #[test]
    fn config_validation() {
        assert!(base().validate().is_ok());
        let mut c = base();
        c.dt = 0.0;
        assert!(c.validate().is_err());
        let mut c = base();
        c.horizon = 0.05;
        assert!(c.validate().is_err());
        let mut c = base();
        c.n_paths = 0;
        assert!(c.validate().is_err());
        let mut c = base();
        c.start = vec![0.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn step_count_and_cap() {
        let c = base();
        assert_eq!(c.n_steps(), 10);
        assert!((c.cap_level() - 0.1f64.powf(-0.5)).abs() < 1e-12);
        let mut c2 = base();
        c2.truncation = Truncation::Level(7.5);
        assert_eq!(c2.cap_level(), 7.5);
        let mut c3 = base();
        c3.horizon = c3.dt;
        assert_eq!(c3.n_steps(), 1);
    }
}
