//! The stepping engine: explicit Euler with capped drift.

use std::ops::ControlFlow;

use super::{Path, PathRng, SimConfig, SimError, MAX_DIM};
use crate::fields::{DiffusionField, DriftField};

/// Observer of a path as it is generated. Returning `Break` stops the walk
/// early (the remaining draws of that path are simply never taken; other
/// paths are unaffected).
pub trait StepVisitor {
    /// Called once with the start position before any step.
    fn start(&mut self, x0: &[f64]) -> ControlFlow<()> {
        let _ = x0;
        ControlFlow::Continue(())
    }
    /// Called after step `k` with the new position at time `t = (k+1)·dt`.
    fn step(&mut self, k: usize, t: f64, x: &[f64]) -> ControlFlow<()>;
}

/// One explicit Euler step `x + b(x)·dt + σ(x)·√dt·ξ`.
///
/// The drift is expected to be already capped; a singular evaluation point is
/// reported as a field error rather than producing a non-finite state.
pub fn euler_step(
    x: &[f64],
    drift: &DriftField,
    diffusion: &DiffusionField,
    dt: f64,
    gaussian: &[f64],
) -> Result<Vec<f64>, SimError> {
    let d = x.len();
    let mut b = vec![0.0; d];
    drift.eval_into(x, &mut b)?;
    let mut noise = vec![0.0; d];
    diffusion.apply_sigma(x, gaussian, &mut noise);
    let sq = dt.sqrt();
    let out: Vec<f64> = (0..d).map(|i| x[i] + b[i] * dt + sq * noise[i]).collect();
    if !out.iter().all(|v| v.is_finite()) {
        return Err(SimError::StepOverflow {
            path_index: 0,
            step: 0,
            state: out,
        });
    }
    Ok(out)
}

/// A simulation setup: config plus coefficient fields, with the drift capped
/// at the configured level. Immutable and shareable across workers.
#[derive(Debug, Clone)]
pub struct Ensemble {
    config: SimConfig,
    drift: DriftField,
    drift_capped: DriftField,
    diffusion: DiffusionField,
    drift_is_zero: bool,
}

impl Ensemble {
    pub fn new(
        config: SimConfig,
        drift: DriftField,
        diffusion: DiffusionField,
    ) -> Result<Self, SimError> {
        config.validate()?;
        if drift.dim() != config.dim || diffusion.dim() != config.dim {
            return Err(SimError::InvalidConfig(format!(
                "field dimensions ({}, {}) do not match config dimension {}",
                drift.dim(),
                diffusion.dim(),
                config.dim
            )));
        }
        let drift_is_zero = drift.kind_name() == "zero";
        let drift_capped = if drift_is_zero {
            drift.clone()
        } else {
            drift.truncate(config.cap_level())?
        };
        Ok(Self {
            config,
            drift,
            drift_capped,
            diffusion,
            drift_is_zero,
        })
    }

    /// Driftless unit-diffusion ensemble (the oracle process).
    pub fn brownian(config: SimConfig) -> Result<Self, SimError> {
        let d = config.dim;
        Self::new(config, DriftField::zero(d), DiffusionField::identity(d))
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// The uncapped drift as constructed.
    pub fn drift(&self) -> &DriftField {
        &self.drift
    }

    /// The capped drift actually used by the steps.
    pub fn drift_capped(&self) -> &DriftField {
        &self.drift_capped
    }

    pub fn diffusion(&self) -> &DiffusionField {
        &self.diffusion
    }

    /// Stream path `index` through a visitor without materializing it.
    pub fn walk<V: StepVisitor>(&self, index: u64, visitor: &mut V) -> Result<(), SimError> {
        self.drive(index, &mut WalkSink(visitor))
    }

    /// Materialize path `index` with positions and draws retained.
    pub fn path(&self, index: u64) -> Result<Path, SimError> {
        let k = self.config.n_steps();
        let d = self.config.dim;
        let mut sink = RecordSink {
            positions: Vec::with_capacity((k + 1) * d),
            draws: Vec::with_capacity(k * d),
        };
        self.drive(index, &mut sink)?;
        Ok(Path {
            dim: d,
            dt: self.config.dt,
            seed: self.config.master_seed,
            index,
            positions: sink.positions,
            draws: sink.draws,
        })
    }

    /// Sequentially stream all paths.
    pub fn paths(&self) -> impl Iterator<Item = Result<Path, SimError>> + '_ {
        (0..self.config.n_paths).map(move |i| self.path(i))
    }

    fn drive<S: Sink>(&self, index: u64, sink: &mut S) -> Result<(), SimError> {
        let d = self.config.dim;
        let dt = self.config.dt;
        let sq = dt.sqrt();
        let n_steps = self.config.n_steps();
        let mut rng = PathRng::new(self.config.master_seed, index);

        let mut x = [0.0f64; MAX_DIM];
        let x = &mut x[..d];
        x.copy_from_slice(&self.config.start);
        let mut xi = [0.0f64; MAX_DIM];
        let xi = &mut xi[..d];
        let mut b = [0.0f64; MAX_DIM];
        let b = &mut b[..d];
        let mut sx = [0.0f64; MAX_DIM];
        let sx = &mut sx[..d];

        if sink.start(x).is_break() {
            return Ok(());
        }
        for k in 0..n_steps {
            for v in xi.iter_mut() {
                *v = rng.standard_normal();
            }
            sink.record_draw(xi);
            if self.drift_is_zero {
                if self.diffusion.is_identity() {
                    for (xv, n) in x.iter_mut().zip(xi.iter()) {
                        *xv += sq * n;
                    }
                } else {
                    self.diffusion.apply_sigma(x, xi, sx);
                    for (xv, n) in x.iter_mut().zip(sx.iter()) {
                        *xv += sq * n;
                    }
                }
            } else {
                self.drift_capped.eval_into(x, b)?;
                self.diffusion.apply_sigma(x, xi, sx);
                for i in 0..d {
                    x[i] += b[i] * dt + sq * sx[i];
                }
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(SimError::StepOverflow {
                    path_index: index,
                    step: k,
                    state: x.to_vec(),
                });
            }
            if sink.step(k, (k + 1) as f64 * dt, x).is_break() {
                return Ok(());
            }
        }
        Ok(())
    }
}

trait Sink {
    fn start(&mut self, x0: &[f64]) -> ControlFlow<()>;
    fn record_draw(&mut self, xi: &[f64]);
    fn step(&mut self, k: usize, t: f64, x: &[f64]) -> ControlFlow<()>;
}

struct WalkSink<'a, V: StepVisitor>(&'a mut V);

impl<V: StepVisitor> Sink for WalkSink<'_, V> {
    #[inline]
    fn start(&mut self, x0: &[f64]) -> ControlFlow<()> {
        self.0.start(x0)
    }
    #[inline]
    fn record_draw(&mut self, _xi: &[f64]) {}
    #[inline]
    fn step(&mut self, k: usize, t: f64, x: &[f64]) -> ControlFlow<()> {
        self.0.step(k, t, x)
    }
}

struct RecordSink {
    positions: Vec<f64>,
    draws: Vec<f64>,
}

impl Sink for RecordSink {
    fn start(&mut self, x0: &[f64]) -> ControlFlow<()> {
        self.positions.extend_from_slice(x0);
        ControlFlow::Continue(())
    }
    fn record_draw(&mut self, xi: &[f64]) {
        self.draws.extend_from_slice(xi);
    }
    fn step(&mut self, _k: usize, _t: f64, x: &[f64]) -> ControlFlow<()> {
        self.positions.extend_from_slice(x);
        ControlFlow::Continue(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::Truncation;
    use approx::assert_relative_eq;

    fn bm_config(dim: usize, dt: f64, horizon: f64, n_paths: u64, seed: u64) -> SimConfig {
        SimConfig {
            dim,
            dt,
            horizon,
            truncation: Truncation::DtCoupled,
            master_seed: seed,
            n_paths,
            start: vec![0.0; dim],
        }
    }

    #[test]
    fn euler_step_deterministic_cases() {
        let d2 = DiffusionField::identity(2);
        // Pure drift: x + b dt.
        let b = DriftField::constant(vec![1.0, 0.0]);
        let y = euler_step(&[0.0, 0.0], &b, &d2, 0.1, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(y[0], 0.1, epsilon = 1e-15);
        assert_relative_eq!(y[1], 0.0, epsilon = 1e-15);
        // Pure noise: √dt scaling.
        let z = DriftField::zero(2);
        let y = euler_step(&[0.0, 0.0], &z, &d2, 0.25, &[2.0, 0.0]).unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-15);
        // Drift-only with zero gaussian at arbitrary x.
        let b = DriftField::constant(vec![-0.5, 2.0]);
        let y = euler_step(&[1.0, 1.0], &b, &d2, 0.2, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(y[0], 0.9, epsilon = 1e-15);
        assert_relative_eq!(y[1], 1.4, epsilon = 1e-15);
    }

    #[test]
    fn single_step_horizon_gives_two_point_path() {
        let e = Ensemble::brownian(bm_config(2, 0.5, 0.5, 1, 11)).unwrap();
        let p = e.path(0).unwrap();
        assert_eq!(p.n_steps(), 1);
        assert_eq!(p.position(0), &[0.0, 0.0]);
        assert!(p.has_draws());
    }

    #[test]
    fn same_seed_gives_bit_identical_paths() {
        let e1 = Ensemble::brownian(bm_config(3, 0.01, 1.0, 8, 5)).unwrap();
        let e2 = Ensemble::brownian(bm_config(3, 0.01, 1.0, 8, 5)).unwrap();
        for i in 0..8 {
            assert_eq!(e1.path(i).unwrap(), e2.path(i).unwrap());
        }
        let e3 = Ensemble::brownian(bm_config(3, 0.01, 1.0, 8, 6)).unwrap();
        assert_ne!(e1.path(0).unwrap(), e3.path(0).unwrap());
    }

    #[test]
    fn walk_matches_materialized_path() {
        struct Collect(Vec<f64>);
        impl StepVisitor for Collect {
            fn start(&mut self, x0: &[f64]) -> ControlFlow<()> {
                self.0.extend_from_slice(x0);
                ControlFlow::Continue(())
            }
            fn step(&mut self, _k: usize, _t: f64, x: &[f64]) -> ControlFlow<()> {
                self.0.extend_from_slice(x);
                ControlFlow::Continue(())
            }
        }
        let e = Ensemble::new(
            bm_config(2, 0.01, 0.5, 4, 3),
            DriftField::inverse_radial(2, None).unwrap(),
            DiffusionField::rotated_diagonal(vec![0.5, 2.0]).unwrap(),
        )
        .unwrap();
        for i in 0..4 {
            let mut c = Collect(Vec::new());
            e.walk(i, &mut c).unwrap();
            let p = e.path(i).unwrap();
            assert_eq!(c.0, p.positions);
        }
    }

    #[test]
    fn capped_drift_is_applied() {
        // inverse radial capped at the configured level: the first step away
        // from the singular start must remain finite.
        let mut cfg = bm_config(2, 0.01, 0.1, 2, 9);
        cfg.truncation = Truncation::Level(5.0);
        let e = Ensemble::new(
            cfg,
            DriftField::inverse_radial(2, None).unwrap(),
            DiffusionField::identity(2),
        )
        .unwrap();
        let p = e.path(0).unwrap();
        assert!(p.positions.iter().all(|v| v.is_finite()));
        assert_eq!(e.drift_capped().kind_name(), "truncated");
    }

    #[test]
    fn mean_square_displacement_of_bm() {
        // E|w_T|² = d·T.
        let e = Ensemble::brownian(bm_config(2, 0.01, 1.0, 4000, 21)).unwrap();
        let mut sum = 0.0;
        let mut sq = 0.0;
        for p in e.paths() {
            let p = p.unwrap();
            let r2 = crate::la::norm_sq(p.final_position());
            sum += r2;
            sq += r2 * r2;
        }
        let n = 4000.0;
        let mean = sum / n;
        let se = ((sq / n - mean * mean) / n).sqrt();
        assert!(
            (mean - 2.0).abs() < 3.0 * se,
            "mean |x_T|^2 = {mean}, se = {se}"
        );
    }
}
