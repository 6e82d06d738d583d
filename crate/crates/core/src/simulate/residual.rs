//! Discrete Itô-formula and martingale-problem residuals.
//!
//! For a test function `u`, the path residual
//!
//! ```text
//! u(x_K) − u(x_0) − Σ_k Lu(x_k)·dt − Σ_k Du(x_k)·σ(x_k)·√dt·ξ_k
//! ```
//!
//! recomputes the discrete stochastic integral from the retained Gaussian
//! draws, so a correct simulation drives the ensemble mean to zero as
//! `dt → 0`. The generator is `Lu = ½ a^{ij} D_{ij}u + b^i D_i u` with the
//! capped drift of the ensemble.

use super::{Ensemble, Path, SimError, MAX_DIM};
use crate::fields::{DiffusionField, DriftField, FieldError};
use crate::la;
use crate::stats::RunningMoments;

/// A twice-differentiable scalar test function with evaluable derivatives.
pub trait TestFunction: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `d×d` Hessian.
    fn hessian(&self, x: &[f64], out: &mut [f64]);
    /// Support radius for compactly supported functions.
    fn compact_support(&self) -> Option<f64> {
        None
    }
}

/// `u ≡ c`.
pub struct Constant(pub usize, pub f64);

impl TestFunction for Constant {
    fn dim(&self) -> usize {
        self.0
    }
    fn value(&self, _x: &[f64]) -> f64 {
        self.1
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn compact_support(&self) -> Option<f64> {
        (self.1 == 0.0).then_some(0.0)
    }
}

/// `u(x) = v·x`.
pub struct Linear(pub Vec<f64>);

impl TestFunction for Linear {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        la::dot(&self.0, x)
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `u(x) = |x|²`.
pub struct NormSquared(pub usize);

impl TestFunction for NormSquared {
    fn dim(&self) -> usize {
        self.0
    }
    fn value(&self, x: &[f64]) -> f64 {
        la::norm_sq(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = 2.0 * xi;
        }
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let d = self.0;
        for i in 0..d {
            out[i * d + i] = 2.0;
        }
    }
}

/// `u(x) = (x¹)⁴`; its one-step Euler bias for driftless unit diffusion is
/// exactly `3·dt²` per step, which makes it the reference function for
/// observing the residual's order in `dt`.
pub struct QuarticAxis(pub usize);

impl TestFunction for QuarticAxis {
    fn dim(&self) -> usize {
        self.0
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[0].powi(4)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = 4.0 * x[0].powi(3);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = 12.0 * x[0] * x[0];
    }
}

/// Smooth bump `h·exp(1 − 1/(1 − |x/R|²))` supported on the ball of radius
/// `R`.
pub struct SmoothBump {
    pub dim: usize,
    pub radius: f64,
    pub height: f64,
}

impl SmoothBump {
    /// `(u, du/ds, d²u/ds²)` as functions of `s = |x/R|²`.
    fn profile(&self, s: f64) -> (f64, f64, f64) {
        if s >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let g = 1.0 - s;
        let u = self.height * (1.0 - 1.0 / g).exp();
        let phi1 = -1.0 / (g * g);
        let phi2 = -2.0 / (g * g * g);
        (u, u * phi1, u * (phi1 * phi1 + phi2))
    }
}

impl TestFunction for SmoothBump {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.profile(la::norm_sq(x) / (self.radius * self.radius)).0
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r2 = self.radius * self.radius;
        let (_, us, _) = self.profile(la::norm_sq(x) / r2);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = us * 2.0 * xi / r2;
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let r2 = self.radius * self.radius;
        let (_, us, uss) = self.profile(la::norm_sq(x) / r2);
        for i in 0..d {
            for j in 0..d {
                let mut v = uss * (2.0 * x[i] / r2) * (2.0 * x[j] / r2);
                if i == j {
                    v += us * 2.0 / r2;
                }
                out[i * d + j] = v;
            }
        }
    }
    fn compact_support(&self) -> Option<f64> {
        Some(self.radius)
    }
}

/// `factor·a^{ij}(x) D_{ij}u(x) + b(x)·Du(x)`; the generator has
/// `factor = 1/2`, and passing `1.0` is the deliberately broken variant used
/// as a negative control.
pub fn generator_apply(
    u: &dyn TestFunction,
    drift: &DriftField,
    diffusion: &DiffusionField,
    x: &[f64],
    factor: f64,
) -> Result<f64, FieldError> {
    let d = u.dim();
    let mut hess = [0.0f64; MAX_DIM * MAX_DIM];
    let hess = &mut hess[..d * d];
    u.hessian(x, hess);
    let mut a = [0.0f64; MAX_DIM * MAX_DIM];
    let a = &mut a[..d * d];
    diffusion.a_into(x, a);
    let mut second = 0.0;
    for i in 0..d * d {
        second += a[i] * hess[i];
    }
    let mut grad = [0.0f64; MAX_DIM];
    let grad = &mut grad[..d];
    u.gradient(x, grad);
    let mut b = [0.0f64; MAX_DIM];
    let b = &mut b[..d];
    drift.eval_into(x, b)?;
    Ok(factor * second + la::dot(b, grad))
}

/// The discrete Itô residual of one path; see the module docs. `half_factor`
/// is the coefficient on the second-order term (½ for the true generator).
pub fn ito_residual(
    path: &Path,
    u: &dyn TestFunction,
    drift: &DriftField,
    diffusion: &DiffusionField,
    half_factor: f64,
) -> Result<f64, SimError> {
    assert!(path.has_draws(), "residuals need the retained draws");
    let d = path.dim;
    let dt = path.dt;
    let sq = dt.sqrt();
    let mut grad = [0.0f64; MAX_DIM];
    let grad = &mut grad[..d];
    let mut sx = [0.0f64; MAX_DIM];
    let sx = &mut sx[..d];

    let mut acc = u.value(path.final_position()) - u.value(path.position(0));
    for k in 0..path.n_steps() {
        let x = path.position(k);
        acc -= generator_apply(u, drift, diffusion, x, half_factor)? * dt;
        u.gradient(x, grad);
        diffusion.apply_sigma(x, path.draw(k), sx);
        acc -= sq * la::dot(grad, sx);
    }
    Ok(acc)
}

/// Per-interval statistics of the martingale-problem increments.
#[derive(Debug, Clone)]
pub struct IntervalStat {
    pub t_start: f64,
    pub t_end: f64,
    pub moments: RunningMoments,
}

/// For each checkpoint interval, the ensemble mean and standard error of the
/// increment of `u(x_t) − ∫₀ᵗ Lu(x_s) ds`; all means are statistically zero
/// for a correct simulation. Requires a compactly supported `u` and
/// checkpoints within the horizon.
pub fn martingale_residual(
    ensemble: &Ensemble,
    u: &dyn TestFunction,
    checkpoints: &[f64],
    half_factor: f64,
) -> Result<Vec<IntervalStat>, SimError> {
    if u.compact_support().is_none() {
        return Err(SimError::InvalidConfig(
            "martingale residual requires a compactly supported test function".into(),
        ));
    }
    let cfg = ensemble.config();
    if checkpoints.is_empty()
        || checkpoints.windows(2).any(|w| w[1] <= w[0])
        || checkpoints[0] <= 0.0
        || *checkpoints.last().unwrap() > cfg.horizon + 1e-12
    {
        return Err(SimError::InvalidConfig(
            "checkpoints must be strictly increasing, positive, and within the horizon".into(),
        ));
    }
    let steps: Vec<usize> = checkpoints
        .iter()
        .map(|t| ((t / cfg.dt).round() as usize).clamp(1, cfg.n_steps()))
        .collect();
    let drift = ensemble.drift_capped().clone();
    let diffusion = ensemble.diffusion().clone();

    let per_path = |acc: &mut Vec<RunningMoments>, index: u64| -> Result<(), SimError> {
        let path = ensemble.path(index)?;
        let mut lu_sum = 0.0;
        let mut prev_m = u.value(path.position(0));
        let mut next = 0usize;
        for k in 0..path.n_steps() {
            lu_sum +=
                generator_apply(u, &drift, &diffusion, path.position(k), half_factor)? * cfg.dt;
            if next < steps.len() && k + 1 == steps[next] {
                let m = u.value(path.position(k + 1)) - lu_sum;
                acc[next].push(m - prev_m);
                prev_m = m;
                next += 1;
            }
        }
        Ok(())
    };
    let merged = ensemble.fold_indices(
        || vec![RunningMoments::new(); steps.len()],
        per_path,
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        },
    )?;
    let mut t_prev = 0.0;
    Ok(merged
        .into_iter()
        .zip(&steps)
        .map(|(moments, &k)| {
            let stat = IntervalStat {
                t_start: t_prev,
                t_end: k as f64 * cfg.dt,
                moments,
            };
            t_prev = stat.t_end;
            stat
        })
        .collect())
}

/// `Σ_k |b(x_{t_k})|·dt` along a path, with the field as given (callers pass
/// the capped field; an uncapped singular field would contribute `+∞` from an
/// exact singular hit).
pub fn drift_integral(path: &Path, drift: &DriftField) -> f64 {
    let mut acc = 0.0;
    for k in 0..path.n_steps() {
        acc += drift.magnitude(path.position(k)) * path.dt;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{SimConfig, Truncation};
    use approx::assert_relative_eq;

    fn bm(dim: usize, dt: f64, horizon: f64, n_paths: u64, seed: u64) -> Ensemble {
        Ensemble::brownian(SimConfig {
            dim,
            dt,
            horizon,
            truncation: Truncation::DtCoupled,
            master_seed: seed,
            n_paths,
            start: vec![0.0; dim],
        })
        .unwrap()
    }

    #[test]
    fn constant_u_has_exactly_zero_residual() {
        let e = bm(2, 0.05, 1.0, 5, 3);
        let u = Constant(2, 4.2);
        for p in e.paths() {
            let p = p.unwrap();
            let r = ito_residual(&p, &u, e.drift_capped(), e.diffusion(), 0.5).unwrap();
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn linear_u_driftless_residual_telescopes_to_zero() {
        let e = bm(3, 0.05, 1.0, 5, 4);
        let u = Linear(vec![1.0, -2.0, 0.5]);
        for p in e.paths() {
            let p = p.unwrap();
            let r = ito_residual(&p, &u, e.drift_capped(), e.diffusion(), 0.5).unwrap();
            assert!(r.abs() < 1e-12, "residual {r}");
        }
    }

    #[test]
    fn norm_squared_residual_is_centered() {
        // For u = |x|² under driftless unit diffusion the residual is
        // dt·Σ(|ξ_k|² − d): mean zero with known variance.
        let e = bm(3, 1e-2, 1.0, 2000, 5);
        let mut m = RunningMoments::new();
        for p in e.paths() {
            let p = p.unwrap();
            m.push(ito_residual(&p, &NormSquared(3), e.drift_capped(), e.diffusion(), 0.5).unwrap());
        }
        assert!(m.z_score(0.0).abs() < 3.0, "z = {}", m.z_score(0.0));
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let u = SmoothBump {
            dim: 2,
            radius: 2.0,
            height: 1.5,
        };
        let x = [0.7, -0.4];
        let h = 1e-5;
        let mut grad = [0.0; 2];
        u.gradient(&x, &mut grad);
        for i in 0..2 {
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (u.value(&xp) - u.value(&xm)) / (2.0 * h);
            assert_relative_eq!(grad[i], fd, max_relative = 1e-6);
        }
        let mut hess = [0.0; 4];
        u.hessian(&x, &mut hess);
        for i in 0..2 {
            for j in 0..2 {
                let mut xpp = x;
                xpp[i] += h;
                xpp[j] += h;
                let mut xpm = x;
                xpm[i] += h;
                xpm[j] -= h;
                let mut xmp = x;
                xmp[i] -= h;
                xmp[j] += h;
                let mut xmm = x;
                xmm[i] -= h;
                xmm[j] -= h;
                let fd = (u.value(&xpp) - u.value(&xpm) - u.value(&xmp) + u.value(&xmm))
                    / (4.0 * h * h);
                assert_relative_eq!(hess[i * 2 + j], fd, max_relative = 1e-4, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn martingale_residual_zero_function_and_preconditions() {
        let e = bm(2, 0.05, 1.0, 10, 6);
        let zero = Constant(2, 0.0);
        let stats = martingale_residual(&e, &zero, &[0.5, 1.0], 0.5).unwrap();
        assert_eq!(stats.len(), 2);
        for s in &stats {
            assert_eq!(s.moments.mean(), 0.0);
        }
        // Not compactly supported → error.
        assert!(martingale_residual(&e, &NormSquared(2), &[0.5], 0.5).is_err());
        // Checkpoint outside the horizon → error.
        let bump = SmoothBump {
            dim: 2,
            radius: 1.0,
            height: 1.0,
        };
        assert!(martingale_residual(&e, &bump, &[2.0], 0.5).is_err());
    }

    #[test]
    fn drift_integral_closed_cases() {
        let cfg = SimConfig {
            dim: 2,
            dt: 0.25,
            horizon: 2.0,
            truncation: Truncation::Level(10.0),
            master_seed: 8,
            n_paths: 1,
            start: vec![0.0, 0.0],
        };
        let e = Ensemble::brownian(cfg.clone()).unwrap();
        let p = e.path(0).unwrap();
        assert_eq!(drift_integral(&p, &DriftField::zero(2)), 0.0);
        // |b| ≡ 1 over horizon 2 integrates to 2 on the step grid.
        let unit = DriftField::constant(vec![0.6, 0.8]);
        assert_relative_eq!(drift_integral(&p, &unit), 2.0, epsilon = 1e-12);
    }
}
