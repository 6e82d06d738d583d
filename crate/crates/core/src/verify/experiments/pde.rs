//! Quadrature-backed experiment kinds for the elliptic estimates: the
//! maximum principle with its stochastic representation, interior-norm
//! λ-decay on half balls, the interior Hessian-average estimate, and the
//! anti-Hölder average inequality.

use std::ops::ControlFlow;

use super::{grade, sub_ensemble, Outcome};
use crate::config::ExperimentConfig;
use crate::la;
use crate::simulate::{generator_apply, NormSquared, SmoothBump, StepVisitor, TestFunction};
use crate::stats::RunningMoments;
use crate::verify::thresholds as th;
use crate::verify::{fit_power_law, Quantity, VerifyError};

/// Midpoint sum of `f` over the cells of `[-R, R]^d` whose center lies in
/// `B_R`; returns `(∫ f, max f, boundary max f)` style data via closures.
fn ball_grid_scan(d: usize, big_r: f64, n: usize, mut visit: impl FnMut(&[f64], f64)) {
    let h = 2.0 * big_r / n as f64;
    let vol = h.powi(d as i32);
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        for (k, &i) in idx.iter().enumerate() {
            x[k] = -big_r + (i as f64 + 0.5) * h;
        }
        if la::norm_sq(&x) <= big_r * big_r {
            visit(&x, vol);
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return;
            }
        }
    }
}

/// Maximum principle: the stochastic representation
/// `u(x₀) = E u(x_τ) − E∫₀^τ Lu` is exact in expectation for `u = |x|²`, the
/// subharmonic member attains its maximum on the boundary, and the
/// quantitative bound `max u ≤ sup_∂ u₊ + N‖(Lu)₋‖_p` holds across a bump
/// perturbation family with the frozen `N`.
pub(crate) fn max_principle(cfg: &ExperimentConfig) -> Result<Outcome, VerifyError> {
    let d = cfg.sim.dim;
    let p = cfg.analysis.p.unwrap_or(2.7);
    let big_r = cfg.analysis.radius.unwrap_or(1.0);
    let n_frozen = th::MAX_PRINCIPLE_N / if cfg.negative_control { 10.0 } else { 1.0 };

    // Stochastic representation for u = |x|²: E[u(x_τ) − d·τ] = u(x₀)
    // exactly on the discrete walk (the quadratic-variation identity).
    let ensemble = sub_ensemble(cfg, 1100, |_| {})?;
    let u = NormSquared(d);
    let domain = crate::stopping::Region::ball_at_origin(d, big_r);
    let moments = ensemble.fold_indices(
        RunningMoments::new,
        |m, i| {
            let mut scan = crate::stopping::ExitScan::new(&domain);
            ensemble.walk(i, &mut scan)?;
            if let crate::stopping::ExitRecord::Exited { time, position, .. } = scan.finish() {
                m.push(la::norm_sq(&position) - d as f64 * time);
            }
            Ok(())
        },
        |a, b| a.merge(b),
    )?;
    let u0 = u.value(&cfg.sim.start);
    let repr_z = moments.z_score(u0);

    // Quantitative family: u_ε = |x|² + ε·w with w a bump away from the
    // center; (Lu)₋ = ε·(−½Δw − d/ε)₋ computed on a grid.
    let mut center = vec![0.0; d];
    center[0] = 0.3 * big_r;
    let bump = SmoothBump {
        dim: d,
        radius: 0.5 * big_r,
        height: 1.0,
    };
    let drift = ensemble.drift_capped().clone();
    let diffusion = ensemble.diffusion().clone();
    let mut quantities = vec![Quantity::with_se("representation_mean", moments.mean(), moments.std_err()).oracle(u0)];
    let mut family_ok = true;
    let grid_n = 48;
    for eps in [1.0, 2.0, 4.0] {
        let mut interior_max = f64::NEG_INFINITY;
        let mut boundary_sup = f64::NEG_INFINITY;
        let mut neg_norm_p = 0.0;
        ball_grid_scan(d, big_r, grid_n, |x, vol| {
            let mut xs = x.to_vec();
            for (k, c) in center.iter().enumerate() {
                xs[k] -= c;
            }
            let val = la::norm_sq(x) + eps * bump.value(&xs);
            let r = la::norm(x);
            if r >= big_r - 2.0 * big_r / grid_n as f64 {
                boundary_sup = boundary_sup.max(val);
            }
            interior_max = interior_max.max(val);
            // Lu = d + ε·L w(·−c) for the reference process; use the
            // configured generator in general.
            let mut grad = vec![0.0; d];
            bump.gradient(&xs, &mut grad);
            let lw = generator_apply(&bump, &drift, &diffusion, &xs, 0.5).unwrap_or(f64::NAN);
            let lu = d as f64 + eps * lw;
            neg_norm_p += (-lu).max(0.0).powf(p) * vol;
        });
        let neg_norm = neg_norm_p.powf(1.0 / p);
        let excess = interior_max - boundary_sup.max(0.0);
        quantities.push(Quantity::point("interior_excess", eps, excess, 0.0));
        quantities.push(Quantity::point("neg_part_norm", eps, neg_norm, 0.0));
        family_ok &= excess <= n_frozen * neg_norm;
    }
    // Pure subharmonic member: boundary attainment is exact.
    let mut interior_max = f64::NEG_INFINITY;
    let mut boundary_sup = f64::NEG_INFINITY;
    ball_grid_scan(d, big_r, grid_n, |x, _| {
        let v = la::norm_sq(x);
        if la::norm(x) >= big_r - 2.0 * big_r / grid_n as f64 {
            boundary_sup = boundary_sup.max(v);
        }
        interior_max = interior_max.max(v);
    });
    let attainment = interior_max <= boundary_sup + 1e-12;
    quantities.push(Quantity::plain("boundary_attainment_gap", interior_max - boundary_sup));

    let sound = moments.count() > 0 && attainment;
    let quantitative_ok = repr_z.abs() <= th::MEAN_Z && family_ok;
    Ok(Outcome {
        params: vec![
            ("p".into(), format!("{p}")),
            ("frozen_n".into(), format!("{n_frozen}")),
        ],
        quantities,
        verdict: grade(cfg, sound, quantitative_ok),
    })
}

/// Interior-norm λ-decay on the half ball: for the λ-harmonic boundary
/// family `u_λ = exp(√(2λ)(x¹ − R))` the interior `L_p` norm over `B_{R/2}`
/// decays exponentially in `√λ` while the boundary sup stays 1.
pub(crate) fn decay_halfball(cfg: &ExperimentConfig) -> Result<Outcome, VerifyError> {
    let d = cfg.sim.dim;
    let p = cfg.analysis.p.unwrap_or(2.7);
    let big_r = cfg.analysis.radius.unwrap_or(1.0);
    let lambdas = cfg
        .analysis
        .lambdas
        .clone()
        .unwrap_or_else(|| vec![1.0, 4.0, 16.0, 64.0]);
    // Negative control: measure over the full ball, where the boundary layer
    // dominates and nothing decays.
    let inner_radius = if cfg.negative_control {
        big_r
    } else {
        big_r / 2.0
    };

    let mut quantities = Vec::new();
    let mut points = Vec::new();
    for &lambda in &lambdas {
        let a = (2.0 * lambda).sqrt();
        let mut norm_p = 0.0;
        ball_grid_scan(d, inner_radius, 96, |x, vol| {
            let u = (a * (x[0] - big_r)).exp();
            norm_p += u.powf(p) * vol;
        });
        let norm = norm_p.powf(1.0 / p);
        quantities.push(Quantity::point("interior_norm", lambda, norm, 0.0));
        points.push((lambda.sqrt().exp(), norm, 0.0));
    }
    // ln‖u‖ vs √λ through x = e^{√λ}.
    let fit = fit_power_law(&points)?;
    quantities.push(Quantity::with_se("decay_slope", fit.slope, fit.slope_se));
    let (lo, hi) = th::DECAY_SLOPE_WINDOW;
    let quantitative_ok = fit.slope >= lo && fit.slope <= hi;
    Ok(Outcome {
        params: vec![
            ("p".into(), format!("{p}")),
            ("R".into(), format!("{big_r}")),
            ("lambdas".into(), format!("{lambdas:?}")),
        ],
        quantities,
        verdict: grade(cfg, fit.slope < 0.0 || cfg.negative_control, quantitative_ok),
    })
}

/// Interior Hessian-average estimate: the normalized average
/// `(⨍|D²u|^{1/(2μ)})^{2μ}` over `B_R` is controlled by the `L_p` average of
/// `Lu` plus the scaled boundary sup, across a manufactured family including
/// a harmonic member (which makes the boundary term indispensable).
pub(crate) fn lin_estimate(cfg: &ExperimentConfig) -> Result<Outcome, VerifyError> {
    let d = cfg.sim.dim;
    let p = cfg.analysis.p.unwrap_or(2.7);
    let mu = th::ANTIHOLDER_MU;
    let radii = cfg.analysis.radii.clone().unwrap_or_else(|| vec![0.5, 1.0]);
    let drop_boundary = cfg.negative_control;

    // Manufactured family with analytic Hessians: value, |D²u| (Frobenius),
    // and Lu for the reference generator ½Δ.
    type Member = (
        &'static str,
        Box<dyn Fn(&[f64]) -> f64>,
        Box<dyn Fn(&[f64]) -> f64>,
        Box<dyn Fn(&[f64]) -> f64>,
    );
    let members: Vec<Member> = vec![
        (
            "quadratic",
            Box::new(|x: &[f64]| la::norm_sq(x)),
            Box::new(move |_x: &[f64]| 2.0 * (d as f64).sqrt()),
            Box::new(move |_x: &[f64]| d as f64),
        ),
        (
            "harmonic",
            Box::new(|x: &[f64]| x[0] * x[1]),
            Box::new(|_x: &[f64]| std::f64::consts::SQRT_2),
            Box::new(|_x: &[f64]| 0.0),
        ),
        (
            "oscillatory",
            Box::new(|x: &[f64]| (2.0 * x[0]).sin() * x[1]),
            Box::new(|x: &[f64]| {
                // Hessian entries: D₁₁ = −4 sin(2x¹)x², D₁₂ = 2cos(2x¹).
                let d11 = -4.0 * (2.0 * x[0]).sin() * x[1];
                let d12 = 2.0 * (2.0 * x[0]).cos();
                (d11 * d11 + 2.0 * d12 * d12).sqrt()
            }),
            Box::new(|x: &[f64]| -2.0 * (2.0 * x[0]).sin() * x[1]),
        ),
    ];

    let mut quantities = Vec::new();
    let mut max_ratio = 0.0f64;
    let mut sound = true;
    for &big_r in &radii {
        for (name, value, hess_norm, lu) in &members {
            let mut lhs_int = 0.0;
            let mut rhs_int = 0.0;
            let mut volume = 0.0;
            let mut boundary_sup = 0.0f64;
            ball_grid_scan(d, big_r, 64, |x, vol| {
                lhs_int += hess_norm(x).powf(1.0 / (2.0 * mu)) * vol;
                rhs_int += lu(x).abs().powf(p) * vol;
                volume += vol;
                if la::norm(x) >= big_r - 2.0 * big_r / 64.0 {
                    boundary_sup = boundary_sup.max(value(x).abs());
                }
            });
            let lhs = (lhs_int / volume).powf(2.0 * mu);
            let mut rhs = (rhs_int / volume).powf(1.0 / p);
            if !drop_boundary {
                rhs += boundary_sup / (big_r * big_r);
            }
            let ratio = lhs / rhs;
            sound &= lhs.is_finite();
            max_ratio = max_ratio.max(ratio);
            quantities.push(Quantity::point(format!("ratio_{name}"), big_r, ratio, 0.0));
        }
    }
    quantities.push(Quantity::plain("max_ratio", max_ratio));
    let quantitative_ok = max_ratio.is_finite() && max_ratio <= th::LIN_RATIO_MAX;
    Ok(Outcome {
        params: vec![("p".into(), format!("{p}")), ("mu".into(), format!("{mu}"))],
        quantities,
        verdict: grade(cfg, sound, quantitative_ok),
    })
}

/// Anti-Hölder average: `∫_{B_R} f^{1/(2μ)} ≤ N·R^{d−1/μ}·(E∫₀^{τ_R}f)^{1/(2μ)}`
/// over a manufactured family (indicator, radial power, concentrated spike),
/// with the left side by quadrature and the right side by Monte Carlo.
pub(crate) fn antiholder(cfg: &ExperimentConfig) -> Result<Outcome, VerifyError> {
    let d = cfg.sim.dim;
    let big_r = cfg.analysis.radius.unwrap_or(1.0);
    let mu = th::ANTIHOLDER_MU;
    // Negative control: the inverted exponent 2μ on the left side.
    let lhs_exp = if cfg.negative_control {
        2.0 * mu
    } else {
        1.0 / (2.0 * mu)
    };

    let mut spike_center = vec![0.0; d];
    spike_center[0] = 0.3 * big_r;
    type Member = (&'static str, Box<dyn Fn(&[f64]) -> f64 + Sync>);
    let sc = spike_center.clone();
    let members: Vec<Member> = vec![
        ("indicator", Box::new(move |_x: &[f64]| 1.0)),
        ("radial_power", Box::new(|x: &[f64]| la::norm(x))),
        (
            "spike",
            Box::new(move |x: &[f64]| {
                if la::dist(x, &sc) <= 0.05 {
                    1e4
                } else {
                    0.0
                }
            }),
        ),
    ];

    let ensemble = sub_ensemble(cfg, 1200, |_| {})?;
    let mut quantities = Vec::new();
    let mut max_ratio = 0.0f64;
    let mut sound = true;
    for (name, f) in &members {
        // Left side by quadrature.
        let mut lhs = 0.0;
        ball_grid_scan(d, big_r, 128, |x, vol| {
            lhs += f(x).powf(lhs_exp) * vol;
        });
        // Right side by Monte Carlo.
        struct Acc<'a> {
            f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
            escape2: f64,
            dt: f64,
            acc: f64,
        }
        impl StepVisitor for Acc<'_> {
            fn start(&mut self, x0: &[f64]) -> ControlFlow<()> {
                self.acc += (self.f)(x0) * self.dt;
                ControlFlow::Continue(())
            }
            fn step(&mut self, _k: usize, _t: f64, x: &[f64]) -> ControlFlow<()> {
                if la::norm_sq(x) >= self.escape2 {
                    return ControlFlow::Break(());
                }
                self.acc += (self.f)(x) * self.dt;
                ControlFlow::Continue(())
            }
        }
        let moments = ensemble.fold_indices(
            RunningMoments::new,
            |m, i| {
                let mut v = Acc {
                    f: f.as_ref(),
                    escape2: big_r * big_r,
                    dt: ensemble.config().dt,
                    acc: 0.0,
                };
                ensemble.walk(i, &mut v)?;
                m.push(v.acc);
                Ok(())
            },
            |a, b| a.merge(b),
        )?;
        let rhs = big_r.powf(d as f64 - 1.0 / mu) * moments.mean().powf(1.0 / (2.0 * mu));
        let ratio = lhs / rhs;
        sound &= moments.mean() > 0.0 && ratio.is_finite();
        max_ratio = max_ratio.max(ratio);
        quantities.push(Quantity::plain(format!("ratio_{name}"), ratio));
    }
    quantities.push(Quantity::plain("max_ratio", max_ratio));
    let quantitative_ok = max_ratio <= th::ANTIHOLDER_RATIO_MAX;
    Ok(Outcome {
        params: vec![("mu".into(), format!("{mu}")), ("R".into(), format!("{big_r}"))],
        quantities,
        verdict: grade(cfg, sound, quantitative_ok),
    })
}
