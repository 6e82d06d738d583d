//! Closed-form functionals of driftless unit-diffusion Brownian motion
//! (generator ½Δ), each paired with an independent numerical cross-check in
//! the test suite: finite-difference radial solves, Bessel-zero bisection,
//! and quadrature identities.

use super::VerifyError;
use crate::la;

/// Probability that Brownian motion started at radius `rho` reaches the
/// sphere of radius `hit` before the sphere of radius `escape`
/// (`hit ≤ rho ≤ escape`). Radial harmonic function: `r^{2−d}` in `d ≥ 3`,
/// `ln r` in `d = 2`.
pub fn bm_hitting_prob(d: usize, hit: f64, escape: f64, rho: f64) -> Result<f64, VerifyError> {
    if !(0.0 < hit && hit <= rho && rho <= escape) {
        return Err(VerifyError::Oracle(format!(
            "need 0 < hit ≤ rho ≤ escape, got ({hit}, {rho}, {escape})"
        )));
    }
    if d < 2 {
        return Err(VerifyError::Oracle("dimension must be at least 2".into()));
    }
    Ok(if d == 2 {
        (escape / rho).ln() / (escape / hit).ln()
    } else {
        let p = 2.0 - d as f64;
        (rho.powf(p) - escape.powf(p)) / (hit.powf(p) - escape.powf(p))
    })
}

/// Expected exit time of `B_R` from radius `r`: `(R² − r²)/d` for ½Δ.
pub fn bm_exit_moment(d: usize, big_r: f64, r: f64) -> f64 {
    (big_r * big_r - r * r) / d as f64
}

/// Resolvent kernel of `(λ − ½Δ)^{-1}` in d = 3: `e^{-√(2λ) r}/(2π r)`.
pub fn bm_resolvent_kernel(lambda: f64, r: f64) -> Result<f64, VerifyError> {
    if !(r > 0.0) {
        return Err(VerifyError::Oracle(format!("kernel pole at r = {r}")));
    }
    if !(lambda > 0.0) {
        return Err(VerifyError::Oracle(format!("need λ > 0, got {lambda}")));
    }
    Ok((-(2.0 * lambda).sqrt() * r).exp() / (2.0 * std::f64::consts::PI * r))
}

/// `∫_{B_radius} g_λ dx` in d = 3: `(1 − e^{-u}(1+u))/λ` with
/// `u = √(2λ)·radius`.
pub fn bm_resolvent_ball_mass(lambda: f64, radius: f64) -> f64 {
    let u = (2.0 * lambda).sqrt() * radius;
    (1.0 - (-u).exp() * (1.0 + u)) / lambda
}

/// Mean occupation of `B_r` before exiting `B_R`, started at the center, in
/// d = 3: `∫ G_{B_R}(0, y) 1_{B_r} dy = r² − 2r³/(3R)` scaled to `R`.
pub fn bm_center_occupation_d3(big_r: f64, r: f64) -> f64 {
    // G_{B_R}(0, y) = (1/2π)(|y|⁻¹ − R⁻¹); integrate over the ball radius r.
    2.0 * (r * r / 2.0 - r * r * r / (3.0 * big_r))
}

/// Exit-tail decay rate ν* of `P(τ_R > T) ≍ e^{-ν* T}`: the principal
/// Dirichlet eigenvalue of ½Δ on `B_R`, `j²_{d/2−1,1}/(2R²)`.
pub fn bm_confinement_rate(d: usize, big_r: f64) -> Result<f64, VerifyError> {
    if d < 2 {
        return Err(VerifyError::Oracle("dimension must be at least 2".into()));
    }
    let nu = d as f64 / 2.0 - 1.0;
    let j = first_bessel_zero(nu)?;
    Ok(j * j / (2.0 * big_r * big_r))
}

/// First positive zero of the Bessel function `J_ν`, by sign-scan plus
/// bisection on the power series.
pub fn first_bessel_zero(nu: f64) -> Result<f64, VerifyError> {
    if !(0.0..=20.0).contains(&nu) {
        return Err(VerifyError::Oracle(format!("order {nu} out of supported range")));
    }
    // The first zero lies in (ν, ν + 1.86·ν^{1/3} + 3.5); scan for the first
    // sign change from the left edge.
    let lo0 = nu.max(0.1);
    let hi0 = nu + 1.86 * nu.cbrt() + 3.5;
    let steps = 400;
    let mut prev_x = lo0;
    let mut prev_v = bessel_j(nu, prev_x);
    let mut bracket = None;
    for i in 1..=steps {
        let x = lo0 + (hi0 - lo0) * i as f64 / steps as f64;
        let v = bessel_j(nu, x);
        if prev_v > 0.0 && v <= 0.0 {
            bracket = Some((prev_x, x));
            break;
        }
        prev_x = x;
        prev_v = v;
    }
    let (mut lo, mut hi) =
        bracket.ok_or_else(|| VerifyError::Oracle(format!("no sign change for J_{nu}")))?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-14 * mid {
            break;
        }
        if bessel_j(nu, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `J_ν(x)` by the ascending power series; adequate for `x ≲ 25`, which
/// covers every first zero we bisect for.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powf(nu) / gamma_fn(nu + 1.0);
    let mut sum = term;
    let x2 = half * half;
    for k in 1..200 {
        let kf = k as f64;
        term *= -x2 / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Γ(x) for x > 0 via the Lanczos approximation (g = 7, n = 9), accurate to
/// ~1e-13 relative on the range used here.
pub fn gamma_fn(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection for completeness; not hit by the Bessel series.
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Poisson-solve oracle for the mean exit time, by finite differences on the
/// radial equation `½(u'' + (d−1)/r·u') = −1`, `u(R) = 0`; independent check
/// of [`bm_exit_moment`].
pub fn fd_exit_moment(d: usize, big_r: f64, r_eval: f64, n: usize) -> f64 {
    // Solve on [0, R] with a regularity condition at 0: u'(0) = 0 handled by
    // the symmetric stencil with u_{-1} = u_1. Thomas solve of the
    // tridiagonal system.
    let h = big_r / n as f64;
    let dim = d as f64;
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![-2.0; n]; // (u'' + (d−1)/r u') = −2
    for i in 0..n {
        let r = i as f64 * h;
        if i == 0 {
            // u'' ≈ 2(u_1 − u_0)/h²; the first-order term vanishes by
            // symmetry but carries a factor d from the limit (d−1)/r·u' →
            // (d−1)·u''.
            diag[0] = -2.0 * dim / (h * h);
            sup[0] = 2.0 * dim / (h * h);
        } else {
            let c = (dim - 1.0) / (2.0 * r * h);
            sub[i] = 1.0 / (h * h) - c;
            diag[i] = -2.0 / (h * h);
            sup[i] = 1.0 / (h * h) + c;
        }
    }
    // Right boundary: u_n = 0 (absorbed into rhs of the last row).
    // Thomas algorithm.
    for i in 1..n {
        let m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    let mut u = vec![0.0; n];
    u[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = (rhs[i] - sup[i] * u[i + 1]) / diag[i];
    }
    let idx = (r_eval / h).round() as usize;
    u[idx.min(n - 1)]
}

/// Radial Dirichlet eigenvalue of ½Δ on `B_R` by inverse power iteration on
/// a conservative finite-difference matrix; independent check of
/// [`bm_confinement_rate`].
///
/// Nodes sit at `r_i = (i+½)h` with fluxes through faces `r = i·h`, so the
/// zero-flux face at the origin encodes the regularity condition without ever
/// dividing by `r = 0`; the Dirichlet value sits exactly on the outer face.
pub fn fd_confinement_rate(d: usize, big_r: f64, m: usize) -> f64 {
    let h = big_r / m as f64;
    let dm = d as f64;
    let face = |j: usize| -> f64 { (j as f64 * h).powf(dm - 1.0) };
    let node_w = |i: usize| -> f64 { ((i as f64 + 0.5) * h).powf(dm - 1.0) };

    // Tridiagonal −L with L u = r^{1−d}(r^{d−1} u')'; ghost u_m = −u_{m−1}
    // makes u vanish at the outer face.
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    for i in 0..m {
        let wi = node_w(i);
        let (f_in, f_out) = (face(i), face(i + 1));
        if i > 0 {
            sub[i] = -f_in / (wi * h * h);
        }
        if i + 1 < m {
            diag[i] = (f_in + f_out) / (wi * h * h);
            sup[i] = -f_out / (wi * h * h);
        } else {
            diag[i] = (f_in + 2.0 * f_out) / (wi * h * h);
        }
    }

    let mut v = vec![1.0; m];
    for _ in 0..60 {
        // Solve (−L) w = v by the Thomas algorithm on a scratch copy.
        let mut dd = diag.clone();
        let mut rr = v.clone();
        for i in 1..m {
            let f = sub[i] / dd[i - 1];
            dd[i] -= f * sup[i - 1];
            rr[i] -= f * rr[i - 1];
        }
        let mut w = vec![0.0; m];
        w[m - 1] = rr[m - 1] / dd[m - 1];
        for i in (0..m - 1).rev() {
            w[i] = (rr[i] - sup[i] * w[i + 1]) / dd[i];
        }
        let norm = la::norm(&w);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    // Rayleigh quotient in the r^{d−1}-weighted inner product.
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..m {
        let lv = diag[i] * v[i]
            + if i > 0 { sub[i] * v[i - 1] } else { 0.0 }
            + if i + 1 < m { sup[i] * v[i + 1] } else { 0.0 };
        num += node_w(i) * v[i] * lv;
        den += node_w(i) * v[i] * v[i];
    }
    num / den / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hitting_probability_values() {
        // Boundary cases.
        assert_relative_eq!(bm_hitting_prob(3, 0.25, 1.0, 0.25).unwrap(), 1.0);
        assert_relative_eq!(bm_hitting_prob(3, 0.25, 1.0, 1.0).unwrap(), 0.0);
        // d = 3, r = 0.25, R = 1, ρ = 0.5 → (2 − 1)/(4 − 1) = 1/3.
        assert_relative_eq!(
            bm_hitting_prob(3, 0.25, 1.0, 0.5).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-14
        );
        // d = 2 log variant is monotone in ρ.
        let a = bm_hitting_prob(2, 0.2, 1.0, 0.4).unwrap();
        let b = bm_hitting_prob(2, 0.2, 1.0, 0.6).unwrap();
        assert!(a > b && b > 0.0);
        assert!(bm_hitting_prob(3, 0.5, 1.0, 0.4).is_err());
    }

    #[test]
    fn exit_moment_and_scaling() {
        assert_relative_eq!(bm_exit_moment(2, 1.0, 1.0), 0.0);
        assert_relative_eq!(bm_exit_moment(2, 1.0, 0.0), 0.5);
        // Parabolic scaling: (cR, cr) ↦ c²·value.
        let c: f64 = 3.0;
        assert_relative_eq!(
            bm_exit_moment(3, c * 1.0, c * 0.5),
            c * c * bm_exit_moment(3, 1.0, 0.5),
            epsilon = 1e-12
        );
    }

    #[test]
    fn exit_moment_cross_checked_by_finite_differences() {
        // The FD solution of the radial Poisson problem is exact for the
        // quadratic solution up to roundoff; use it as the independent route.
        for (d, r) in [(2usize, 0.0), (2, 0.6), (3, 0.3)] {
            let fd = fd_exit_moment(d, 1.0, r, 2000);
            let cf = bm_exit_moment(d, 1.0, r);
            assert_relative_eq!(fd, cf, max_relative = 1e-6);
        }
    }

    #[test]
    fn resolvent_kernel_values_and_normalization() {
        // λ = 1/2, r = 1 → e^{-1}/(2π).
        let v = bm_resolvent_kernel(0.5, 1.0).unwrap();
        assert_relative_eq!(v, (-1.0f64).exp() / (2.0 * std::f64::consts::PI), epsilon = 1e-14);
        assert!(bm_resolvent_kernel(0.5, 0.0).is_err());
        // Monotone decay.
        assert!(bm_resolvent_kernel(0.5, 2.0).unwrap() < v);
        // ∫ g_λ = 1/λ by radial quadrature (independent of the closed form
        // for the ball mass).
        let lambda = 0.7;
        let mut sum = 0.0;
        let dr = 1e-4;
        let mut r = dr / 2.0;
        while r < 40.0 {
            sum += bm_resolvent_kernel(lambda, r).unwrap()
                * 4.0
                * std::f64::consts::PI
                * r
                * r
                * dr;
            r += dr;
        }
        assert_relative_eq!(sum, 1.0 / lambda, max_relative = 1e-6);
        // Ball-mass closed form agrees with quadrature over B_1.
        let mut ball = 0.0;
        let mut r = dr / 2.0;
        while r < 1.0 {
            ball += bm_resolvent_kernel(lambda, r).unwrap()
                * 4.0
                * std::f64::consts::PI
                * r
                * r
                * dr;
            r += dr;
        }
        assert_relative_eq!(ball, bm_resolvent_ball_mass(lambda, 1.0), max_relative = 1e-6);
    }

    #[test]
    fn center_occupation_value() {
        // R = 1, r = 1/2 → 1/4 − 1/12 = 1/6.
        assert_relative_eq!(bm_center_occupation_d3(1.0, 0.5), 1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn bessel_zeros_match_reference_values() {
        // j_{0,1} = 2.404825557695773, j_{1/2,1} = π, j_{1,1} = 3.8317059702.
        assert_relative_eq!(first_bessel_zero(0.0).unwrap(), 2.404825557695773, epsilon = 1e-10);
        assert_relative_eq!(first_bessel_zero(0.5).unwrap(), std::f64::consts::PI, epsilon = 1e-10);
        assert_relative_eq!(first_bessel_zero(1.0).unwrap(), 3.831705970207512, epsilon = 1e-10);
    }

    #[test]
    fn confinement_rates() {
        // d = 2, R = 1 → j₀₁²/2 ≈ 2.8916; d = 3 → π²/2.
        assert_relative_eq!(bm_confinement_rate(2, 1.0).unwrap(), 2.891592980689782, epsilon = 1e-9);
        assert_relative_eq!(
            bm_confinement_rate(3, 1.0).unwrap(),
            std::f64::consts::PI.powi(2) / 2.0,
            epsilon = 1e-9
        );
        // R-scaling: rate at R = 2 is a quarter of the rate at R = 1.
        let r1 = bm_confinement_rate(2, 1.0).unwrap();
        let r2 = bm_confinement_rate(2, 2.0).unwrap();
        assert_relative_eq!(r2, r1 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn confinement_rate_cross_checked_by_fd_eigen_solve() {
        for d in [2usize, 3] {
            let fd = fd_confinement_rate(d, 1.0, 4000);
            let cf = bm_confinement_rate(d, 1.0).unwrap();
            assert_relative_eq!(fd, cf, max_relative = 1e-6);
        }
    }

    #[test]
    fn gamma_function_spot_checks() {
        assert_relative_eq!(gamma_fn(1.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(gamma_fn(5.0), 24.0, max_relative = 1e-12);
        assert_relative_eq!(gamma_fn(0.5), std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }
}
