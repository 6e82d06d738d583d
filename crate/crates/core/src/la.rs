//! Small dense-vector helpers shared by the hot loops. Points are plain
//! `&[f64]` slices; nothing here allocates.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// Surface measure of the unit sphere in `d` dimensions, `2 π^{d/2} / Γ(d/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    // Integer and half-integer gamma values only; d ≥ 1.
    let d = d as f64;
    2.0 * std::f64::consts::PI.powf(d / 2.0) / gamma_half_integer(d / 2.0)
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    unit_sphere_area(d) / d as f64
}

/// Γ(x) for x a positive multiple of 1/2 (exact recursion from Γ(1/2), Γ(1)).
fn gamma_half_integer(x: f64) -> f64 {
    assert!(x > 0.0 && (2.0 * x).fract() == 0.0);
    let mut v = if x.fract() == 0.0 {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut t = if x.fract() == 0.0 { 1.0 } else { 0.5 };
    while t + 0.5 < x {
        v *= t;
        t += 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas_match_known_values() {
        assert_relative_eq!(unit_sphere_area(2), 2.0 * std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(
            unit_ball_volume(3),
            4.0 / 3.0 * std::f64::consts::PI,
            epsilon = 1e-12
        );
        // d = 4: area 2π², volume π²/2
        assert_relative_eq!(
            unit_sphere_area(4),
            2.0 * std::f64::consts::PI.powi(2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn vector_helpers() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(dist(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }
}
