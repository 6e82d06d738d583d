//! Scale-covariant quadrature for ball averages of densities.
//!
//! Nodes for a ball are the unit-ball nodes scaled by the radius and shifted
//! to the center. Radial shells are geometric with a fixed count per octave,
//! so the node set of the half ball is exactly the node set of the ball with
//! the shell index shifted by one octave and weights scaled by `2^{-d}`.
//! Consequences used by the analysis layer:
//!
//! * averages of constants are exact,
//! * masses satisfy `mass(B) ≥ mass(½B)` for nonnegative densities up to the
//!   core term (relative weight `2^{-7d}`),
//! * the node fraction inside any concentric half-radius ball is exactly
//!   `2^{-d}` of the weight, which makes indicator averages exact.

use std::sync::OnceLock;

use crate::la;

const SHELLS_PER_OCTAVE: usize = 16;
const OCTAVES: usize = 7;
const N_SHELLS: usize = SHELLS_PER_OCTAVE * OCTAVES;
const ANGULAR_2D: usize = 64;
const ANGULAR_3D: usize = 128;

/// Precomputed unit-ball quadrature nodes for one dimension.
#[derive(Debug, Clone)]
pub struct BallQuad {
    dim: usize,
    /// Unit directions, flat `n_dirs × dim`.
    directions: Vec<f64>,
    /// Shell evaluation radii (midpoints of geometric shells).
    radii: Vec<f64>,
    /// Shell weights `r_j^d − r_{j+1}^d`, summing with the core to 1.
    weights: Vec<f64>,
    /// Weight of the residual core ball, evaluated at the center.
    core_weight: f64,
}

static QUAD_2D: OnceLock<BallQuad> = OnceLock::new();
static QUAD_3D: OnceLock<BallQuad> = OnceLock::new();
static QUAD_OTHER: OnceLock<std::sync::Mutex<std::collections::HashMap<usize, BallQuad>>> =
    OnceLock::new();

impl BallQuad {
    pub fn for_dim(dim: usize) -> BallQuad {
        match dim {
            2 => QUAD_2D.get_or_init(|| BallQuad::build(2)).clone(),
            3 => QUAD_3D.get_or_init(|| BallQuad::build(3)).clone(),
            _ => {
                let map = QUAD_OTHER.get_or_init(Default::default);
                let mut guard = map.lock().unwrap();
                guard.entry(dim).or_insert_with(|| BallQuad::build(dim)).clone()
            }
        }
    }

    fn build(dim: usize) -> BallQuad {
        let directions = match dim {
            2 => {
                let mut v = Vec::with_capacity(ANGULAR_2D * 2);
                for k in 0..ANGULAR_2D {
                    let th = (k as f64 + 0.5) / ANGULAR_2D as f64 * std::f64::consts::TAU;
                    v.push(th.cos());
                    v.push(th.sin());
                }
                v
            }
            3 => fibonacci_sphere(ANGULAR_3D),
            d => {
                // Low-discrepancy directions from a seeded normal pick; ball
                // averages in d ∉ {2,3} are only used by auxiliary checks.
                let mut v = Vec::with_capacity(ANGULAR_3D * d);
                let mut rng = crate::simulate::PathRng::new(0x9e3779b97f4a7c15, d as u64);
                for _ in 0..ANGULAR_3D {
                    let dir: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
                    let n = la::norm(&dir);
                    v.extend(dir.iter().map(|c| c / n));
                }
                v
            }
        };
        let mut radii = Vec::with_capacity(N_SHELLS);
        let mut weights = Vec::with_capacity(N_SHELLS);
        let edge = |j: usize| -> f64 { 2f64.powf(-(j as f64) / SHELLS_PER_OCTAVE as f64) };
        for j in 0..N_SHELLS {
            let (outer, inner) = (edge(j), edge(j + 1));
            radii.push(0.5 * (outer + inner));
            weights.push(outer.powi(dim as i32) - inner.powi(dim as i32));
        }
        let core_weight = edge(N_SHELLS).powi(dim as i32);
        BallQuad {
            dim,
            directions,
            radii,
            weights,
            core_weight,
        }
    }

    fn n_dirs(&self) -> usize {
        self.directions.len() / self.dim
    }

    /// Volume average of `g` over the ball.
    pub fn average(&self, g: &mut impl FnMut(&[f64]) -> f64, center: &[f64], radius: f64) -> f64 {
        let d = self.dim;
        let nd = self.n_dirs();
        let mut point = vec![0.0f64; d];
        let mut acc = 0.0;
        for (r, w) in self.radii.iter().zip(&self.weights) {
            let mut shell = 0.0;
            for dir in 0..nd {
                for k in 0..d {
                    point[k] = center[k] + radius * r * self.directions[dir * d + k];
                }
                shell += g(&point);
            }
            acc += w * shell / nd as f64;
        }
        acc += self.core_weight * g(center);
        acc
    }
}

/// Quasi-uniform unit vectors on the 2-sphere (Fibonacci lattice).
fn fibonacci_sphere(n: usize) -> Vec<f64> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v = Vec::with_capacity(n * 3);
    for k in 0..n {
        let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = std::f64::consts::TAU * (k as f64 / golden).fract();
        v.push(r * phi.cos());
        v.push(r * phi.sin());
        v.push(z);
    }
    v
}

/// `(1/|B|) ∫_B g`.
pub fn ball_average(g: impl Fn(&[f64]) -> f64, center: &[f64], radius: f64) -> f64 {
    let mut g = g;
    BallQuad::for_dim(center.len()).average(&mut g, center, radius)
}

/// `∫_B g = |B| · avg`, with the exact ball volume.
pub fn ball_mass(g: impl Fn(&[f64]) -> f64, center: &[f64], radius: f64) -> f64 {
    let d = center.len();
    la::unit_ball_volume(d) * radius.powi(d as i32) * ball_average(g, center, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_average_is_exact() {
        for d in [2usize, 3] {
            let c = vec![0.3; d];
            let avg = ball_average(|_| 4.25, &c, 0.7);
            assert_relative_eq!(avg, 4.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn half_ball_indicator_fraction_is_exactly_two_to_minus_d() {
        for d in [2usize, 3] {
            let center = vec![0.1; d];
            let r = 0.5;
            let ind = |x: &[f64]| {
                if la::dist(x, &center) <= r / 2.0 {
                    1.0
                } else {
                    0.0
                }
            };
            let avg = ball_average(ind, &center, r);
            assert_relative_eq!(avg, 0.5f64.powi(d as i32), epsilon = 1e-12);
        }
    }

    #[test]
    fn smooth_average_matches_analytic_value() {
        // avg over B_r(0) of |x|² in d dimensions is d/(d+2)·r².
        for d in [2usize, 3] {
            let c = vec![0.0; d];
            let avg = ball_average(la::norm_sq, &c, 0.8);
            let want = d as f64 / (d as f64 + 2.0) * 0.64;
            assert_relative_eq!(avg, want, max_relative = 5e-3);
        }
    }

    #[test]
    fn mass_monotone_under_halving_for_nonnegative_density() {
        let c = vec![0.2, -0.1, 0.05];
        let g = |x: &[f64]| (1.0 / (la::dist(x, &[0.0, 0.0, 0.0]) + 0.05)).min(50.0);
        let big = ball_mass(g, &c, 0.4);
        let half = ball_mass(g, &c, 0.2);
        assert!(big >= half * (1.0 - 1e-9), "{big} vs {half}");
    }

    #[test]
    fn mass_of_unit_density_is_ball_volume() {
        let m = ball_mass(|_| 1.0, &[0.0, 0.0, 0.0], 0.5);
        assert_relative_eq!(
            m,
            4.0 / 3.0 * std::f64::consts::PI * 0.125,
            epsilon = 1e-12
        );
    }
}
