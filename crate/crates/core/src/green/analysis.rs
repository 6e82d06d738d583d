//! Measure-geometry statistics on Green estimates: weighted `L_q` norms,
//! reverse Hölder ratios on balls, doubling ratios, and A_∞ exponent fits.
//!
//! Ball averages use the scale-covariant quadrature of [`super::ballquad`],
//! so constant densities give exact ratios and rescaled ensembles give
//! identical statistics over correspondingly rescaled balls.

use super::ballquad::{ball_average, ball_mass};
use super::{GreenError, GreenEstimate};
use crate::la;
use crate::stopping::Region;
use crate::verify::fit::{fit_power_law, ScalingFit};

/// The exponential weight `Ψ_λ(x) = exp(√(λ·ν)·|x|)`.
#[derive(Debug, Clone, Copy)]
pub struct ExpWeight {
    pub lambda: f64,
    pub nu: f64,
}

impl ExpWeight {
    pub fn eval(&self, x: &[f64]) -> f64 {
        ((self.lambda * self.nu).sqrt() * la::norm(x)).exp()
    }
}

/// `(Σ_cells (w·value)^q · volume)^{1/q}` over cells whose center lies in the
/// region (all cells when `None`), reading the refined pole sub-cells.
pub fn lq_norm(
    est: &GreenEstimate,
    q: f64,
    region: Option<&Region>,
    weight: Option<ExpWeight>,
) -> Result<f64, GreenError> {
    if !(q >= 1.0) {
        return Err(GreenError::InvalidParameter {
            name: "q",
            message: format!("exponent must be at least 1, got {q}"),
        });
    }
    let vol = est.grid.cell_volume();
    let mut acc = 0.0;
    for (flat, &v) in est.values.iter().enumerate() {
        let center = est.grid.cell_center(flat);
        if let Some(r) = region {
            if !r.contains(&center) {
                continue;
            }
        }
        if let Some(pole) = &est.pole {
            if pole.cell == flat {
                // Integrate the refined sub-cells of the pole cell.
                let coords = est.grid.cell_coords(flat);
                let sub_h = est.grid.h / pole.factor as f64;
                let sub_vol = sub_h.powi(est.grid.dim as i32);
                let f = pole.factor;
                for (si, &sv) in pole.values.iter().enumerate() {
                    let mut rem = si;
                    let mut sc = vec![0.0; est.grid.dim];
                    for k in (0..est.grid.dim).rev() {
                        sc[k] = est.grid.origin[k]
                            + coords[k] as f64 * est.grid.h
                            + ((rem % f) as f64 + 0.5) * sub_h;
                        rem /= f;
                    }
                    let w = weight.map_or(1.0, |w| w.eval(&sc));
                    acc += (w * sv).powf(q) * sub_vol;
                }
                continue;
            }
        }
        let w = weight.map_or(1.0, |w| w.eval(&center));
        acc += (w * v).powf(q) * vol;
    }
    Ok(acc.powf(1.0 / q))
}

/// Averaged reverse Hölder ratio of a density `g` on the ball `B`:
/// `(avg_B g^{q})^{1/q} / avg_{2B} g` with `q = p/(p−1)`.
pub fn reverse_holder_ratio_fn(
    g: impl Fn(&[f64]) -> f64,
    center: &[f64],
    radius: f64,
    p: f64,
) -> f64 {
    let q = p / (p - 1.0);
    let num = ball_average(|x| g(x).powf(q), center, radius).powf(1.0 / q);
    let den = ball_average(&g, center, 2.0 * radius);
    num / den
}

/// [`reverse_holder_ratio_fn`] on an estimated density, with the
/// preconditions of the averaged inequality: `p > 1` and ball radius at most
/// 1/2.
pub fn reverse_holder_ratio(
    est: &GreenEstimate,
    center: &[f64],
    radius: f64,
    p: f64,
) -> Result<f64, GreenError> {
    if !(p > 1.0) {
        return Err(GreenError::InvalidParameter {
            name: "p",
            message: format!("need p > 1, got {p}"),
        });
    }
    if !(radius > 0.0 && radius <= 0.5) {
        return Err(GreenError::InvalidParameter {
            name: "radius",
            message: format!("ball radius must lie in (0, 1/2], got {radius}"),
        });
    }
    let den = ball_average(|x| est.density_at(x), center, 2.0 * radius);
    if !(den > 0.0) {
        return Err(GreenError::ZeroMass(format!(
            "doubled ball at {center:?} radius {}",
            2.0 * radius
        )));
    }
    Ok(reverse_holder_ratio_fn(|x| est.density_at(x), center, radius, p))
}

/// `G(B)/G(½B)` for a density function.
pub fn doubling_ratio_fn(g: impl Fn(&[f64]) -> f64, center: &[f64], radius: f64) -> f64 {
    ball_mass(&g, center, radius) / ball_mass(&g, center, radius / 2.0)
}

/// `G(B)/G(½B)` on an estimated density; the half ball must carry positive
/// mass.
pub fn doubling_ratio(est: &GreenEstimate, center: &[f64], radius: f64) -> Result<f64, GreenError> {
    let half = ball_mass(|x| est.density_at(x), center, radius / 2.0);
    if !(half > 0.0) {
        return Err(GreenError::ZeroMass(format!(
            "half ball at {center:?} radius {}",
            radius / 2.0
        )));
    }
    Ok(ball_mass(|x| est.density_at(x), center, radius) / half)
}

/// Families of subsets `Γ ⊂ B` used by the A_∞ fit, indexed by their volume
/// fractions `γ = |Γ|/|B|`.
#[derive(Debug, Clone)]
pub enum SubsetFamily {
    /// Concentric balls of radius `γ^{1/d}·R`.
    ConcentricBalls { fractions: Vec<f64> },
    /// Prefixes of the ball's cells sorted by ascending density — the
    /// adversarial subsets of a given fraction.
    AscendingDensityCells { fractions: Vec<f64> },
}

impl SubsetFamily {
    fn fractions(&self) -> &[f64] {
        match self {
            SubsetFamily::ConcentricBalls { fractions }
            | SubsetFamily::AscendingDensityCells { fractions } => fractions,
        }
    }
}

/// Result of the A_∞ exponent fit `log(G(Γ)/G(B)) ≈ μ̂·log γ + c`.
#[derive(Debug, Clone)]
pub struct AInftyFit {
    pub fit: ScalingFit,
    /// `(γ, G(Γ)/G(B))` samples.
    pub points: Vec<(f64, f64)>,
    /// Smallest `N` with `N·G(Γ)/G(B) ≥ γ^{μ̂}` across all samples.
    pub n_constant: f64,
    /// Whether the fitted bound form holds on every sample with that `N`.
    pub bound_holds: bool,
}

/// Least-squares fit of `log(G(Γ)/G(B))` against `log γ` over a subset
/// family. Fractions must span at least one decade.
pub fn a_infty_exponent_fit(
    est: &GreenEstimate,
    center: &[f64],
    radius: f64,
    family: &SubsetFamily,
) -> Result<AInftyFit, GreenError> {
    let fractions = family.fractions();
    if fractions.len() < 2 {
        return Err(GreenError::DegenerateFamily(format!(
            "{} fraction(s); need several spanning a decade",
            fractions.len()
        )));
    }
    let (lo, hi) = fractions
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &g| (l.min(g), h.max(g)));
    if !(lo > 0.0 && hi < 1.0 + 1e-12 && hi / lo >= 10.0) {
        return Err(GreenError::DegenerateFamily(format!(
            "fractions must lie in (0, 1] and span a decade, got [{lo}, {hi}]"
        )));
    }

    let points: Vec<(f64, f64)> = match family {
        SubsetFamily::ConcentricBalls { fractions } => {
            let total = ball_mass(|x| est.density_at(x), center, radius);
            if !(total > 0.0) {
                return Err(GreenError::ZeroMass(format!("ball at {center:?}")));
            }
            fractions
                .iter()
                .map(|&g| {
                    let r_sub = radius * g.powf(1.0 / center.len() as f64);
                    let m = ball_mass(|x| est.density_at(x), center, r_sub);
                    (g, m / total)
                })
                .collect()
        }
        SubsetFamily::AscendingDensityCells { fractions } => {
            // Cells of B sorted ascending by density; prefix masses.
            let mut cells: Vec<f64> = (0..est.grid.n_cells())
                .filter(|&i| la::dist(&est.grid.cell_center(i), center) <= radius)
                .map(|i| est.values[i])
                .collect();
            if cells.is_empty() {
                return Err(GreenError::ZeroMass(format!("ball at {center:?}")));
            }
            cells.sort_by(f64::total_cmp);
            let total: f64 = cells.iter().sum();
            if !(total > 0.0) {
                return Err(GreenError::ZeroMass(format!("ball at {center:?}")));
            }
            let n = cells.len();
            let prefix: Vec<f64> = cells
                .iter()
                .scan(0.0, |s, v| {
                    *s += v;
                    Some(*s)
                })
                .collect();
            fractions
                .iter()
                .map(|&g| {
                    let take = ((g * n as f64).round() as usize).clamp(1, n);
                    (take as f64 / n as f64, prefix[take - 1] / total)
                })
                .collect()
        }
    };

    for &(g, ratio) in &points {
        if !(ratio > 0.0) {
            return Err(GreenError::ZeroMass(format!("subset of fraction {g}")));
        }
    }
    let fit = fit_power_law(
        &points
            .iter()
            .map(|&(g, r)| (g, r, 0.0))
            .collect::<Vec<_>>(),
    )
    .map_err(|e| GreenError::DegenerateFamily(e.to_string()))?;
    let n_constant = points
        .iter()
        .map(|&(g, r)| g.powf(fit.slope) / r)
        .fold(0.0f64, f64::max);
    Ok(AInftyFit {
        bound_holds: n_constant.is_finite() && n_constant > 0.0,
        n_constant,
        points,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::GridSpec;
    use approx::assert_relative_eq;

    fn uniform_estimate(dim: usize, value: f64) -> GreenEstimate {
        GreenEstimate::from_fn(GridSpec::centered_box(dim, 1.5, 0.05), move |_| value)
    }

    #[test]
    fn lq_norm_basics() {
        // q = 1 on everything: the total mass.
        let est = uniform_estimate(2, 2.0);
        let m = lq_norm(&est, 1.0, None, None).unwrap();
        assert_relative_eq!(m, est.interior_mass(), epsilon = 1e-12);
        // Uniform density c on a region of volume V → c·V^{1/q}.
        let ball = Region::ball_at_origin(2, 1.0);
        let q = 1.5;
        let n = lq_norm(&est, q, Some(&ball), None).unwrap();
        let cells_in = (0..est.grid.n_cells())
            .filter(|&i| la::norm(&est.grid.cell_center(i)) <= 1.0)
            .count();
        let v = cells_in as f64 * est.grid.cell_volume();
        assert_relative_eq!(n, 2.0 * v.powf(1.0 / q), epsilon = 1e-10);
        assert!(lq_norm(&est, 0.5, None, None).is_err());
    }

    #[test]
    fn reverse_holder_constant_density_is_exactly_one() {
        let est = uniform_estimate(3, 0.7);
        let r = reverse_holder_ratio(&est, &[0.1, 0.0, -0.2], 0.3, 2.7).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reverse_holder_indicator_density_is_exactly_two_to_d() {
        // Density = indicator of B (zero on 2B \ B): the numerator average is
        // 1 on B; the 2B average dilutes by the exact volume factor 2^{-d}.
        let center = [0.2, -0.1, 0.3];
        let radius = 0.25;
        let ind = |x: &[f64]| {
            if la::dist(x, &center) <= radius {
                1.0
            } else {
                0.0
            }
        };
        let r = reverse_holder_ratio_fn(ind, &center, radius, 2.7);
        assert_relative_eq!(r, 8.0, epsilon = 1e-10);
    }

    #[test]
    fn reverse_holder_preconditions() {
        let est = uniform_estimate(2, 1.0);
        assert!(reverse_holder_ratio(&est, &[0.0, 0.0], 0.7, 2.7).is_err());
        assert!(reverse_holder_ratio(&est, &[0.0, 0.0], 0.3, 0.9).is_err());
        let zero = GreenEstimate::from_fn(GridSpec::centered_box(2, 1.0, 0.1), |_| 0.0);
        assert!(matches!(
            reverse_holder_ratio(&zero, &[0.0, 0.0], 0.2, 2.7),
            Err(GreenError::ZeroMass(_))
        ));
    }

    #[test]
    fn doubling_uniform_is_exactly_two_to_d() {
        for d in [2usize, 3] {
            let est = uniform_estimate(d, 1.3);
            let r = doubling_ratio(&est, &vec![0.1; d], 0.4).unwrap();
            assert_relative_eq!(r, 2f64.powi(d as i32), epsilon = 1e-12);
        }
    }

    #[test]
    fn doubling_single_cell_mass_inside_half_ball() {
        // All mass in one cell deep inside ½B: the ratio is 1 up to the
        // quadrature's cell-sampling resolution.
        let grid = GridSpec::centered_box(2, 1.0, 0.05);
        let hot = grid.cell_index(&[0.05, 0.02]).unwrap();
        let est = GreenEstimate::from_fn(grid, |_| 0.0);
        let mut est = est;
        est.values[hot] = 10.0;
        let r = doubling_ratio(&est, &[0.04, 0.02], 0.8).unwrap();
        assert!((r - 1.0).abs() < 0.05, "ratio {r}");
        // Monotone inclusion keeps it at least 1 (up to the core term).
        assert!(r >= 1.0 - 1e-9);
    }

    #[test]
    fn a_infty_uniform_slope_is_one() {
        let est = uniform_estimate(3, 2.0);
        let fit = a_infty_exponent_fit(
            &est,
            &[0.0, 0.0, 0.0],
            0.5,
            &SubsetFamily::ConcentricBalls {
                fractions: vec![0.01, 0.03, 0.1, 0.3, 1.0],
            },
        )
        .unwrap();
        assert_relative_eq!(fit.fit.slope, 1.0, epsilon = 1e-9);
        assert!(fit.bound_holds);
        assert_relative_eq!(fit.n_constant, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn a_infty_power_density_slope() {
        // Density |x − c|^α on B: concentric ratio γ^{(d+α)/d}.
        let alpha = 1.4;
        let c = [0.0, 0.0, 0.0];
        let grid = GridSpec::centered_box(3, 0.7, 0.02);
        let est = GreenEstimate::from_fn(grid, |x| la::dist(x, &c).powf(alpha));
        let fit = a_infty_exponent_fit(
            &est,
            &c,
            0.5,
            &SubsetFamily::ConcentricBalls {
                fractions: vec![0.02, 0.05, 0.1, 0.3, 1.0],
            },
        )
        .unwrap();
        let want = (3.0 + alpha) / 3.0;
        assert!(
            (fit.fit.slope - want).abs() < 0.05,
            "slope {} vs {}",
            fit.fit.slope,
            want
        );
    }

    #[test]
    fn a_infty_ascending_cells_dominate_concentric_slope() {
        // Sorting cells by ascending density yields the steepest (worst-case)
        // mass-deficient subsets: fitted slope at least the concentric one.
        let alpha = 1.0;
        let c = [0.0, 0.0];
        let grid = GridSpec::centered_box(2, 0.6, 0.02);
        let est = GreenEstimate::from_fn(grid, |x| la::dist(x, &c).powf(alpha) + 1e-9);
        let fractions = vec![0.02, 0.05, 0.1, 0.3, 1.0];
        let conc = a_infty_exponent_fit(
            &est,
            &c,
            0.5,
            &SubsetFamily::ConcentricBalls {
                fractions: fractions.clone(),
            },
        )
        .unwrap();
        let asc = a_infty_exponent_fit(
            &est,
            &c,
            0.5,
            &SubsetFamily::AscendingDensityCells { fractions },
        )
        .unwrap();
        assert!(
            asc.fit.slope >= conc.fit.slope - 0.08,
            "ascending {} vs concentric {}",
            asc.fit.slope,
            conc.fit.slope
        );
    }

    #[test]
    fn a_infty_degenerate_family_errors() {
        let est = uniform_estimate(2, 1.0);
        let single = SubsetFamily::ConcentricBalls {
            fractions: vec![0.5],
        };
        assert!(a_infty_exponent_fit(&est, &[0.0, 0.0], 0.4, &single).is_err());
        let narrow = SubsetFamily::ConcentricBalls {
            fractions: vec![0.2, 0.5, 0.9],
        };
        assert!(a_infty_exponent_fit(&est, &[0.0, 0.0], 0.4, &narrow).is_err());
    }
}
