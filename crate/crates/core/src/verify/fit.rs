//! Weighted least-squares fitting of power laws on log-log data.

use super::VerifyError;

/// Result of a log-log linear fit `ln y = slope·ln x + intercept`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    /// 95% confidence interval on the slope.
    pub slope_ci: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

impl ScalingFit {
    pub fn ci_contains(&self, value: f64) -> bool {
        value >= self.slope_ci.0 && value <= self.slope_ci.1
    }
}

/// Fit `y = C·x^s` by weighted least squares on `(ln x, ln y)`.
///
/// Points are `(x, y, se_y)` with `x, y > 0`; the log-scale weight of a point
/// is `1/(se_y/y)²`. Points with zero standard error count as exact (tiny
/// floor); when every point is exact the fit degenerates to ordinary least
/// squares. The slope standard error is the WLS one, inflated by
/// `max(1, χ²/dof)` so that under-stated input errors widen the interval.
pub fn fit_power_law(points: &[(f64, f64, f64)]) -> Result<ScalingFit, VerifyError> {
    if points.len() < 3 {
        return Err(VerifyError::Fit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y, se) in points {
        if !(x > 0.0) || !(y > 0.0) {
            return Err(VerifyError::Fit(format!(
                "nonpositive datum (x = {x}, y = {y}) cannot be fit on log scales"
            )));
        }
        if se < 0.0 || !se.is_finite() {
            return Err(VerifyError::Fit(format!("bad standard error {se}")));
        }
    }

    let logs: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|&(x, y, se)| (x.ln(), y.ln(), (se / y).max(1e-12)))
        .collect();

    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, sig) in &logs {
        let w = 1.0 / (sig * sig);
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let delta = s * sxx - sx * sx;
    if !delta.is_finite() || delta <= 1e-12 * (s * sxx).abs() {
        return Err(VerifyError::Fit("abscissae are degenerate".into()));
    }
    let slope = (s * sxy - sx * sy) / delta;
    let intercept = (sxx * sy - sx * sxy) / delta;

    let mut chi2 = 0.0;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mean_y = sy / s;
    for &(x, y, sig) in &logs {
        let w = 1.0 / (sig * sig);
        let r = y - (slope * x + intercept);
        chi2 += (r / sig) * (r / sig);
        ss_res += w * r * r;
        ss_tot += w * (y - mean_y) * (y - mean_y);
    }
    let dof = (points.len() - 2) as f64;
    let inflate = (chi2 / dof).max(1.0);
    let slope_se = (s / delta * inflate).sqrt();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(ScalingFit {
        slope,
        intercept,
        slope_se,
        slope_ci: (slope - 1.96 * slope_se, slope + 1.96 * slope_se),
        r_squared,
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_cubic_is_recovered() {
        // y = 2x³ at x ∈ {1, 2, 4}: slope 3, intercept ln 2, no residual.
        let pts = [(1.0, 2.0, 0.0), (2.0, 16.0, 0.0), (4.0, 128.0, 0.0)];
        let fit = fit_power_law(&pts).unwrap();
        assert_relative_eq!(fit.slope, 3.0, epsilon = 1e-9);
        assert_relative_eq!(fit.intercept, 2f64.ln(), epsilon = 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert!(fit.ci_contains(3.0));
    }

    #[test]
    fn too_few_points_or_bad_data_error() {
        assert!(fit_power_law(&[(1.0, 1.0, 0.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0, 0.0), (2.0, 2.0, 0.0)]).is_err());
        assert!(fit_power_law(&[(1.0, -1.0, 0.0), (2.0, 2.0, 0.0), (3.0, 3.0, 0.0)]).is_err());
        // Degenerate abscissae.
        assert!(fit_power_law(&[(2.0, 1.0, 0.0), (2.0, 2.0, 0.0), (2.0, 3.0, 0.0)]).is_err());
    }

    #[test]
    fn noisy_power_law_coverage_calibration() {
        // Synthetic y = 5 x^1.7 with 5% relative noise: the true slope must
        // land inside the fitted 95% CI in at least 90 of 100 seeded
        // repetitions.
        use crate::simulate::PathRng;
        let xs = [0.5f64, 1.0, 2.0, 4.0, 8.0, 16.0];
        let mut covered = 0;
        for rep in 0..100u64 {
            let mut rng = PathRng::new(0xFEED, rep);
            let pts: Vec<(f64, f64, f64)> = xs
                .iter()
                .map(|&x| {
                    let y = 5.0 * x.powf(1.7);
                    let noisy = y * (1.0 + 0.05 * rng.standard_normal());
                    (x, noisy, 0.05 * y)
                })
                .collect();
            let fit = fit_power_law(&pts).unwrap();
            covered += u32::from(fit.ci_contains(1.7));
        }
        assert!(covered >= 90, "covered {covered}/100");
    }
}
