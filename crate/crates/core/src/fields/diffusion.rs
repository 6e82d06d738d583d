//! Uniformly elliptic diffusion matrices `a(x)` and their symmetric square
//! roots `σ(x)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{check_dim, FieldError};

/// Tolerance on `|a_ij - a_ji|` before the symmetric eigendecomposition is
/// attempted.
const SYMMETRY_TOL: f64 = 1e-10;
/// Slack on the ellipticity band check, machine-level only.
const BAND_TOL: f64 = 1e-9;

/// A diffusion coefficient field with values in `S_δ` (symmetric matrices
/// with eigenvalues in `[δ, 1/δ]`).
#[derive(Clone)]
pub struct DiffusionField {
    dim: usize,
    delta: f64,
    kind: Kind,
}

#[derive(Clone)]
enum Kind {
    Identity,
    /// Constant diagonal matrix; `sqrt` caches the elementwise square roots.
    ConstDiagonal { diag: Vec<f64>, sqrt: Vec<f64> },
    /// `R(θ(x)) diag R(θ(x))^T` with the position-dependent rotation
    /// `θ(x) = x¹ + x²` acting in the (1,2)-plane. Eigenvalues are those of
    /// `diag` at every point.
    RotatedDiagonal { diag: Vec<f64>, sqrt: Vec<f64> },
    /// Self-similar image `ã(y) = a(y/c)` (the matrix is dimensionless).
    Rescaled {
        inner: Arc<DiffusionField>,
        factor: f64,
    },
    /// Arbitrary evaluator returning a row-major `d×d` matrix; checked for
    /// symmetry and ellipticity on every call and factored by
    /// eigendecomposition.
    Custom(#[allow(clippy::type_complexity)] Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>),
}

/// Result of evaluating a diffusion field: the matrix and its symmetric
/// square root, both row-major `d×d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSqrt {
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl std::fmt::Debug for DiffusionField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionField")
            .field("dim", &self.dim)
            .field("delta", &self.delta)
            .field("kind", &self.kind_name())
            .finish()
    }
}

fn band_delta(diag: &[f64]) -> Result<f64, FieldError> {
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = diag.iter().cloned().fold(0.0f64, f64::max);
    if !(min > 0.0) {
        return Err(FieldError::InvalidParameter {
            name: "diag",
            message: format!("eigenvalues must be positive, got minimum {min}"),
        });
    }
    Ok(min.min(1.0 / max).min(1.0))
}

impl DiffusionField {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            delta: 1.0,
            kind: Kind::Identity,
        }
    }

    /// Constant multiple `c·I` of the identity.
    pub fn scalar(dim: usize, c: f64) -> Result<Self, FieldError> {
        Self::const_diagonal(vec![c; dim])
    }

    pub fn const_diagonal(diag: Vec<f64>) -> Result<Self, FieldError> {
        let delta = band_delta(&diag)?;
        let sqrt = diag.iter().map(|v| v.sqrt()).collect();
        Ok(Self {
            dim: diag.len(),
            delta,
            kind: Kind::ConstDiagonal { diag, sqrt },
        })
    }

    /// Diagonal eigenvalues conjugated by the position-dependent rotation
    /// `θ(x) = x¹ + x²` in the (1,2)-plane. Requires `d ≥ 2`.
    pub fn rotated_diagonal(diag: Vec<f64>) -> Result<Self, FieldError> {
        if diag.len() < 2 {
            return Err(FieldError::InvalidParameter {
                name: "diag",
                message: "rotated diagonal field needs dimension at least 2".into(),
            });
        }
        let delta = band_delta(&diag)?;
        let sqrt = diag.iter().map(|v| v.sqrt()).collect();
        Ok(Self {
            dim: diag.len(),
            delta,
            kind: Kind::RotatedDiagonal { diag, sqrt },
        })
    }

    /// Self-similar rescaling `ã(y) = a(y/c)`.
    pub fn rescale(&self, factor: f64) -> Result<Self, FieldError> {
        if !(factor > 0.0) {
            return Err(FieldError::InvalidParameter {
                name: "factor",
                message: format!("rescaling factor must be positive, got {factor}"),
            });
        }
        if factor == 1.0 {
            return Ok(self.clone());
        }
        Ok(Self {
            dim: self.dim,
            delta: self.delta,
            kind: Kind::Rescaled {
                inner: Arc::new(self.clone()),
                factor,
            },
        })
    }

    /// Arbitrary matrix evaluator with a declared ellipticity constant; every
    /// evaluation is symmetry- and band-checked.
    pub fn from_fn(
        dim: usize,
        delta: f64,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self, FieldError> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(FieldError::InvalidParameter {
                name: "delta",
                message: format!("ellipticity constant must lie in (0, 1], got {delta}"),
            });
        }
        Ok(Self {
            dim,
            delta,
            kind: Kind::Custom(Arc::new(eval)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared ellipticity constant: eigenvalues lie in `[δ, 1/δ]`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            Kind::Identity => "identity",
            Kind::ConstDiagonal { .. } => "const_diagonal",
            Kind::RotatedDiagonal { .. } => "rotated_diagonal",
            Kind::Rescaled { .. } => "rescaled",
            Kind::Custom(_) => "custom",
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, Kind::Identity)
    }

    /// Evaluate `a(x)` and its symmetric square root `σ(x)`, `σσ* = a`.
    pub fn eval(&self, x: &[f64]) -> Result<SymmetricSqrt, FieldError> {
        check_dim(self.dim, x)?;
        let d = self.dim;
        match &self.kind {
            Kind::Identity => {
                let mut a = vec![0.0; d * d];
                for i in 0..d {
                    a[i * d + i] = 1.0;
                }
                Ok(SymmetricSqrt {
                    sigma: a.clone(),
                    a,
                })
            }
            Kind::ConstDiagonal { diag, sqrt } => {
                let mut a = vec![0.0; d * d];
                let mut s = vec![0.0; d * d];
                for i in 0..d {
                    a[i * d + i] = diag[i];
                    s[i * d + i] = sqrt[i];
                }
                Ok(SymmetricSqrt { a, sigma: s })
            }
            Kind::RotatedDiagonal { diag, sqrt } => {
                let (sin, cos) = (x[0] + x[1]).sin_cos();
                Ok(SymmetricSqrt {
                    a: rotated_matrix(d, diag, sin, cos),
                    sigma: rotated_matrix(d, sqrt, sin, cos),
                })
            }
            Kind::Rescaled { inner, factor } => {
                let y: Vec<f64> = x.iter().map(|c| c / factor).collect();
                inner.eval(&y)
            }
            Kind::Custom(eval) => {
                let a = eval(x);
                if a.len() != d * d {
                    return Err(FieldError::InvalidParameter {
                        name: "evaluator",
                        message: format!("returned {} entries, expected {}", a.len(), d * d),
                    });
                }
                self.factor_checked(x, a)
            }
        }
    }

    /// Symmetry check, eigendecomposition, band check, symmetric square root.
    fn factor_checked(&self, x: &[f64], a: Vec<f64>) -> Result<SymmetricSqrt, FieldError> {
        let d = self.dim;
        let mut asym = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                asym = asym.max((a[i * d + j] - a[j * d + i]).abs());
            }
        }
        if asym > SYMMETRY_TOL {
            return Err(FieldError::NotSymmetric {
                point: x.to_vec(),
                asymmetry: asym,
            });
        }
        let m = DMatrix::from_row_slice(d, d, &a);
        let eig = m.symmetric_eigen();
        let (lo, hi) = (self.delta - BAND_TOL, 1.0 / self.delta + BAND_TOL);
        for &ev in eig.eigenvalues.iter() {
            if ev < lo || ev > hi {
                return Err(FieldError::EllipticityViolation {
                    point: x.to_vec(),
                    eigenvalue: ev,
                    delta: self.delta,
                    inv_delta: 1.0 / self.delta,
                });
            }
        }
        let sqrt_vals = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.sqrt()));
        let sigma = &eig.eigenvectors * sqrt_vals * eig.eigenvectors.transpose();
        Ok(SymmetricSqrt {
            a,
            sigma: sigma.transpose().as_slice().to_vec(), // nalgebra is column-major
        })
    }

    /// `out = σ(x) v` without allocating; the fast path of the step loop.
    #[inline]
    pub fn apply_sigma(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Identity => out.copy_from_slice(v),
            Kind::ConstDiagonal { sqrt, .. } => {
                for ((o, vi), s) in out.iter_mut().zip(v).zip(sqrt) {
                    *o = s * vi;
                }
            }
            Kind::RotatedDiagonal { sqrt, .. } => {
                let (sin, cos) = (x[0] + x[1]).sin_cos();
                apply_rotated(sqrt, sin, cos, v, out);
            }
            Kind::Rescaled { inner, factor } => {
                let mut y = [0.0f64; crate::simulate::MAX_DIM];
                let y = &mut y[..self.dim];
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi = xi / factor;
                }
                inner.apply_sigma(y, v, out);
            }
            Kind::Custom(_) => {
                let f = self.eval(x).expect("custom diffusion evaluation failed");
                let d = self.dim;
                for i in 0..d {
                    out[i] = (0..d).map(|j| f.sigma[i * d + j] * v[j]).sum();
                }
            }
        }
    }

    /// Write `a(x)` row-major into `out` (length `d²`).
    pub fn a_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Identity => {
                out.fill(0.0);
                for i in 0..self.dim {
                    out[i * self.dim + i] = 1.0;
                }
            }
            Kind::ConstDiagonal { diag, .. } => {
                out.fill(0.0);
                for i in 0..self.dim {
                    out[i * self.dim + i] = diag[i];
                }
            }
            Kind::RotatedDiagonal { diag, .. } => {
                let (sin, cos) = (x[0] + x[1]).sin_cos();
                out.copy_from_slice(&rotated_matrix(self.dim, diag, sin, cos));
            }
            Kind::Rescaled { inner, factor } => {
                let y: Vec<f64> = x.iter().map(|c| c / factor).collect();
                inner.a_into(&y, out);
            }
            Kind::Custom(_) => {
                let f = self.eval(x).expect("custom diffusion evaluation failed");
                out.copy_from_slice(&f.a);
            }
        }
    }

    /// `tr a(x)`.
    pub fn trace(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Identity => self.dim as f64,
            Kind::ConstDiagonal { diag, .. } | Kind::RotatedDiagonal { diag, .. } => {
                diag.iter().sum()
            }
            _ => {
                let mut a = vec![0.0; self.dim * self.dim];
                self.a_into(x, &mut a);
                (0..self.dim).map(|i| a[i * self.dim + i]).sum()
            }
        }
    }
}

/// `R diag(v) R^T` where `R` rotates the (1,2)-plane by the angle with the
/// given sine/cosine and leaves the remaining axes fixed.
fn rotated_matrix(d: usize, v: &[f64], sin: f64, cos: f64) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    let (c2, s2, cs) = (cos * cos, sin * sin, cos * sin);
    m[0] = v[0] * c2 + v[1] * s2;
    m[1] = (v[0] - v[1]) * cs;
    m[d] = m[1];
    m[d + 1] = v[0] * s2 + v[1] * c2;
    for i in 2..d {
        m[i * d + i] = v[i];
    }
    m
}

#[inline]
fn apply_rotated(v: &[f64], sin: f64, cos: f64, x: &[f64], out: &mut [f64]) {
    let (c2, s2, cs) = (cos * cos, sin * sin, cos * sin);
    let m00 = v[0] * c2 + v[1] * s2;
    let m01 = (v[0] - v[1]) * cs;
    let m11 = v[0] * s2 + v[1] * c2;
    out[0] = m00 * x[0] + m01 * x[1];
    out[1] = m01 * x[0] + m11 * x[1];
    for i in 2..x.len() {
        out[i] = v[i] * x[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_field() {
        let f = DiffusionField::identity(2);
        let e = f.eval(&[0.4, -2.0]).unwrap();
        assert_eq!(e.a, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(e.sigma, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn diagonal_square_root() {
        let delta = 0.25;
        let f = DiffusionField::const_diagonal(vec![delta, 1.0 / delta]).unwrap();
        assert_relative_eq!(f.delta(), delta, epsilon = 1e-15);
        let e = f.eval(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(e.sigma[0], delta.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(e.sigma[3], 1.0 / delta.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rotated_diagonal_preserves_eigenvalues() {
        let f = DiffusionField::rotated_diagonal(vec![0.5, 2.0]).unwrap();
        let mut rng = crate::simulate::PathRng::new(7, 0);
        for _ in 0..1000 {
            let x = [rng.uniform() * 6.0 - 3.0, rng.uniform() * 6.0 - 3.0];
            let e = f.eval(&x).unwrap();
            let m = DMatrix::from_row_slice(2, 2, &e.a);
            let mut eigs: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().cloned().collect();
            eigs.sort_by(f64::total_cmp);
            assert_relative_eq!(eigs[0], 0.5, epsilon = 1e-10);
            assert_relative_eq!(eigs[1], 2.0, epsilon = 1e-10);
            // σσ* = a
            let s = DMatrix::from_row_slice(2, 2, &e.sigma);
            let aa = &s * s.transpose();
            for (u, v) in aa.iter().zip(DMatrix::from_row_slice(2, 2, &e.a).iter()) {
                assert_relative_eq!(u, v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn custom_field_rejects_band_violation() {
        let f = DiffusionField::from_fn(2, 0.5, |_x| vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            f.eval(&[0.0, 0.0]),
            Err(FieldError::EllipticityViolation { .. })
        ));
    }

    #[test]
    fn custom_field_rejects_asymmetry() {
        let f = DiffusionField::from_fn(2, 0.5, |_x| vec![1.0, 0.5, 0.1, 1.0]).unwrap();
        assert!(matches!(
            f.eval(&[0.0, 0.0]),
            Err(FieldError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn custom_field_factors_symmetric_matrix() {
        let f = DiffusionField::from_fn(2, 0.4, |_x| vec![1.0, 0.3, 0.3, 1.0]).unwrap();
        let e = f.eval(&[1.0, 2.0]).unwrap();
        let s = DMatrix::from_row_slice(2, 2, &e.sigma);
        let aa = s.clone() * s.transpose();
        assert_relative_eq!(aa[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(aa[(0, 1)], 0.3, epsilon = 1e-12);
        // Symmetric root, not Cholesky.
        assert_relative_eq!(e.sigma[1], e.sigma[2], epsilon = 1e-12);
    }

    #[test]
    fn apply_sigma_agrees_with_eval() {
        let f = DiffusionField::rotated_diagonal(vec![0.5, 2.0, 1.0]).unwrap();
        let x = [0.7, -0.2, 0.5];
        let v = [1.0, -1.0, 2.0];
        let mut out = [0.0; 3];
        f.apply_sigma(&x, &v, &mut out);
        let e = f.eval(&x).unwrap();
        for i in 0..3 {
            let want: f64 = (0..3).map(|j| e.sigma[i * 3 + j] * v[j]).sum();
            assert_relative_eq!(out[i], want, epsilon = 1e-12);
        }
    }
}
