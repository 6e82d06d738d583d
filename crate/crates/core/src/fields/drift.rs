//! Singular drift fields and the wrappers (magnitude capping, self-similar
//! rescaling) used to regularize and rescale them.

use std::sync::Arc;

use super::{check_dim, FieldError};
use crate::la;

/// A drift vector field `b : ℝ^d → ℝ^d`, possibly unbounded near a finite
/// singular set. Construction goes through the named constructors below or
/// [`DriftField::from_fn`]; the field is immutable afterwards.
#[derive(Clone)]
pub struct DriftField {
    dim: usize,
    kind: Kind,
}

#[derive(Clone)]
enum Kind {
    Zero,
    Constant(Vec<f64>),
    /// `b(x) = -(d/2) · x / |x|²`: the critical inward pull whose magnitude
    /// `(d/2)/|x|` just fails to be `L_d`-integrable at the origin.
    InverseRadial { support_radius: Option<f64> },
    /// `b(x) = c · x / |x|² · (1 − ln|x|)^{-β}` on the unit ball, zero outside.
    /// Lies in `L_d` exactly when `β > 1/d`.
    RadialLdMember { c: f64, beta: f64 },
    /// Magnitude cap at `level`; evaluates to zero at singular points of the
    /// inner field (the capped direction is undefined there).
    Truncated { inner: Arc<DriftField>, level: f64 },
    /// Self-similar image `b̃(y) = c⁻¹ b(y/c)`; preserves the `L_d` norm.
    Rescaled { inner: Arc<DriftField>, factor: f64 },
    Custom(Arc<CustomDrift>),
}

struct CustomDrift {
    eval: Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    singular: Vec<Vec<f64>>,
    declared_ld_norm: Option<f64>,
    support_radius: Option<f64>,
}

impl std::fmt::Debug for DriftField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriftField")
            .field("dim", &self.dim)
            .field("kind", &self.kind_name())
            .finish()
    }
}

impl DriftField {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            kind: Kind::Zero,
        }
    }

    pub fn constant(v: Vec<f64>) -> Self {
        Self {
            dim: v.len(),
            kind: Kind::Constant(v),
        }
    }

    /// The critical inward field `b(x) = -(d/2) x |x|^{-2}`, optionally
    /// supported on a ball around the origin.
    pub fn inverse_radial(dim: usize, support_radius: Option<f64>) -> Result<Self, FieldError> {
        if let Some(r) = support_radius {
            if r <= 0.0 {
                return Err(FieldError::InvalidParameter {
                    name: "support_radius",
                    message: format!("must be positive, got {r}"),
                });
            }
        }
        Ok(Self {
            dim,
            kind: Kind::InverseRadial { support_radius },
        })
    }

    /// Inverse-radial field with the magnitude capped at its value on the
    /// sphere of radius `eps`, i.e. at level `(d/2)/eps`. Has no singular
    /// points.
    pub fn capped_inverse_radial(dim: usize, eps: f64) -> Result<Self, FieldError> {
        if eps <= 0.0 {
            return Err(FieldError::InvalidParameter {
                name: "eps",
                message: format!("cap radius must be positive, got {eps}"),
            });
        }
        Ok(Self::inverse_radial(dim, None)?.truncate(dim as f64 / 2.0 / eps)?)
    }

    /// `b(x) = c x |x|^{-2} (1 − ln|x|)^{-β}` on `B_1`, zero outside; requires
    /// `β > 1/d` so that `|b| ∈ L_d(B_1)`.
    pub fn radial_ld_member(dim: usize, c: f64, beta: f64) -> Result<Self, FieldError> {
        if beta <= 1.0 / dim as f64 {
            return Err(FieldError::InvalidParameter {
                name: "beta",
                message: format!("need beta > 1/d = {} for an L_d member, got {beta}", 1.0 / dim as f64),
            });
        }
        Ok(Self {
            dim,
            kind: Kind::RadialLdMember { c, beta },
        })
    }

    /// Arbitrary evaluator with declared singular set; used for manufactured
    /// test fields. Not expressible in run configs.
    pub fn from_fn(
        dim: usize,
        eval: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        singular: Vec<Vec<f64>>,
        declared_ld_norm: Option<f64>,
        support_radius: Option<f64>,
    ) -> Self {
        Self {
            dim,
            kind: Kind::Custom(Arc::new(CustomDrift {
                eval: Box::new(eval),
                singular,
                declared_ld_norm,
                support_radius,
            })),
        }
    }

    /// Magnitude cap: `b_M(x) = b(x)` when `|b(x)| ≤ M`, else `M b(x)/|b(x)|`.
    /// The capped field has no singular points; at singular points of the
    /// inner field it evaluates to zero.
    pub fn truncate(&self, level: f64) -> Result<Self, FieldError> {
        if !(level > 0.0) {
            return Err(FieldError::InvalidParameter {
                name: "level",
                message: format!("truncation level must be positive, got {level}"),
            });
        }
        // Re-capping at the same or higher level is a no-op structurally too.
        if let Kind::Truncated {
            inner,
            level: inner_level,
        } = &self.kind
        {
            if *inner_level <= level {
                return Ok(self.clone());
            }
            return Ok(Self {
                dim: self.dim,
                kind: Kind::Truncated {
                    inner: inner.clone(),
                    level,
                },
            });
        }
        Ok(Self {
            dim: self.dim,
            kind: Kind::Truncated {
                inner: Arc::new(self.clone()),
                level,
            },
        })
    }

    /// Self-similar rescaling `b̃(y) = c⁻¹ b(y/c)`: the image of the drift
    /// under `x_t → c x_{t/c²}`. The `L_d(ℝ^d)` norm is invariant.
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
            kind: Kind::Rescaled {
                inner: Arc::new(self.clone()),
                factor,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            Kind::Zero => "zero",
            Kind::Constant(_) => "constant",
            Kind::InverseRadial { .. } => "inverse_radial",
            Kind::RadialLdMember { .. } => "radial_ld_member",
            Kind::Truncated { .. } => "truncated",
            Kind::Rescaled { .. } => "rescaled",
            Kind::Custom(_) => "custom",
        }
    }

    /// Points where evaluation is undefined.
    pub fn singular_points(&self) -> Vec<Vec<f64>> {
        match &self.kind {
            Kind::Zero | Kind::Constant(_) => vec![],
            Kind::InverseRadial { .. } | Kind::RadialLdMember { .. } => vec![vec![0.0; self.dim]],
            Kind::Truncated { .. } => vec![],
            Kind::Rescaled { inner, factor } => inner
                .singular_points()
                .into_iter()
                .map(|p| p.iter().map(|c| c * factor).collect())
                .collect(),
            Kind::Custom(c) => c.singular.clone(),
        }
    }

    pub fn is_singular_at(&self, x: &[f64]) -> bool {
        self.singular_points().iter().any(|s| s[..] == *x)
    }

    /// Closed-form `L_d(ℝ^d)` norm when one exists for the kind.
    pub fn declared_ld_norm(&self) -> Option<f64> {
        match &self.kind {
            Kind::Zero => Some(0.0),
            Kind::RadialLdMember { c, beta } => {
                // ∫ |b|^d = c^d ω_{d-1} ∫_0^1 s^{-1}(1-ln s)^{-βd} ds
                //         = c^d ω_{d-1} / (βd - 1)
                let d = self.dim as f64;
                let omega = la::unit_sphere_area(self.dim);
                Some(c.abs() * (omega / (beta * d - 1.0)).powf(1.0 / d))
            }
            Kind::Rescaled { inner, .. } => inner.declared_ld_norm(),
            Kind::Custom(c) => c.declared_ld_norm,
            _ => None,
        }
    }

    /// Radius outside which the field vanishes, when known.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            Kind::Zero => Some(0.0),
            Kind::Constant(_) => None,
            Kind::InverseRadial { support_radius } => *support_radius,
            Kind::RadialLdMember { .. } => Some(1.0),
            Kind::Truncated { inner, .. } => inner.support_radius(),
            Kind::Rescaled { inner, factor } => inner.support_radius().map(|r| r * factor),
            Kind::Custom(c) => c.support_radius,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Evaluate without allocating. Errors at declared singular points rather
    /// than returning a non-finite vector.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        check_dim(self.dim, x)?;
        debug_assert_eq!(out.len(), self.dim);
        match &self.kind {
            Kind::Zero => out.fill(0.0),
            Kind::Constant(v) => out.copy_from_slice(v),
            Kind::InverseRadial { support_radius } => {
                let r2 = la::norm_sq(x);
                if r2 == 0.0 {
                    return Err(FieldError::SingularPoint { point: x.to_vec() });
                }
                if support_radius.map_or(false, |s| r2.sqrt() >= s) {
                    out.fill(0.0);
                } else {
                    let scale = -(self.dim as f64 / 2.0) / r2;
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = scale * xi;
                    }
                }
            }
            Kind::RadialLdMember { c, beta } => {
                let r2 = la::norm_sq(x);
                if r2 == 0.0 {
                    return Err(FieldError::SingularPoint { point: x.to_vec() });
                }
                let r = r2.sqrt();
                if r >= 1.0 {
                    out.fill(0.0);
                } else {
                    let scale = c / r2 * (1.0 - r.ln()).powf(-beta);
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = scale * xi;
                    }
                }
            }
            Kind::Truncated { inner, level } => {
                if inner.is_singular_at(x) {
                    out.fill(0.0);
                    return Ok(());
                }
                inner.eval_into(x, out)?;
                let mag = la::norm(out);
                if mag > *level {
                    let scale = level / mag;
                    for o in out.iter_mut() {
                        *o *= scale;
                    }
                }
            }
            Kind::Rescaled { inner, factor } => {
                let mut y = [0.0f64; crate::simulate::MAX_DIM];
                let y = &mut y[..self.dim];
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi = xi / factor;
                }
                inner.eval_into(y, out).map_err(|e| match e {
                    FieldError::SingularPoint { .. } => {
                        FieldError::SingularPoint { point: x.to_vec() }
                    }
                    other => other,
                })?;
                for o in out.iter_mut() {
                    *o /= factor;
                }
            }
            Kind::Custom(c) => {
                if c.singular.iter().any(|s| s[..] == *x) {
                    return Err(FieldError::SingularPoint { point: x.to_vec() });
                }
                (c.eval)(x, out);
            }
        }
        Ok(())
    }

    /// `|b(x)|`, treating singular points as `+∞` (used by the norm
    /// quadrature, which never lands on them except by construction).
    pub(crate) fn magnitude(&self, x: &[f64]) -> f64 {
        let mut buf = [0.0f64; crate::simulate::MAX_DIM];
        match self.eval_into(x, &mut buf[..self.dim]) {
            Ok(()) => la::norm(&buf[..self.dim]),
            Err(FieldError::SingularPoint { .. }) => f64::INFINITY,
            Err(_) => f64::NAN,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_field_evaluates_to_zero() {
        let f = DriftField::zero(3);
        assert_eq!(f.eval(&[0.3, -1.0, 2.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(f.declared_ld_norm(), Some(0.0));
    }

    #[test]
    fn inverse_radial_matches_closed_form() {
        // d = 2 at (1, 0): -(d/2) x |x|^{-2} = -x at |x| = 1.
        let f = DriftField::inverse_radial(2, None).unwrap();
        let b = f.eval(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(b[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(b[1], 0.0, epsilon = 1e-15);

        // d = 3 at (0, 0, 2): magnitude (d/2)/|x| = 3/4, pointing inward.
        let f = DriftField::inverse_radial(3, None).unwrap();
        let b = f.eval(&[0.0, 0.0, 2.0]).unwrap();
        assert_relative_eq!(b[2], -0.75, epsilon = 1e-15);
        assert_eq!(b[0], 0.0);
    }

    #[test]
    fn inverse_radial_singular_at_origin() {
        let f = DriftField::inverse_radial(2, None).unwrap();
        assert!(matches!(
            f.eval(&[0.0, 0.0]),
            Err(FieldError::SingularPoint { .. })
        ));
        assert!(f.is_singular_at(&[0.0, 0.0]));
    }

    #[test]
    fn truncation_caps_magnitude_and_keeps_direction() {
        // |b(0.5, 0)| = 2 in d = 2; capped at 1 the value is (-1, 0).
        let f = DriftField::inverse_radial(2, None)
            .unwrap()
            .truncate(1.0)
            .unwrap();
        let b = f.eval(&[0.5, 0.0]).unwrap();
        assert_relative_eq!(b[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(b[1], 0.0, epsilon = 1e-15);
        // No singular points and zero at the former singularity.
        assert!(f.singular_points().is_empty());
        assert_eq!(f.eval(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn truncation_is_idempotent_and_monotone() {
        let f = DriftField::inverse_radial(2, None).unwrap();
        let f1 = f.truncate(3.0).unwrap();
        let f11 = f1.truncate(3.0).unwrap();
        let f2 = f.truncate(10.0).unwrap();
        for xv in [[0.1, 0.2], [0.03, 0.0], [1.5, -0.4]] {
            let a = f1.eval(&xv).unwrap();
            let b = f11.eval(&xv).unwrap();
            assert_eq!(a, b);
            let m1 = crate::la::norm(&a);
            let m2 = crate::la::norm(&f2.eval(&xv).unwrap());
            assert!(m1 <= m2 + 1e-15);
        }
    }

    #[test]
    fn rescale_identity_and_pointwise_law() {
        let f = DriftField::constant(vec![2.0, -1.0]);
        let same = f.rescale(1.0).unwrap();
        assert_eq!(same.eval(&[5.0, 5.0]).unwrap(), vec![2.0, -1.0]);

        let g = f.rescale(2.0).unwrap();
        assert_eq!(g.eval(&[0.1, 7.0]).unwrap(), vec![1.0, -0.5]);

        // Rescaled singular set moves with the scaling.
        let inv = DriftField::inverse_radial(2, None).unwrap().rescale(3.0).unwrap();
        assert!(inv.is_singular_at(&[0.0, 0.0]));
        let b = inv.eval(&[3.0, 0.0]).unwrap(); // = (1/3) b(1,0) = (-1/3, 0)
        assert_relative_eq!(b[0], -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn radial_ld_member_requires_beta_above_threshold() {
        assert!(DriftField::radial_ld_member(2, 1.0, 0.5).is_err());
        assert!(DriftField::radial_ld_member(2, 1.0, 0.500001).is_ok());
        assert!(DriftField::capped_inverse_radial(2, -0.1).is_err());
    }

    #[test]
    fn radial_ld_member_declared_norm() {
        // d = 2, β = 1, c = 1: (2π/(βd−1))^{1/2} = √(2π).
        let f = DriftField::radial_ld_member(2, 1.0, 1.0).unwrap();
        assert_relative_eq!(
            f.declared_ld_norm().unwrap(),
            (2.0 * std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
        // Norm invariance under rescaling is structural.
        let g = f.rescale(10.0).unwrap();
        assert_eq!(f.declared_ld_norm(), g.declared_ld_norm());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = DriftField::zero(2);
        assert!(matches!(
            f.eval(&[1.0, 2.0, 3.0]),
            Err(FieldError::DimensionMismatch { .. })
        ));
    }
}
