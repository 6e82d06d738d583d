//! Experiment configuration: a human-editable TOML document with an explicit
//! version field. Unknown keys are hard errors so a typo cannot silently
//! loosen a tolerance or misdirect a run.

use serde::{Deserialize, Serialize};

use crate::fields::{DiffusionField, DriftField, FieldError};
use crate::simulate::{SimConfig, Truncation};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },

    #[error("unsupported config version {0}; this build reads version 1")]
    Version(u32),

    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Drift field specification by kind name plus named numeric parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum DriftSpec {
    Zero,
    Constant {
        v: Vec<f64>,
    },
    /// `b(x) = -(d/2)·x/|x|²`.
    InverseRadial {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support_radius: Option<f64>,
    },
    /// Inverse radial with magnitude capped at its value on the `eps` sphere.
    CappedInverseRadial {
        eps: f64,
    },
    /// `b(x) = c·x/|x|²·(1 − ln|x|)^{-β}` on the unit ball.
    RadialLdMember {
        c: f64,
        beta: f64,
    },
}

impl DriftSpec {
    pub fn build(&self, dim: usize) -> Result<DriftField, ConfigError> {
        Ok(match self {
            DriftSpec::Zero => DriftField::zero(dim),
            DriftSpec::Constant { v } => {
                if v.len() != dim {
                    return Err(ConfigError::Invalid {
                        field: "drift.v",
                        message: format!("has {} entries, dimension is {dim}", v.len()),
                    });
                }
                DriftField::constant(v.clone())
            }
            DriftSpec::InverseRadial { support_radius } => {
                DriftField::inverse_radial(dim, *support_radius)?
            }
            DriftSpec::CappedInverseRadial { eps } => DriftField::capped_inverse_radial(dim, *eps)?,
            DriftSpec::RadialLdMember { c, beta } => DriftField::radial_ld_member(dim, *c, *beta)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            DriftSpec::Zero => "zero",
            DriftSpec::Constant { .. } => "constant",
            DriftSpec::InverseRadial { .. } => "inverse_radial",
            DriftSpec::CappedInverseRadial { .. } => "capped_inverse_radial",
            DriftSpec::RadialLdMember { .. } => "radial_ld_member",
        }
    }
}

/// Diffusion matrix specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum DiffusionSpec {
    Identity,
    Scalar { c: f64 },
    ConstDiagonal { diag: Vec<f64> },
    RotatedDiagonal { diag: Vec<f64> },
}

impl DiffusionSpec {
    pub fn build(&self, dim: usize) -> Result<DiffusionField, ConfigError> {
        let check = |n: usize| -> Result<(), ConfigError> {
            if n != dim {
                return Err(ConfigError::Invalid {
                    field: "diffusion.diag",
                    message: format!("has {n} entries, dimension is {dim}"),
                });
            }
            Ok(())
        };
        Ok(match self {
            DiffusionSpec::Identity => DiffusionField::identity(dim),
            DiffusionSpec::Scalar { c } => DiffusionField::scalar(dim, *c)?,
            DiffusionSpec::ConstDiagonal { diag } => {
                check(diag.len())?;
                DiffusionField::const_diagonal(diag.clone())?
            }
            DiffusionSpec::RotatedDiagonal { diag } => {
                check(diag.len())?;
                DiffusionField::rotated_diagonal(diag.clone())?
            }
        })
    }
}

/// Simulation block of a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub dim: usize,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: u64,
    pub start: Vec<f64>,
    #[serde(default = "default_truncation")]
    pub truncation: Truncation,
}

fn default_truncation() -> Truncation {
    Truncation::DtCoupled
}

impl SimBlock {
    pub fn to_sim_config(&self, master_seed: u64) -> SimConfig {
        SimConfig {
            dim: self.dim,
            dt: self.dt,
            horizon: self.horizon,
            truncation: self.truncation,
            master_seed,
            n_paths: self.n_paths,
            start: self.start.clone(),
        }
    }
}

/// Analysis knobs. Each experiment kind reads the fields it needs and falls
/// back to its registered defaults; unknown keys are rejected at parse time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_extent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tube_lengths: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_balls: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_schedule: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// A complete experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub kind: String,
    pub master_seed: u64,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub sim: SimBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub negative_control: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != 1 {
            return Err(ConfigError::Version(self.version));
        }
        if crate::verify::ExperimentKind::from_name(&self.kind).is_none() {
            return Err(ConfigError::Invalid {
                field: "kind",
                message: format!(
                    "unknown experiment kind {:?}; see `list-kinds`",
                    self.kind
                ),
            });
        }
        let sim = self.sim.to_sim_config(self.master_seed);
        sim.validate().map_err(|e| ConfigError::Invalid {
            field: "sim",
            message: e.to_string(),
        })?;
        self.drift.build(self.sim.dim)?;
        self.diffusion.build(self.sim.dim)?;
        Ok(())
    }

    /// Build the ensemble described by the `sim`, `drift`, and `diffusion`
    /// blocks.
    pub fn build_ensemble(&self) -> Result<crate::simulate::Ensemble, ConfigError> {
        let drift = self.drift.build(self.sim.dim)?;
        let diffusion = self.diffusion.build(self.sim.dim)?;
        crate::simulate::Ensemble::new(self.sim.to_sim_config(self.master_seed), drift, diffusion)
            .map_err(|e| ConfigError::Invalid {
                field: "sim",
                message: e.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            version: 1,
            kind: "exit_tail".into(),
            master_seed: 42,
            drift: DriftSpec::Zero,
            diffusion: DiffusionSpec::Identity,
            sim: SimBlock {
                dim: 2,
                dt: 1e-3,
                horizon: 2.5,
                n_paths: 1000,
                start: vec![0.0, 0.0],
                truncation: Truncation::DtCoupled,
            },
            analysis: AnalysisBlock {
                radius: Some(1.0),
                times: Some(vec![0.5, 1.0, 1.5, 2.0, 2.5]),
                ..Default::default()
            },
            negative_control: false,
            output: None,
        }
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        let cfg = sample();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        let mut text = sample().to_toml();
        text.push_str("\nunknown_knob = 3\n");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("unknown_knob"), "{err}");
    }

    #[test]
    fn unknown_kind_is_diagnosed_by_field() {
        let mut cfg = sample();
        cfg.kind = "no_such_kind".into();
        let err = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap_err();
        match err {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "kind"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_version_and_bad_sim_are_rejected() {
        let mut cfg = sample();
        cfg.version = 2;
        assert!(matches!(cfg.validate(), Err(ConfigError::Version(2))));
        let mut cfg = sample();
        cfg.sim.dt = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = sample();
        cfg.drift = DriftSpec::Constant { v: vec![1.0] };
        assert!(cfg.validate().is_err());
        let mut cfg = sample();
        cfg.drift = DriftSpec::RadialLdMember { c: 1.0, beta: 0.1 };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn drift_spec_builds_expected_kinds() {
        assert_eq!(DriftSpec::Zero.build(2).unwrap().kind_name(), "zero");
        assert_eq!(
            DriftSpec::CappedInverseRadial { eps: 0.1 }
                .build(2)
                .unwrap()
                .kind_name(),
            "truncated"
        );
        assert!(DriftSpec::RadialLdMember { c: 1.0, beta: 1.0 }
            .build(2)
            .unwrap()
            .declared_ld_norm()
            .is_some());
    }
}
