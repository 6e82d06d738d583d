//! The experiment registry: each kind anchors one estimated inequality or
//! structural property, runs a pre-registered protocol on a configured
//! ensemble, and renders a verdict from the frozen thresholds.
//!
//! Verdicts are quantitative only for the driftless unit-diffusion process,
//! where closed-form oracles exist. Runs with drift report the same
//! quantities and exponents but return [`Verdict::Inconclusive`] after
//! finiteness and sign checks — the constants for drifted processes are not
//! pinned by theory. Every kind also defines one deliberately broken
//! negative-control configuration that must yield [`Verdict::Fail`].

mod boundary;
mod greens;
mod occupation;
mod pde;
mod residuals;

use std::time::Instant;

use super::report::{ExperimentReport, Quantity, Verdict};
use super::thresholds::REGISTRY_VERSION;
use super::VerifyError;
use crate::config::{DriftSpec, ExperimentConfig, SimBlock};
use crate::green::MeanWithSe;
use crate::simulate::{Ensemble, SimConfig};
use crate::stats::{Counter, RunningMoments};
use crate::stopping::Region;

macro_rules! kinds {
    ($(($variant:ident, $name:literal, $claim:literal)),+ $(,)?) => {
        /// A registered experiment kind.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum ExperimentKind {
            $($variant),+
        }

        impl ExperimentKind {
            pub fn all() -> &'static [ExperimentKind] {
                &[$(ExperimentKind::$variant),+]
            }

            pub fn name(&self) -> &'static str {
                match self {
                    $(ExperimentKind::$variant => $name),+
                }
            }

            /// Neutral identifier of the claim the kind checks.
            pub fn claim(&self) -> &'static str {
                match self {
                    $(ExperimentKind::$variant => $claim),+
                }
            }

            pub fn from_name(s: &str) -> Option<ExperimentKind> {
                match s {
                    $($name => Some(ExperimentKind::$variant),)+
                    _ => None,
                }
            }
        }
    };
}

kinds![
    (ResolventScaling, "resolvent_scaling", "discounted-occupation-lambda-scaling"),
    (GreenNorm, "green_norm", "greens-density-weighted-norm-scaling"),
    (ReverseHolder, "reverse_holder", "greens-density-reverse-hoelder"),
    (ExitFloor, "exit_floor", "discounted-exit-time-lower-bound"),
    (MomentFactorial, "moment_factorial", "occupation-moment-factorial-growth"),
    (ExitOccupation, "exit_occupation", "pre-exit-occupation-r-scaling"),
    (OccupationClock, "occupation_clock", "exterior-clock-discounted-finiteness"),
    (MaxPrinciple, "max_principle", "elliptic-maximum-principle"),
    (DecayHalfball, "decay_halfball", "interior-norm-lambda-decay"),
    (SmallsetOccupation, "smallset_occupation", "small-set-occupation-lower-bound"),
    (SmallsetHitting, "smallset_hitting", "small-set-hitting-probability"),
    (OccupationTail, "occupation_tail", "occupation-clock-tail-lower-bound"),
    (AntiHolder, "antiholder", "anti-hoelder-average-inequality"),
    (LinEstimate, "lin_estimate", "hessian-average-interior-estimate"),
    (DensityExit, "density_exit", "dense-set-occupation-fraction"),
    (BoundaryEscape, "boundary_escape", "dense-obstacle-escape-exponent"),
    (BoundaryModulus, "boundary_modulus", "boundary-decay-modulus"),
    (Tube, "tube", "narrow-tube-crossing-probability"),
    (NearOccupation, "near_occupation", "near-ball-occupation-floor"),
    (Doubling, "doubling", "greens-measure-doubling"),
    (AInfty, "a_infty", "greens-density-a-infinity"),
    (ExitTail, "exit_tail", "exit-time-tail-two-sided"),
    (Support, "support", "kernel-positivity-small-ball"),
    (Nonexistence, "nonexistence", "critical-drift-blowup-contrast"),
];

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Run one experiment. Deterministic: the report contents (runtime aside)
/// are a pure function of the configuration.
pub fn run_experiment(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, VerifyError> {
    cfg.validate().map_err(|e| VerifyError::Config(e.to_string()))?;
    if cfg.kind != kind.name() {
        return Err(VerifyError::Config(format!(
            "config kind {:?} does not match requested kind {:?}",
            cfg.kind,
            kind.name()
        )));
    }
    let started = Instant::now();
    let outcome = match kind {
        ExperimentKind::ResolventScaling => greens::resolvent_scaling(cfg),
        ExperimentKind::GreenNorm => greens::green_norm(cfg),
        ExperimentKind::ReverseHolder => greens::reverse_holder(cfg),
        ExperimentKind::Doubling => greens::doubling(cfg),
        ExperimentKind::AInfty => greens::a_infty(cfg),
        ExperimentKind::ExitFloor => occupation::exit_floor(cfg),
        ExperimentKind::MomentFactorial => occupation::moment_factorial(cfg),
        ExperimentKind::ExitOccupation => occupation::exit_occupation(cfg),
        ExperimentKind::OccupationClock => occupation::occupation_clock(cfg),
        ExperimentKind::SmallsetOccupation => occupation::smallset_occupation(cfg),
        ExperimentKind::SmallsetHitting => occupation::smallset_hitting(cfg),
        ExperimentKind::OccupationTail => occupation::occupation_tail(cfg),
        ExperimentKind::DensityExit => occupation::density_exit(cfg),
        ExperimentKind::NearOccupation => occupation::near_occupation(cfg),
        ExperimentKind::MaxPrinciple => pde::max_principle(cfg),
        ExperimentKind::DecayHalfball => pde::decay_halfball(cfg),
        ExperimentKind::LinEstimate => pde::lin_estimate(cfg),
        ExperimentKind::AntiHolder => pde::antiholder(cfg),
        ExperimentKind::BoundaryEscape => boundary::boundary_escape(cfg),
        ExperimentKind::BoundaryModulus => boundary::boundary_modulus(cfg),
        ExperimentKind::Tube => boundary::tube(cfg),
        ExperimentKind::Support => boundary::support(cfg),
        ExperimentKind::ExitTail => boundary::exit_tail(cfg),
        ExperimentKind::Nonexistence => residuals::nonexistence(cfg),
    }?;
    Ok(ExperimentReport {
        kind: kind.name().into(),
        claim: kind.claim().into(),
        params: outcome.params,
        quantities: outcome.quantities,
        verdict: outcome.verdict,
        seed: cfg.master_seed,
        registry_version: REGISTRY_VERSION.into(),
        runtime_ms: started.elapsed().as_millis(),
    })
}

/// What a kind's protocol produces before it is wrapped into a report.
pub(crate) struct Outcome {
    pub params: Vec<(String, String)>,
    pub quantities: Vec<Quantity>,
    pub verdict: Verdict,
}

/// Whether the configured process is the driftless unit-diffusion reference
/// (quantitative oracles apply) or a drifted/anisotropic member (structural
/// checks only, verdict at most inconclusive).
pub(crate) fn is_reference_process(cfg: &ExperimentConfig) -> bool {
    matches!(cfg.drift, DriftSpec::Zero)
        && matches!(cfg.diffusion, crate::config::DiffusionSpec::Identity)
}

/// Downgrade a passing verdict to inconclusive for non-reference processes.
pub(crate) fn grade(cfg: &ExperimentConfig, structurally_sound: bool, quantitative_ok: bool) -> Verdict {
    if is_reference_process(cfg) {
        if structurally_sound && quantitative_ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    } else if structurally_sound {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    }
}

/// Derived seed for a sub-run, keeping sub-ensembles on disjoint streams.
pub(crate) fn sub_seed(master: u64, tag: u64) -> u64 {
    master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Build a sub-ensemble from the config's field specs with adjusted
/// simulation parameters.
pub(crate) fn sub_ensemble(
    cfg: &ExperimentConfig,
    tag: u64,
    adjust: impl FnOnce(&mut SimConfig),
) -> Result<Ensemble, VerifyError> {
    let mut sim = cfg.sim.to_sim_config(sub_seed(cfg.master_seed, tag));
    adjust(&mut sim);
    let drift = cfg
        .drift
        .build(sim.dim)
        .map_err(|e| VerifyError::Config(e.to_string()))?;
    let diffusion = cfg
        .diffusion
        .build(sim.dim)
        .map_err(|e| VerifyError::Config(e.to_string()))?;
    Ensemble::new(sim, drift, diffusion).map_err(VerifyError::from)
}

/// Mean exit time of a region with the censored fraction.
pub(crate) fn mean_exit_time(
    ensemble: &Ensemble,
    region: &Region,
) -> Result<(MeanWithSe, f64), VerifyError> {
    let (moments, censored) = ensemble.fold_indices(
        || (RunningMoments::new(), 0u64),
        |(m, c), i| {
            let mut scan = crate::stopping::ExitScan::new(region);
            ensemble.walk(i, &mut scan)?;
            let rec = scan.finish();
            *c += u64::from(rec.is_censored());
            m.push(rec.stop_time());
            Ok(())
        },
        |a, b| {
            a.0.merge(b.0);
            a.1 += b.1;
        },
    )?;
    let frac = censored as f64 / moments.count() as f64;
    Ok((moments.into(), frac))
}

/// Survival curve `P(τ_region > t)` on a time grid (the horizon must cover
/// the grid; censored paths are exactly the survivors).
pub(crate) fn survival_curve(
    ensemble: &Ensemble,
    region: &Region,
    times: &[f64],
) -> Result<Vec<(f64, Counter)>, VerifyError> {
    let counters = ensemble.fold_indices(
        || vec![Counter::new(); times.len()],
        |acc, i| {
            let mut scan = crate::stopping::ExitScan::new(region);
            ensemble.walk(i, &mut scan)?;
            let stop = match scan.finish() {
                crate::stopping::ExitRecord::Exited { time, .. } => time,
                crate::stopping::ExitRecord::Censored { horizon, .. } => horizon + 1.0,
            };
            for (slot, &t) in acc.iter_mut().zip(times) {
                slot.push(stop > t);
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        },
    )?;
    Ok(times.iter().cloned().zip(counters).collect())
}

/// Default (acceptance-grade) configuration per kind; quantitative kinds are
/// configured on the driftless unit-diffusion reference process.
impl ExperimentKind {
    pub fn default_config(&self) -> ExperimentConfig {
        let bm = |dim: usize, dt: f64, horizon: f64, n_paths: u64, start: Vec<f64>| SimBlock {
            dim,
            dt,
            horizon,
            n_paths,
            start,
            truncation: crate::simulate::Truncation::DtCoupled,
        };
        let mut cfg = ExperimentConfig {
            version: 1,
            kind: self.name().into(),
            master_seed: 0x5EED_0001,
            drift: DriftSpec::Zero,
            diffusion: crate::config::DiffusionSpec::Identity,
            sim: bm(3, 1e-3, 1.0, 100_000, vec![0.0, 0.0, 0.0]),
            analysis: Default::default(),
            negative_control: false,
            output: None,
        };
        let a = &mut cfg.analysis;
        match self {
            ExperimentKind::ResolventScaling => {
                cfg.sim = bm(3, 2e-2, 14.0, 200_000, vec![0.0; 3]);
                a.lambdas = Some(vec![1.0, 10.0, 100.0, 1e4]);
            }
            ExperimentKind::GreenNorm => {
                cfg.sim = bm(3, 4e-3, 14.0, 100_000, vec![0.0; 3]);
                a.lambdas = Some(vec![1.0, 4.0, 16.0, 64.0]);
                a.p = Some(3.0);
            }
            ExperimentKind::ReverseHolder => {
                cfg.sim = bm(3, 1e-3, 14.0, 200_000, vec![0.0; 3]);
                a.p = Some(super::thresholds::RH_EXPONENT);
                a.grid_h = Some(0.025);
                a.grid_extent = Some(1.5);
                a.n_balls = Some(super::thresholds::RH_N_BALLS as u32);
            }
            ExperimentKind::ExitFloor => {
                cfg.sim = bm(3, 1e-3, 1.0, 20_000, vec![0.0; 3]);
                a.radii = Some(vec![0.25, 0.5, 1.0, 2.0, 4.0]);
            }
            ExperimentKind::MomentFactorial => {
                cfg.sim = bm(3, 1e-3, 4.0, 200_000, vec![0.0; 3]);
                a.times = Some(vec![0.5, 4.0]);
                a.p = Some(3.0);
            }
            ExperimentKind::ExitOccupation => {
                cfg.sim = bm(3, 2.5e-4, 4.0, 50_000, vec![0.0; 3]);
                a.radii = Some(vec![0.5, 1.0, 2.0, 4.0]);
                a.p = Some(2.7);
            }
            ExperimentKind::OccupationClock => {
                cfg.sim = bm(3, 2e-3, 30.0, 100_000, vec![0.0; 3]);
                a.lambdas = Some(vec![0.0, 0.5, 2.0]);
                a.radius = Some(1.0);
            }
            ExperimentKind::MaxPrinciple => {
                cfg.sim = bm(3, 2e-4, 8.0, 20_000, vec![0.0; 3]);
                a.p = Some(2.7);
            }
            ExperimentKind::DecayHalfball => {
                // Deterministic quadrature kind; the ensemble is unused but
                // the sim block still validates.
                cfg.sim = bm(3, 1e-2, 1.0, 1, vec![0.0; 3]);
                a.lambdas = Some(vec![1.0, 4.0, 16.0, 64.0]);
                a.p = Some(2.7);
                a.radius = Some(1.0);
            }
            ExperimentKind::SmallsetOccupation => {
                cfg.sim = bm(3, 2.5e-4, 6.0, 100_000, vec![0.0; 3]);
                a.radius = Some(1.0);
                a.radii = Some(vec![0.1, 0.15, 0.2, 0.3, 0.5]);
            }
            ExperimentKind::SmallsetHitting => {
                cfg.sim = bm(3, 1e-5, 6.0, 100_000, vec![0.5, 0.0, 0.0]);
                a.radius = Some(1.0);
                a.radii = Some(vec![0.1, 0.15, 0.25, 0.4]);
            }
            ExperimentKind::OccupationTail => {
                cfg.sim = bm(3, 2.5e-4, 6.0, 100_000, vec![0.5, 0.0, 0.0]);
                a.radius = Some(1.0);
                a.radii = Some(vec![0.1, 0.2, 0.3]);
                a.theta = Some(0.1);
            }
            ExperimentKind::AntiHolder => {
                cfg.sim = bm(3, 2.5e-4, 6.0, 100_000, vec![0.25, 0.0, 0.0]);
                a.radius = Some(1.0);
            }
            ExperimentKind::LinEstimate => {
                cfg.sim = bm(3, 1e-2, 1.0, 1, vec![0.0; 3]);
                a.p = Some(2.7);
                a.radii = Some(vec![0.5, 1.0]);
            }
            ExperimentKind::DensityExit => {
                cfg.sim = bm(3, 2.5e-4, 6.0, 100_000, vec![0.5, 0.0, 0.0]);
                a.radius = Some(1.0);
                a.fractions = Some(vec![0.7, 0.8, 0.9]);
            }
            ExperimentKind::BoundaryEscape => {
                cfg.sim = bm(3, 1e-5, 4.0, 40_000, vec![0.1, 0.0, 0.0]);
                a.radius = Some(1.0);
                a.radii = Some(vec![0.1, 0.2, 0.4]);
            }
            ExperimentKind::BoundaryModulus => {
                cfg.sim = bm(3, 1e-5, 4.0, 40_000, vec![0.1, 0.0, 0.0]);
                a.radius = Some(1.0);
                a.radii = Some(vec![0.05, 0.1, 0.2, 0.4]);
            }
            ExperimentKind::Tube => {
                cfg.sim = bm(2, 2.5e-4, 40.0, 400_000, vec![1.0, 0.0]);
                a.radius = Some(1.0);
                a.kappa = Some(0.5);
                a.tube_lengths = Some(vec![2, 3, 4, 5]);
            }
            ExperimentKind::NearOccupation => {
                cfg.sim = bm(3, 2.5e-4, 16.0, 50_000, vec![0.0; 3]);
                a.radii = Some(vec![0.5, 1.0, 2.0]);
            }
            ExperimentKind::Doubling => {
                cfg.sim = bm(3, 2.5e-4, 6.0, 400_000, vec![0.0; 3]);
                a.radius = Some(1.0);
                a.grid_h = Some(0.025);
                a.n_balls = Some(10);
            }
            ExperimentKind::AInfty => {
                cfg.sim = bm(3, 2.5e-4, 6.0, 400_000, vec![0.0; 3]);
                a.radius = Some(1.0);
                a.grid_h = Some(0.025);
                a.fractions = Some(vec![0.02, 0.05, 0.1, 0.3, 1.0]);
            }
            ExperimentKind::ExitTail => {
                cfg.sim = bm(2, 1e-4, 2.5, 100_000, vec![0.0, 0.0]);
                a.radius = Some(1.0);
                a.times = Some(vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5]);
            }
            ExperimentKind::Support => {
                cfg.sim = bm(2, 2.5e-4, 0.5, 200_000, vec![0.3, 0.0]);
                a.radius = Some(1.0);
                a.radii = Some(vec![0.1, 0.15, 0.25, 0.4]);
                a.times = Some(vec![0.5]);
            }
            ExperimentKind::Nonexistence => {
                cfg.sim = bm(2, 1e-2, 1.0, 2_000, vec![0.0, 0.0]);
                cfg.drift = DriftSpec::InverseRadial {
                    support_radius: None,
                };
                a.dt_schedule = Some(vec![1e-2, 1e-3, 1e-4]);
            }
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique_and_resolvable() {
        let all = ExperimentKind::all();
        assert_eq!(all.len(), 24);
        for k in all {
            assert_eq!(ExperimentKind::from_name(k.name()), Some(*k));
            assert!(!k.claim().is_empty());
        }
        assert_eq!(ExperimentKind::from_name("no_such"), None);
    }

    #[test]
    fn default_configs_validate() {
        for k in ExperimentKind::all() {
            let cfg = k.default_config();
            cfg.validate()
                .unwrap_or_else(|e| panic!("default config for {k} invalid: {e}"));
        }
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let cfg = ExperimentKind::ExitTail.default_config();
        let err = run_experiment(ExperimentKind::Tube, &cfg).unwrap_err();
        assert!(matches!(err, VerifyError::Config(_)));
    }
}
