//! The blow-up contrast diagnostic: along the coupled refinement schedule
//! `(dt, M = dt^{-1/2})`, the discrete drift integral `Σ|b_M(x_k)|·dt` of
//! the critical inward field grows without bound, while the log-damped
//! integrable member stays bounded and converges. The contrast — not any
//! single limit value — is the acceptance.

use super::{sub_seed, Outcome};
use crate::config::{DriftSpec, ExperimentConfig};
use crate::simulate::{drift_integral, Ensemble, SimConfig, Truncation};
use crate::verify::thresholds as th;
use crate::verify::{Quantity, Verdict, VerifyError};

/// Median drift integral over the schedule for one drift spec.
fn median_schedule(
    cfg: &ExperimentConfig,
    spec: &DriftSpec,
    schedule: &[f64],
    tag: u64,
) -> Result<Vec<f64>, VerifyError> {
    let d = cfg.sim.dim;
    let mut medians = Vec::with_capacity(schedule.len());
    for (i, &dt) in schedule.iter().enumerate() {
        let sim = SimConfig {
            dim: d,
            dt,
            horizon: cfg.sim.horizon,
            truncation: Truncation::DtCoupled,
            master_seed: sub_seed(cfg.master_seed, tag * 100 + i as u64),
            n_paths: cfg.sim.n_paths,
            start: cfg.sim.start.clone(),
        };
        let drift = spec
            .build(d)
            .map_err(|e| VerifyError::Config(e.to_string()))?;
        let diffusion = cfg
            .diffusion
            .build(d)
            .map_err(|e| VerifyError::Config(e.to_string()))?;
        let ensemble = Ensemble::new(sim, drift, diffusion)?;
        let capped = ensemble.drift_capped().clone();
        let mut values = ensemble.fold_indices(
            Vec::new,
            |acc, idx| {
                let path = ensemble.path(idx)?;
                acc.push(drift_integral(&path, &capped));
                Ok(())
            },
            |a, mut b| a.append(&mut b),
        )?;
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            0.5 * (values[n / 2 - 1] + values[n / 2])
        };
        medians.push(median);
    }
    Ok(medians)
}

pub(crate) fn nonexistence(cfg: &ExperimentConfig) -> Result<Outcome, VerifyError> {
    let schedule = cfg
        .analysis
        .dt_schedule
        .clone()
        .unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]);
    if schedule.len() < 3 || schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(VerifyError::Config(
            "dt schedule must be strictly decreasing with at least 3 levels".into(),
        ));
    }

    // The two sides of the contrast. The negative control swaps the roles:
    // the blow-up claim is then made for the integrable member, which stays
    // bounded and fails the threshold.
    let critical = DriftSpec::InverseRadial {
        support_radius: None,
    };
    let member = DriftSpec::RadialLdMember { c: 1.0, beta: 1.0 };
    let (blowup_spec, bounded_spec) = if cfg.negative_control {
        (member.clone(), critical.clone())
    } else {
        (critical.clone(), member.clone())
    };

    let blowup = median_schedule(cfg, &blowup_spec, &schedule, 1)?;
    let bounded = median_schedule(cfg, &bounded_spec, &schedule, 2)?;

    let mut quantities = Vec::new();
    for (&dt, &m) in schedule.iter().zip(&blowup) {
        quantities.push(Quantity::point("blowup_median", dt, m, 0.0));
    }
    for (&dt, &m) in schedule.iter().zip(&bounded) {
        quantities.push(Quantity::point("bounded_median", dt, m, 0.0));
    }

    // Blow-up side: strictly increasing along the schedule and above the
    // frozen floor at the finest level.
    let increasing = blowup.windows(2).all(|w| w[1] > w[0]);
    let exceeds = *blowup.last().unwrap() >= th::NONEXISTENCE_MEDIAN_MIN;

    // Bounded side: increments shrink (or stay within a few percent of the
    // value) and the final median stays below the blow-up floor.
    let n = bounded.len();
    let d1 = (bounded[n - 2] - bounded[n - 3]).abs();
    let d2 = (bounded[n - 1] - bounded[n - 2]).abs();
    let converging = d2 <= (d1 * th::CONVERGENT_INCREMENT_DECAY)
        .max(th::CONVERGENT_INCREMENT_REL * bounded[n - 1].abs());
    let stays_bounded = *bounded.last().unwrap() < th::NONEXISTENCE_MEDIAN_MIN;

    quantities.push(Quantity::plain(
        "blowup_final_median",
        *blowup.last().unwrap(),
    ));
    quantities.push(Quantity::plain(
        "bounded_final_median",
        *bounded.last().unwrap(),
    ));

    let pass = increasing && exceeds && converging && stays_bounded;
    Ok(Outcome {
        params: vec![
            ("schedule".into(), format!("{schedule:?}")),
            ("horizon".into(), format!("{}", cfg.sim.horizon)),
            ("n_paths".into(), format!("{}", cfg.sim.n_paths)),
        ],
        quantities,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
    })
}
