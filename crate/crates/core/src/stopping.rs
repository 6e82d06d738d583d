//! Path functionals: first exits, hitting times, occupation clocks, and
//! tube-crossing outcomes, all evaluated on the discrete time grid.
//!
//! Exits are detected at grid times with no bridge correction; estimators
//! built on these functionals carry an `O(√dt)` bias allowance and report
//! values along `dt` refinement schedules.

use std::ops::ControlFlow;
use std::sync::Arc;

use crate::inkspots::GridSet;
use crate::la;
use crate::simulate::{Path, StepVisitor};

#[derive(Debug, Clone, thiserror::Error)]
pub enum StopError {
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// A spatial region for stopping and occupation queries. Containment is in
/// the closed region.
#[derive(Debug, Clone)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
    /// Round cylinder `(0, length) × {x' : |x'| < radius}` with axis along
    /// the first coordinate.
    Cylinder { radius: f64, length: f64 },
    ComplementOfBall { center: Vec<f64>, radius: f64 },
    /// Occupied cells of a grid set.
    GridMask(Arc<GridSet>),
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    pub fn ball_at_origin(dim: usize, radius: f64) -> Self {
        Region::Ball {
            center: vec![0.0; dim],
            radius,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => la::dist_sq(x, center) <= radius * radius,
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                let d2 = la::dist_sq(x, center);
                d2 >= inner * inner && d2 <= outer * outer
            }
            Region::Cylinder { radius, length } => {
                x[0] >= 0.0
                    && x[0] <= *length
                    && la::norm_sq(&x[1..]) <= radius * radius
            }
            Region::ComplementOfBall { center, radius } => {
                la::dist_sq(x, center) >= radius * radius
            }
            Region::GridMask(set) => set.contains_point(x),
        }
    }
}

/// Which face of a cylinder an exit crossed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CylinderFace {
    /// Through the end at axial coordinate `length`.
    FarEnd,
    /// Through the lateral boundary.
    Side,
    /// Back through the base at axial coordinate zero.
    NearEnd,
}

/// Outcome of a first-exit scan.
#[derive(Debug, Clone, PartialEq)]
pub enum ExitRecord {
    Exited {
        time: f64,
        position: Vec<f64>,
        /// Face classification, for cylinder regions only.
        face: Option<CylinderFace>,
    },
    /// The path never left the region within its horizon.
    Censored { horizon: f64, position: Vec<f64> },
}

impl ExitRecord {
    pub fn time(&self) -> Option<f64> {
        match self {
            ExitRecord::Exited { time, .. } => Some(*time),
            ExitRecord::Censored { .. } => None,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, ExitRecord::Censored { .. })
    }

    /// The stopping time this record induces on the grid: exit time, or the
    /// horizon when censored.
    pub fn stop_time(&self) -> f64 {
        match self {
            ExitRecord::Exited { time, .. } => *time,
            ExitRecord::Censored { horizon, .. } => *horizon,
        }
    }
}

fn classify_face(region: &Region, x: &[f64]) -> Option<CylinderFace> {
    match region {
        Region::Cylinder { length, .. } => Some(if x[0] <= 0.0 {
            CylinderFace::NearEnd
        } else if x[0] >= *length {
            CylinderFace::FarEnd
        } else {
            CylinderFace::Side
        }),
        _ => None,
    }
}

/// Streaming first-exit scan, usable as a [`StepVisitor`] or over a
/// materialized path.
pub struct ExitScan<'a> {
    region: &'a Region,
    record: Option<ExitRecord>,
    last: Vec<f64>,
    last_t: f64,
}

impl<'a> ExitScan<'a> {
    pub fn new(region: &'a Region) -> Self {
        Self {
            region,
            record: None,
            last: Vec::new(),
            last_t: 0.0,
        }
    }

    /// The exit record, censored at the last time seen if no exit occurred.
    pub fn finish(self) -> ExitRecord {
        self.record.unwrap_or(ExitRecord::Censored {
            horizon: self.last_t,
            position: self.last,
        })
    }
}

impl StepVisitor for ExitScan<'_> {
    fn start(&mut self, x0: &[f64]) -> ControlFlow<()> {
        self.last = x0.to_vec();
        if !self.region.contains(x0) {
            // Start outside: immediate exit at time zero.
            self.record = Some(ExitRecord::Exited {
                time: 0.0,
                position: x0.to_vec(),
                face: classify_face(self.region, x0),
            });
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    }

    fn step(&mut self, _k: usize, t: f64, x: &[f64]) -> ControlFlow<()> {
        self.last_t = t;
        if !self.region.contains(x) {
            self.record = Some(ExitRecord::Exited {
                time: t,
                position: x.to_vec(),
                face: classify_face(self.region, x),
            });
            ControlFlow::Break(())
        } else {
            self.last.copy_from_slice(x);
            ControlFlow::Continue(())
        }
    }
}

/// First grid time at which the path leaves the closed region.
///
/// Precondition: the path starts inside the region.
pub fn first_exit(path: &Path, region: &Region) -> Result<ExitRecord, StopError> {
    if !region.contains(path.position(0)) {
        return Err(StopError::Precondition(format!(
            "path starts outside the region at {:?}",
            path.position(0)
        )));
    }
    let mut scan = ExitScan::new(region);
    let _ = scan.start(path.position(0));
    for k in 0..path.n_steps() {
        if scan.step(k, path.time(k + 1), path.position(k + 1)).is_break() {
            break;
        }
    }
    Ok(scan.finish())
}

/// First grid time with position in the closed target; `None` when the path
/// never reaches it within the horizon. A start inside the target hits at
/// time zero.
pub fn hitting_time(path: &Path, target: &Region) -> Option<f64> {
    (0..=path.n_steps()).find_map(|k| target.contains(path.position(k)).then(|| path.time(k)))
}

/// Discrete occupation clock of the set up to the stopping time: each grid
/// time `t_k < stop` with `x_k ∈ set` contributes a step, the final partial
/// step clipped to `stop − t_k` so the clock never exceeds the stopping
/// time.
pub fn occupation(path: &Path, set: &Region, stop: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..=path.n_steps() {
        let t = path.time(k);
        if t >= stop {
            break;
        }
        if set.contains(path.position(k)) {
            acc += path.dt.min(stop - t);
        }
    }
    acc
}

/// Outcome of a tube crossing attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum TubeOutcome {
    /// First exit through the far-end subdisk `{length} × {|x'| < (1−κ)R}`.
    Success { time: f64 },
    /// Exit through the lateral boundary, or through the far end outside the
    /// target subdisk.
    SideFailure,
    /// Exit back through the near base.
    BackFailure,
    Censored,
}

/// Classify the first exit of a path from a round cylinder of cross radius
/// `R` and length `n·R`, starting on the κ-subdisk at axial coordinate `R`.
pub fn tube_crossing(path: &Path, cylinder: &Region, kappa: f64) -> Result<TubeOutcome, StopError> {
    let radius = match cylinder {
        Region::Cylinder { radius, .. } => *radius,
        _ => return Err(StopError::Precondition("tube crossing needs a cylinder region".into())),
    };
    if !(0.5..1.0).contains(&kappa) {
        return Err(StopError::Precondition(format!(
            "kappa must lie in [1/2, 1), got {kappa}"
        )));
    }
    let x0 = path.position(0);
    if (x0[0] - radius).abs() > 1e-9 || la::norm(&x0[1..]) > kappa * radius + 1e-12 {
        return Err(StopError::Precondition(format!(
            "start {x0:?} is not on the κ-subdisk at axial coordinate {radius}"
        )));
    }
    let record = first_exit(path, cylinder)?;
    Ok(match record {
        ExitRecord::Censored { .. } => TubeOutcome::Censored,
        ExitRecord::Exited { time, position, face } => match face {
            Some(CylinderFace::NearEnd) => TubeOutcome::BackFailure,
            Some(CylinderFace::FarEnd)
                if la::norm(&position[1..]) < (1.0 - kappa) * radius =>
            {
                TubeOutcome::Success { time }
            }
            _ => TubeOutcome::SideFailure,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{Ensemble, SimConfig, Truncation};
    use approx::assert_relative_eq;

    /// Deterministic straight-line path `x(t) = x0 + v·t` on a dt-grid.
    fn line_path(x0: &[f64], v: &[f64], dt: f64, horizon: f64) -> Path {
        let d = x0.len();
        let k = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
        let mut positions = Vec::with_capacity((k + 1) * d);
        for step in 0..=k {
            let t = step as f64 * dt;
            for i in 0..d {
                positions.push(x0[i] + v[i] * t);
            }
        }
        Path {
            dim: d,
            dt,
            seed: 0,
            index: 0,
            positions,
            draws: vec![0.0; k * d],
        }
    }

    #[test]
    fn deterministic_radial_exit_from_unit_ball() {
        let p = line_path(&[0.0, 0.0], &[1.0, 0.0], 0.01, 2.0);
        let ball = Region::ball_at_origin(2, 1.0);
        let rec = first_exit(&p, &ball).unwrap();
        match rec {
            ExitRecord::Exited { time, position, .. } => {
                assert_relative_eq!(time, 1.01, epsilon = 1e-12); // first grid time strictly outside
                assert!(la::norm(&position) > 1.0);
            }
            _ => panic!("expected exit"),
        }
    }

    #[test]
    fn censored_when_never_exiting() {
        let p = line_path(&[0.0, 0.0], &[0.0, 0.0], 0.1, 1.0);
        let rec = first_exit(&p, &Region::ball_at_origin(2, 1.0)).unwrap();
        assert!(rec.is_censored());
        assert_eq!(rec.stop_time(), 1.0);
    }

    #[test]
    fn start_outside_region_is_a_precondition_error() {
        let p = line_path(&[5.0, 0.0], &[0.0, 0.0], 0.1, 1.0);
        assert!(first_exit(&p, &Region::ball_at_origin(2, 1.0)).is_err());
    }

    #[test]
    fn hitting_time_cases() {
        let target = Region::ball(vec![1.0, 0.0], 0.25);
        // Start inside the target → 0.
        let p = line_path(&[1.0, 0.1], &[0.0, 0.0], 0.1, 0.5);
        assert_eq!(hitting_time(&p, &target), Some(0.0));
        // Moving toward it hits at the first grid point in the closed set.
        let p = line_path(&[0.0, 0.0], &[1.0, 0.0], 0.05, 2.0);
        let t = hitting_time(&p, &target).unwrap();
        assert_relative_eq!(t, 0.75, epsilon = 1e-12);
        // Disjoint from the whole path range → censored.
        let p = line_path(&[0.0, 0.0], &[0.0, 1.0], 0.05, 1.0);
        assert_eq!(hitting_time(&p, &target), None);
    }

    #[test]
    fn occupation_basics() {
        let p = line_path(&[0.0, 0.0], &[1.0, 0.0], 0.1, 3.0);
        let ball = Region::ball_at_origin(2, 1.0);
        let rec = first_exit(&p, &ball).unwrap();
        let tau = rec.time().unwrap();
        // Occupation of the ambient region up to its own exit time equals the
        // exit time.
        assert_relative_eq!(occupation(&p, &ball, tau), tau, epsilon = 1e-12);
        // Empty set.
        let empty = Region::ball(vec![50.0, 50.0], 0.1);
        assert_eq!(occupation(&p, &empty, tau), 0.0);
        // Occupation never exceeds the stopping time.
        assert!(occupation(&p, &ball, 0.35) <= 0.35 + 1e-12);
    }

    #[test]
    fn tube_outcomes_for_deterministic_paths() {
        let cyl = Region::Cylinder {
            radius: 1.0,
            length: 3.0,
        };
        // Axial path from (R, 0) = (1, 0): success at t = (n−1)R = 2.
        let p = line_path(&[1.0, 0.0], &[1.0, 0.0], 0.01, 5.0);
        match tube_crossing(&p, &cyl, 0.5).unwrap() {
            TubeOutcome::Success { time } => assert_relative_eq!(time, 2.01, epsilon = 1e-12),
            other => panic!("expected success, got {other:?}"),
        }
        // Radial path: side failure.
        let p = line_path(&[1.0, 0.0], &[0.0, 1.0], 0.01, 5.0);
        assert_eq!(tube_crossing(&p, &cyl, 0.5).unwrap(), TubeOutcome::SideFailure);
        // Backward path: back failure.
        let p = line_path(&[1.0, 0.0], &[-1.0, 0.0], 0.01, 5.0);
        assert_eq!(tube_crossing(&p, &cyl, 0.5).unwrap(), TubeOutcome::BackFailure);
        // Bad start point.
        let p = line_path(&[0.2, 0.9], &[1.0, 0.0], 0.01, 1.0);
        assert!(tube_crossing(&p, &cyl, 0.5).is_err());
    }

    #[test]
    fn exit_monotonicity_and_position_consistency_on_brownian_paths() {
        let cfg = SimConfig {
            dim: 2,
            dt: 1e-3,
            horizon: 12.0,
            truncation: Truncation::DtCoupled,
            master_seed: 31,
            n_paths: 40,
            start: vec![0.0, 0.0],
        };
        let e = Ensemble::brownian(cfg).unwrap();
        let small = Region::ball_at_origin(2, 0.7);
        let big = Region::ball_at_origin(2, 1.0);
        for p in e.paths() {
            let p = p.unwrap();
            let a = first_exit(&p, &small).unwrap();
            let b = first_exit(&p, &big).unwrap();
            // Pathwise monotone in the radius.
            assert!(a.stop_time() <= b.stop_time() + 1e-12);
            if let ExitRecord::Exited { position, .. } = &b {
                let overshoot = p.max_step_displacement();
                let r = la::norm(position);
                assert!(r >= 1.0 - 1e-12 && r <= 1.0 + overshoot + 1e-12);
            }
        }
    }

    #[test]
    fn annulus_and_complement_containment() {
        let ann = Region::Annulus {
            center: vec![0.0, 0.0],
            inner: 0.5,
            outer: 1.0,
        };
        assert!(!ann.contains(&[0.1, 0.0]));
        assert!(ann.contains(&[0.7, 0.0]));
        assert!(!ann.contains(&[1.2, 0.0]));
        let comp = Region::ComplementOfBall {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        assert!(comp.contains(&[2.0, 0.0]));
        assert!(!comp.contains(&[0.2, 0.0]));
    }
}
