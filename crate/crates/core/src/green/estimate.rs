//! Monte-Carlo estimation of resolvent functionals, discounted Green
//! densities, and domain Green measures.

use std::ops::ControlFlow;

use super::{GreenError, GreenEstimate, GridSpec, PoleRefinement};
use crate::simulate::{Ensemble, StepVisitor};
use crate::stats::RunningMoments;
use crate::stopping::Region;

/// Required bound on `e^{-λT}`: discounted-tail truncation cutoff.
pub const TAIL_CUTOFF: f64 = 1e-6;
/// Largest tolerated fraction of horizon-censored paths in domain-Green and
/// mean-exit estimators.
pub const CENSORED_LIMIT: f64 = 1e-3;
/// Pole cell subdivision: two levels, 4 sub-cells per axis.
const POLE_FACTOR: usize = 4;

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct MeanWithSe {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

impl From<RunningMoments> for MeanWithSe {
    fn from(m: RunningMoments) -> Self {
        MeanWithSe {
            mean: m.mean(),
            se: m.std_err(),
            n: m.count(),
        }
    }
}

impl MeanWithSe {
    pub fn within_z(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.se
    }
}

fn check_tail(lambda: f64, horizon: f64) -> Result<(), GreenError> {
    if !(lambda > 0.0) {
        return Err(GreenError::InvalidParameter {
            name: "lambda",
            message: format!("discount rate must be positive, got {lambda}"),
        });
    }
    let tail = (-lambda * horizon).exp();
    if tail >= TAIL_CUTOFF {
        return Err(GreenError::TailTruncation {
            lambda,
            horizon,
            tail,
            cutoff: TAIL_CUTOFF,
            required: (1.0 / TAIL_CUTOFF).ln() / lambda,
        });
    }
    Ok(())
}

/// Monte-Carlo estimate of `E ∫_0^∞ e^{-λt} f(x_t) dt` by the left-endpoint
/// discounted sum over the horizon. Requires `e^{-λT} <` [`TAIL_CUTOFF`].
pub fn estimate_resolvent(
    ensemble: &Ensemble,
    f: impl Fn(&[f64]) -> f64 + Sync,
    lambda: f64,
) -> Result<MeanWithSe, GreenError> {
    let cfg = ensemble.config();
    check_tail(lambda, cfg.n_steps() as f64 * cfg.dt)?;
    let rho = (-lambda * cfg.dt).exp();
    let dt = cfg.dt;
    let last = cfg.n_steps() - 1;

    struct Vis<'a, F> {
        f: &'a F,
        acc: f64,
        discount: f64,
        rho: f64,
        dt: f64,
        last: usize,
    }
    impl<F: Fn(&[f64]) -> f64> StepVisitor for Vis<'_, F> {
        fn start(&mut self, x0: &[f64]) -> ControlFlow<()> {
            self.acc += (self.f)(x0) * self.dt;
            ControlFlow::Continue(())
        }
        fn step(&mut self, k: usize, _t: f64, x: &[f64]) -> ControlFlow<()> {
            self.discount *= self.rho;
            if k < self.last {
                self.acc += (self.f)(x) * self.discount * self.dt;
            }
            ControlFlow::Continue(())
        }
    }

    let moments = ensemble.fold_indices(
        RunningMoments::new,
        |m, i| {
            let mut v = Vis {
                f: &f,
                acc: 0.0,
                discount: 1.0,
                rho,
                dt,
                last,
            };
            ensemble.walk(i, &mut v)?;
            m.push(v.acc);
            Ok(())
        },
        |a, b| a.merge(b),
    )?;
    Ok(moments.into())
}

/// Shard-local density accumulator. Merging tracks per-shard sums of squares
/// so the final per-cell standard error is a batch-means estimate over the 64
/// path blocks.
struct DensityAcc {
    sums: Vec<f64>,
    pole_sums: Vec<f64>,
    exterior: f64,
    stop_times: RunningMoments,
    censored: u64,
    n: u64,
    shard_sq: Option<Vec<f64>>,
    shards: u32,
}

impl DensityAcc {
    fn new(n_cells: usize, n_pole: usize) -> Self {
        DensityAcc {
            sums: vec![0.0; n_cells],
            pole_sums: vec![0.0; n_pole],
            exterior: 0.0,
            stop_times: RunningMoments::new(),
            censored: 0,
            n: 0,
            shard_sq: None,
            shards: 1,
        }
    }

    fn absorb(&mut self, other: DensityAcc) {
        if self.shard_sq.is_none() {
            let n = self.n.max(1) as f64;
            self.shard_sq = Some(self.sums.iter().map(|s| s * s / n).collect());
        }
        let sq = self.shard_sq.as_mut().unwrap();
        let on = other.n.max(1) as f64;
        for (i, s) in other.sums.iter().enumerate() {
            sq[i] += s * s / on;
            self.sums[i] += s;
        }
        for (a, b) in self.pole_sums.iter_mut().zip(&other.pole_sums) {
            *a += b;
        }
        self.exterior += other.exterior;
        self.stop_times.merge(other.stop_times);
        self.censored += other.censored;
        self.n += other.n;
        self.shards += other.shards;
    }

    fn finalize(
        self,
        grid: GridSpec,
        lambda: Option<f64>,
        seed: u64,
        total_time: f64,
        pole_cell: Option<usize>,
    ) -> GreenEstimate {
        let n = self.n as f64;
        let vol = grid.cell_volume();
        let values: Vec<f64> = self.sums.iter().map(|s| s / (n * vol)).collect();
        let stderr: Vec<f64> = match (&self.shard_sq, self.shards) {
            (Some(sq), shards) if shards >= 2 => {
                let s = shards as f64;
                self.sums
                    .iter()
                    .zip(sq)
                    .map(|(sum, q)| {
                        let ss = (q - sum * sum / n).max(0.0);
                        (ss / ((s - 1.0) * n)).sqrt() / vol
                    })
                    .collect()
            }
            _ => vec![f64::NAN; self.sums.len()],
        };
        let pole = pole_cell.map(|cell| {
            let sub_vol = vol / (POLE_FACTOR as f64).powi(grid.dim as i32);
            PoleRefinement {
                cell,
                factor: POLE_FACTOR,
                values: self.pole_sums.iter().map(|s| s / (n * sub_vol)).collect(),
            }
        });
        GreenEstimate {
            exterior_mass: self.exterior / n,
            grid,
            values,
            stderr,
            lambda,
            n_paths: self.n,
            seed,
            total_time,
            pole,
        }
    }
}

struct PoleIndexer {
    cell: usize,
    lo: Vec<f64>,
    sub_h: f64,
}

impl PoleIndexer {
    fn new(grid: &GridSpec, start: &[f64]) -> Option<Self> {
        let cell = grid.cell_index(start)?;
        let coords = grid.cell_coords(cell);
        let lo: Vec<f64> = coords
            .iter()
            .enumerate()
            .map(|(k, &i)| grid.origin[k] + i as f64 * grid.h)
            .collect();
        Some(PoleIndexer {
            cell,
            lo,
            sub_h: grid.h / POLE_FACTOR as f64,
        })
    }

    #[inline]
    fn sub_index(&self, x: &[f64]) -> usize {
        let mut flat = 0usize;
        for (k, lo) in self.lo.iter().enumerate() {
            let i = (((x[k] - lo) / self.sub_h) as usize).min(POLE_FACTOR - 1);
            flat = flat * POLE_FACTOR + i;
        }
        flat
    }
}

/// Histogram estimate of the discounted Green density `G_λ`: per-cell
/// discounted occupation divided by cell volume and path count. The cell
/// containing the start point is additionally refined two levels.
pub fn estimate_green_density(
    ensemble: &Ensemble,
    grid: GridSpec,
    lambda: f64,
) -> Result<GreenEstimate, GreenError> {
    let cfg = ensemble.config();
    check_tail(lambda, cfg.n_steps() as f64 * cfg.dt)?;
    let rho = (-lambda * cfg.dt).exp();
    let dt = cfg.dt;
    let last = cfg.n_steps() - 1;
    let pole = PoleIndexer::new(&grid, &cfg.start);
    let n_pole = pole
        .as_ref()
        .map(|_| POLE_FACTOR.pow(grid.dim as u32))
        .unwrap_or(0);

    struct Vis<'a> {
        grid: &'a GridSpec,
        pole: &'a Option<PoleIndexer>,
        acc: &'a mut DensityAcc,
        discount: f64,
        rho: f64,
        dt: f64,
        last: usize,
    }
    impl Vis<'_> {
        #[inline]
        fn bin(&mut self, x: &[f64], w: f64) {
            match self.grid.cell_index(x) {
                Some(i) => {
                    self.acc.sums[i] += w;
                    if let Some(p) = self.pole {
                        if p.cell == i {
                            self.acc.pole_sums[p.sub_index(x)] += w;
                        }
                    }
                }
                None => self.acc.exterior += w,
            }
        }
    }
    impl StepVisitor for Vis<'_> {
        fn start(&mut self, x0: &[f64]) -> ControlFlow<()> {
            self.bin(x0, self.dt);
            ControlFlow::Continue(())
        }
        fn step(&mut self, k: usize, _t: f64, x: &[f64]) -> ControlFlow<()> {
            self.discount *= self.rho;
            if k < self.last {
                let w = self.discount * self.dt;
                self.bin(x, w);
            }
            ControlFlow::Continue(())
        }
    }

    let acc = ensemble.fold_indices(
        || DensityAcc::new(grid.n_cells(), n_pole),
        |acc, i| {
            acc.n += 1;
            let mut v = Vis {
                grid: &grid,
                pole: &pole,
                acc,
                discount: 1.0,
                rho,
                dt,
                last,
            };
            ensemble.walk(i, &mut v)
        },
        DensityAcc::absorb,
    )?;
    // Deterministic discrete value of ∫₀ᵀ e^{-λt} dt on the step grid.
    let total_time = dt * (1.0 - rho.powi(cfg.n_steps() as i32)) / (1.0 - rho);
    Ok(acc.finalize(
        grid,
        Some(lambda),
        cfg.master_seed,
        total_time,
        pole.map(|p| p.cell),
    ))
}

/// Mean occupation of `gamma` before the first exit from `domain` (scalar
/// domain Green measure `G(Γ)`). Paths must start inside the domain; the
/// horizon must censor fewer than [`CENSORED_LIMIT`] of the paths.
pub fn estimate_domain_green(
    ensemble: &Ensemble,
    domain: &Region,
    gamma: &Region,
) -> Result<MeanWithSe, GreenError> {
    if !domain.contains(&ensemble.config().start) {
        return Err(GreenError::InvalidParameter {
            name: "domain",
            message: "paths must start inside the domain".into(),
        });
    }
    let dt = ensemble.config().dt;

    struct Vis<'a> {
        domain: &'a Region,
        gamma: &'a Region,
        occ: f64,
        dt: f64,
        exited: bool,
    }
    impl StepVisitor for Vis<'_> {
        fn start(&mut self, x0: &[f64]) -> ControlFlow<()> {
            self.occ += self.dt * f64::from(u8::from(self.gamma.contains(x0)));
            ControlFlow::Continue(())
        }
        fn step(&mut self, _k: usize, _t: f64, x: &[f64]) -> ControlFlow<()> {
            if !self.domain.contains(x) {
                self.exited = true;
                return ControlFlow::Break(());
            }
            self.occ += self.dt * f64::from(u8::from(self.gamma.contains(x)));
            ControlFlow::Continue(())
        }
    }

    let (moments, censored) = ensemble.fold_indices(
        || (RunningMoments::new(), 0u64),
        |(m, censored), i| {
            let mut v = Vis {
                domain,
                gamma,
                occ: 0.0,
                dt,
                exited: false,
            };
            ensemble.walk(i, &mut v)?;
            m.push(v.occ);
            *censored += u64::from(!v.exited);
            Ok(())
        },
        |a, b| {
            a.0.merge(b.0);
            a.1 += b.1;
        },
    )?;
    let frac = censored as f64 / moments.count() as f64;
    if frac > CENSORED_LIMIT {
        return Err(GreenError::CensoredExcess {
            fraction: frac,
            limit: CENSORED_LIMIT,
        });
    }
    Ok(moments.into())
}

/// Histogram of the domain Green density: per-cell occupation before the
/// first exit from `domain`, divided by cell volume and path count.
pub fn estimate_domain_green_density(
    ensemble: &Ensemble,
    domain: &Region,
    grid: GridSpec,
) -> Result<GreenEstimate, GreenError> {
    let cfg = ensemble.config();
    if !domain.contains(&cfg.start) {
        return Err(GreenError::InvalidParameter {
            name: "domain",
            message: "paths must start inside the domain".into(),
        });
    }
    let dt = cfg.dt;
    let pole = PoleIndexer::new(&grid, &cfg.start);
    let n_pole = pole
        .as_ref()
        .map(|_| POLE_FACTOR.pow(grid.dim as u32))
        .unwrap_or(0);

    struct Vis<'a> {
        grid: &'a GridSpec,
        pole: &'a Option<PoleIndexer>,
        domain: &'a Region,
        acc: &'a mut DensityAcc,
        dt: f64,
        exited: bool,
        stop: f64,
    }
    impl Vis<'_> {
        #[inline]
        fn bin(&mut self, x: &[f64]) {
            match self.grid.cell_index(x) {
                Some(i) => {
                    self.acc.sums[i] += self.dt;
                    if let Some(p) = self.pole {
                        if p.cell == i {
                            self.acc.pole_sums[p.sub_index(x)] += self.dt;
                        }
                    }
                }
                None => self.acc.exterior += self.dt,
            }
        }
    }
    impl StepVisitor for Vis<'_> {
        fn start(&mut self, x0: &[f64]) -> ControlFlow<()> {
            self.bin(x0);
            ControlFlow::Continue(())
        }
        fn step(&mut self, _k: usize, t: f64, x: &[f64]) -> ControlFlow<()> {
            if !self.domain.contains(x) {
                self.exited = true;
                self.stop = t;
                return ControlFlow::Break(());
            }
            self.bin(x);
            ControlFlow::Continue(())
        }
    }

    let acc = ensemble.fold_indices(
        || DensityAcc::new(grid.n_cells(), n_pole),
        |acc, i| {
            acc.n += 1;
            let mut v = Vis {
                grid: &grid,
                pole: &pole,
                domain,
                acc,
                dt,
                exited: false,
                stop: cfg.horizon,
            };
            ensemble.walk(i, &mut v)?;
            let (exited, stop) = (v.exited, v.stop);
            acc.censored += u64::from(!exited);
            acc.stop_times.push(stop);
            Ok(())
        },
        DensityAcc::absorb,
    )?;
    let frac = acc.censored as f64 / acc.n as f64;
    if frac > CENSORED_LIMIT {
        return Err(GreenError::CensoredExcess {
            fraction: frac,
            limit: CENSORED_LIMIT,
        });
    }
    let mean_exit = acc.stop_times.mean();
    Ok(acc.finalize(grid, None, cfg.master_seed, mean_exit, pole.map(|p| p.cell)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{SimConfig, Truncation};
    use approx::assert_relative_eq;

    fn bm(dim: usize, dt: f64, horizon: f64, n_paths: u64, seed: u64) -> Ensemble {
        Ensemble::brownian(SimConfig {
            dim,
            dt,
            horizon,
            truncation: Truncation::DtCoupled,
            master_seed: seed,
            n_paths,
            start: vec![0.0; dim],
        })
        .unwrap()
    }

    #[test]
    fn resolvent_of_zero_and_one() {
        let e = bm(2, 1e-2, 16.0, 50, 1);
        let z = estimate_resolvent(&e, |_| 0.0, 1.0).unwrap();
        assert_eq!(z.mean, 0.0);
        // f ≡ 1: the deterministic discrete integral of e^{-λt}, → 1/λ with
        // a left-endpoint bias of λ·dt/2 + O(dt²).
        // Every path carries the same deterministic value; the standard
        // error is pure cancellation residue of the moment formula.
        let one = estimate_resolvent(&e, |_| 1.0, 1.0).unwrap();
        assert!(one.se < 1e-6 * one.mean, "se {}", one.se);
        assert_relative_eq!(one.mean, 1.0, max_relative = 6e-3);
    }

    #[test]
    fn insufficient_horizon_is_rejected_with_requirement() {
        let e = bm(2, 1e-2, 4.0, 10, 2);
        match estimate_resolvent(&e, |_| 1.0, 1.0) {
            Err(GreenError::TailTruncation { required, .. }) => {
                assert!(required > 13.0 && required < 14.0);
            }
            other => panic!("expected tail truncation, got {other:?}"),
        }
    }

    #[test]
    fn density_mass_identity() {
        // Interior + exterior discounted mass equals the deterministic
        // discrete total exactly.
        let e = bm(2, 1e-2, 16.0, 400, 3);
        let grid = GridSpec::centered_box(2, 2.0, 0.25);
        let est = estimate_green_density(&e, grid, 1.0).unwrap();
        let total = est.interior_mass() + est.exterior_mass;
        assert_relative_eq!(total, est.total_time, max_relative = 1e-12);
        assert!(est.pole.is_some());
        assert!(est.values.iter().all(|v| *v >= 0.0));
        // Same seed → identical estimate.
        let est2 = estimate_green_density(&e, GridSpec::centered_box(2, 2.0, 0.25), 1.0).unwrap();
        assert_eq!(est.values, est2.values);
    }

    #[test]
    fn domain_green_of_whole_domain_is_exit_time() {
        let e = bm(2, 1e-3, 40.0, 400, 4);
        let ball = Region::ball_at_origin(2, 1.0);
        let occ = estimate_domain_green(&e, &ball, &ball).unwrap();
        // Mean exit time of the unit disk from 0 is 1/2; generous z-window
        // for the small ensemble.
        assert!(occ.within_z(0.5, 4.0), "mean {} se {}", occ.mean, occ.se);
        // Empty Γ → 0.
        let empty = Region::ball(vec![9.0, 9.0], 0.1);
        let zero = estimate_domain_green(&e, &ball, &empty).unwrap();
        assert_eq!(zero.mean, 0.0);
    }

    #[test]
    fn domain_density_total_matches_mean_exit_time() {
        let e = bm(2, 1e-3, 40.0, 400, 5);
        let ball = Region::ball_at_origin(2, 1.0);
        let est =
            estimate_domain_green_density(&e, &ball, GridSpec::centered_box(2, 1.0, 0.1)).unwrap();
        // All occupied positions are inside the grid box.
        assert!(est.exterior_mass.abs() < 1e-12);
        assert_relative_eq!(est.interior_mass(), est.total_time, max_relative = 1e-10);
    }

    #[test]
    fn start_outside_domain_is_an_error() {
        let e = bm(2, 1e-2, 1.0, 10, 6);
        let far = Region::ball(vec![5.0, 5.0], 0.5);
        assert!(estimate_domain_green(&e, &far, &far).is_err());
    }

    #[test]
    fn censoring_guard_fires_for_short_horizons() {
        let e = bm(2, 1e-2, 0.05, 100, 7);
        let ball = Region::ball_at_origin(2, 1.0);
        match estimate_domain_green(&e, &ball, &ball) {
            Err(GreenError::CensoredExcess { fraction, .. }) => assert!(fraction > 0.5),
            other => panic!("expected censoring error, got {other:?}"),
        }
    }
}
