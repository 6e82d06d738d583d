//! Benchmarks comparing the data-parallel ensemble fold against the
//! always-available sequential twin, for the plain step loop and for a
//! histogram-accumulating estimator.
//!
//! Run with `cargo bench -p driftlab`. The two drivers produce bit-identical
//! results (asserted here as a sanity check before timing).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use driftlab::fields::{DiffusionField, DriftField};
use driftlab::green::GridSpec;
use driftlab::simulate::{run_sharded, run_sharded_sequential, Ensemble, SimConfig, Truncation};
use driftlab::stats::RunningMoments;

fn bm_ensemble(n_paths: u64) -> Ensemble {
    Ensemble::brownian(SimConfig {
        dim: 3,
        dt: 1e-3,
        horizon: 1.0,
        truncation: Truncation::DtCoupled,
        master_seed: 42,
        n_paths,
        start: vec![0.0; 3],
    })
    .unwrap()
}

fn drifted_ensemble(n_paths: u64) -> Ensemble {
    Ensemble::new(
        SimConfig {
            dim: 2,
            dt: 1e-3,
            horizon: 1.0,
            truncation: Truncation::DtCoupled,
            master_seed: 42,
            n_paths,
            start: vec![0.0; 2],
        },
        DriftField::inverse_radial(2, None).unwrap(),
        DiffusionField::identity(2),
    )
    .unwrap()
}

fn final_norm_fold(e: &Ensemble, sequential: bool) -> f64 {
    let fold = |m: &mut RunningMoments, i: u64| {
        let mut last = LastPos(vec![0.0; e.config().dim]);
        e.walk(i, &mut last)?;
        m.push(last.0.iter().map(|v| v * v).sum());
        Ok(())
    };
    let merge = |a: &mut RunningMoments, b: RunningMoments| a.merge(b);
    if sequential {
        e.fold_indices_sequential(RunningMoments::new, fold, merge)
            .unwrap()
            .mean()
    } else {
        e.fold_indices(RunningMoments::new, fold, merge).unwrap().mean()
    }
}

struct LastPos(Vec<f64>);

impl driftlab::simulate::StepVisitor for LastPos {
    fn step(&mut self, _k: usize, _t: f64, x: &[f64]) -> std::ops::ControlFlow<()> {
        self.0.copy_from_slice(x);
        std::ops::ControlFlow::Continue(())
    }
}

fn histogram_fold(e: &Ensemble, sequential: bool) -> f64 {
    let grid = GridSpec::centered_box(e.config().dim, 2.0, 0.1);
    let n_cells = grid.n_cells();
    let fold = |acc: &mut Vec<f64>, i: u64| {
        struct Bin<'a> {
            grid: &'a GridSpec,
            acc: &'a mut Vec<f64>,
            dt: f64,
        }
        impl driftlab::simulate::StepVisitor for Bin<'_> {
            fn step(&mut self, _k: usize, _t: f64, x: &[f64]) -> std::ops::ControlFlow<()> {
                if let Some(c) = self.grid.cell_index(x) {
                    self.acc[c] += self.dt;
                }
                std::ops::ControlFlow::Continue(())
            }
        }
        let mut bin = Bin {
            grid: &grid,
            acc,
            dt: e.config().dt,
        };
        e.walk(i, &mut bin)
    };
    let merge = |a: &mut Vec<f64>, b: Vec<f64>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    };
    let out = if sequential {
        run_sharded_sequential(
            e.config().n_paths,
            |range| {
                let mut acc = vec![0.0; n_cells];
                for i in range {
                    fold(&mut acc, i)?;
                }
                Ok(acc)
            },
            merge,
        )
        .unwrap()
    } else {
        run_sharded(
            e.config().n_paths,
            |range| {
                let mut acc = vec![0.0; n_cells];
                for i in range {
                    fold(&mut acc, i)?;
                }
                Ok(acc)
            },
            merge,
        )
        .unwrap()
    };
    out.iter().sum()
}

fn bench_ensembles(c: &mut Criterion) {
    let n_paths = 2_000u64;
    let bm = bm_ensemble(n_paths);
    let drifted = drifted_ensemble(n_paths);

    // The two drivers must agree exactly before we time them.
    assert_eq!(
        final_norm_fold(&bm, false).to_bits(),
        final_norm_fold(&bm, true).to_bits()
    );

    let mut group = c.benchmark_group("ensemble_fold");
    group.sample_size(10);
    for (name, e) in [("brownian_d3", &bm), ("critical_drift_d2", &drifted)] {
        group.bench_with_input(BenchmarkId::new("parallel", name), e, |b, e| {
            b.iter(|| final_norm_fold(e, false))
        });
        group.bench_with_input(BenchmarkId::new("sequential", name), e, |b, e| {
            b.iter(|| final_norm_fold(e, true))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("histogram_fold");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| histogram_fold(&bm, false)));
    group.bench_function("sequential", |b| b.iter(|| histogram_fold(&bm, true)));
    group.finish();
}

criterion_group!(benches, bench_ensembles);
criterion_main!(benches);
