//! Deterministic data-parallel folds over path indices.
//!
//! Paths are split into [`ENSEMBLE_SHARDS`] fixed contiguous index ranges.
//! Each shard is folded sequentially by one worker; shard results are merged
//! strictly in shard order. Since the shard layout depends only on the path
//! count, the merged result is bit-identical for any worker count — and for
//! the sequential fallback compiled without the `parallel` feature.

use std::ops::Range;

use super::{Ensemble, SimError};

/// Fixed shard count, independent of the number of workers.
pub const ENSEMBLE_SHARDS: u64 = 64;

/// Contiguous index ranges covering `0..n_paths`, sizes differing by at most
/// one; empty trailing ranges are dropped.
pub fn shard_ranges(n_paths: u64) -> Vec<Range<u64>> {
    let shards = ENSEMBLE_SHARDS.min(n_paths.max(1));
    let base = n_paths / shards;
    let rem = n_paths % shards;
    let mut out = Vec::with_capacity(shards as usize);
    let mut lo = 0;
    for s in 0..shards {
        let len = base + u64::from(s < rem);
        if len > 0 {
            out.push(lo..lo + len);
        }
        lo += len;
    }
    out
}

/// Run `shard_fn` over every shard and merge the results in shard order.
///
/// Shards are processed in batches of the current worker count so that at
/// most one batch of partial results is alive at a time (per-shard
/// accumulators can be large, e.g. density grids). Errors are resolved
/// deterministically to the first failing shard in index order.
pub fn run_sharded<T: Send>(
    n_paths: u64,
    shard_fn: impl Fn(Range<u64>) -> Result<T, SimError> + Sync,
    mut merge: impl FnMut(&mut T, T),
) -> Result<T, SimError> {
    let ranges = shard_ranges(n_paths);
    if ranges.is_empty() {
        return Err(SimError::InvalidConfig("no paths to fold".into()));
    }
    let mut acc: Option<T> = None;
    for batch in ranges.chunks(batch_size()) {
        for result in batch_map(batch, &shard_fn) {
            let t = result?;
            match acc.as_mut() {
                None => acc = Some(t),
                Some(a) => merge(a, t),
            }
        }
    }
    Ok(acc.expect("at least one shard"))
}

/// Sequential twin of [`run_sharded`]; always available, used by the
/// benchmark suite and the scheduling-independence tests.
pub fn run_sharded_sequential<T: Send>(
    n_paths: u64,
    shard_fn: impl Fn(Range<u64>) -> Result<T, SimError> + Sync,
    mut merge: impl FnMut(&mut T, T),
) -> Result<T, SimError> {
    let ranges = shard_ranges(n_paths);
    if ranges.is_empty() {
        return Err(SimError::InvalidConfig("no paths to fold".into()));
    }
    let mut acc: Option<T> = None;
    for range in ranges {
        let t = shard_fn(range)?;
        match acc.as_mut() {
            None => acc = Some(t),
            Some(a) => merge(a, t),
        }
    }
    Ok(acc.expect("at least one shard"))
}

#[cfg(feature = "parallel")]
fn batch_size() -> usize {
    rayon::current_num_threads().max(1)
}

#[cfg(not(feature = "parallel"))]
fn batch_size() -> usize {
    1
}

#[cfg(feature = "parallel")]
fn batch_map<T: Send>(
    batch: &[Range<u64>],
    shard_fn: &(impl Fn(Range<u64>) -> Result<T, SimError> + Sync),
) -> Vec<Result<T, SimError>> {
    use rayon::prelude::*;
    batch.par_iter().map(|r| shard_fn(r.clone())).collect()
}

#[cfg(not(feature = "parallel"))]
fn batch_map<T: Send>(
    batch: &[Range<u64>],
    shard_fn: &(impl Fn(Range<u64>) -> Result<T, SimError> + Sync),
) -> Vec<Result<T, SimError>> {
    batch.iter().map(|r| shard_fn(r.clone())).collect()
}

impl Ensemble {
    /// Fold all paths into per-shard accumulators created by `init`, merging
    /// in shard order. `fold_path` typically calls [`Ensemble::walk`] or
    /// [`Ensemble::path`] for the given index.
    pub fn fold_indices<T: Send>(
        &self,
        init: impl Fn() -> T + Sync,
        fold_path: impl Fn(&mut T, u64) -> Result<(), SimError> + Sync,
        merge: impl FnMut(&mut T, T),
    ) -> Result<T, SimError> {
        run_sharded(
            self.config().n_paths,
            |range| {
                let mut t = init();
                for i in range {
                    fold_path(&mut t, i)?;
                }
                Ok(t)
            },
            merge,
        )
    }

    /// Sequential twin of [`Ensemble::fold_indices`].
    pub fn fold_indices_sequential<T: Send>(
        &self,
        init: impl Fn() -> T + Sync,
        fold_path: impl Fn(&mut T, u64) -> Result<(), SimError> + Sync,
        merge: impl FnMut(&mut T, T),
    ) -> Result<T, SimError> {
        run_sharded_sequential(
            self.config().n_paths,
            |range| {
                let mut t = init();
                for i in range {
                    fold_path(&mut t, i)?;
                }
                Ok(t)
            },
            merge,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{DiffusionField, DriftField};
    use crate::simulate::{SimConfig, Truncation};

    #[test]
    fn shard_layout_is_total_and_ordered() {
        for n in [1u64, 7, 63, 64, 65, 1000, 100_000] {
            let ranges = shard_ranges(n);
            assert!(ranges.len() <= ENSEMBLE_SHARDS as usize);
            assert_eq!(ranges.first().unwrap().start, 0);
            assert_eq!(ranges.last().unwrap().end, n);
            for w in ranges.windows(2) {
                assert_eq!(w[0].end, w[1].start);
            }
            let sizes: Vec<u64> = ranges.iter().map(|r| r.end - r.start).collect();
            let (mn, mx) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(mx - mn <= 1);
        }
    }

    #[test]
    fn parallel_and_sequential_folds_are_bit_identical() {
        let cfg = SimConfig {
            dim: 2,
            dt: 0.01,
            horizon: 0.5,
            truncation: Truncation::DtCoupled,
            master_seed: 77,
            n_paths: 500,
            start: vec![0.1, 0.0],
        };
        let e = Ensemble::new(
            cfg,
            DriftField::constant(vec![0.3, -0.1]),
            DiffusionField::identity(2),
        )
        .unwrap();
        let fold = |acc: &mut (f64, u64), i: u64| -> Result<(), SimError> {
            let p = e.path(i)?;
            acc.0 += crate::la::norm_sq(p.final_position());
            acc.1 += 1;
            Ok(())
        };
        let a = e
            .fold_indices(|| (0.0, 0u64), fold, |a, b| {
                a.0 += b.0;
                a.1 += b.1;
            })
            .unwrap();
        let b = e
            .fold_indices_sequential(|| (0.0, 0u64), fold, |a, b| {
                a.0 += b.0;
                a.1 += b.1;
            })
            .unwrap();
        assert_eq!(a.1, 500);
        // Bit-identical, not merely close.
        assert_eq!(a.0.to_bits(), b.0.to_bits());
    }

    #[test]
    fn errors_resolve_to_first_failing_shard() {
        let cfg = SimConfig {
            dim: 2,
            dt: 0.01,
            horizon: 0.1,
            truncation: Truncation::DtCoupled,
            master_seed: 1,
            n_paths: 320,
            start: vec![0.0, 0.0],
        };
        let e = Ensemble::brownian(cfg).unwrap();
        // Artificial failure on two shards; the reported index must be the
        // first in shard order every time.
        let failing = |_: &mut (), i: u64| -> Result<(), SimError> {
            if i == 250 || i == 60 {
                return Err(SimError::StepOverflow {
                    path_index: i,
                    step: 0,
                    state: vec![],
                });
            }
            Ok(())
        };
        for _ in 0..3 {
            let err = e.fold_indices(|| (), failing, |_, _| ()).unwrap_err();
            match err {
                SimError::StepOverflow { path_index, .. } => assert_eq!(path_index, 60),
                other => panic!("unexpected error {other:?}"),
            }
        }
    }
}
