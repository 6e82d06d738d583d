//! Estimation of resolvent functionals and Green's measures on grids, and
//! the measure-geometry statistics computed from the estimates (weighted
//! norms, reverse Hölder ratios, doubling ratios, A_∞ exponent fits).

mod analysis;
mod ballquad;
mod estimate;
mod io;

pub use analysis::{
    a_infty_exponent_fit, doubling_ratio, doubling_ratio_fn, lq_norm, reverse_holder_ratio,
    reverse_holder_ratio_fn, AInftyFit, ExpWeight, SubsetFamily,
};
pub use ballquad::{ball_average, ball_mass, BallQuad};
pub use estimate::{
    estimate_domain_green, estimate_domain_green_density, estimate_green_density,
    estimate_resolvent, MeanWithSe, TAIL_CUTOFF,
};

use crate::simulate::SimError;

#[derive(Debug, thiserror::Error)]
pub enum GreenError {
    #[error(
        "horizon {horizon} leaves discount tail e^(-λT) = {tail:.2e} above {cutoff:.0e}; \
         need horizon ≥ {required:.3}"
    )]
    TailTruncation {
        lambda: f64,
        horizon: f64,
        tail: f64,
        cutoff: f64,
        required: f64,
    },

    #[error("censored fraction {fraction:.2e} exceeds the {limit:.0e} limit; extend the horizon")]
    CensoredExcess { fraction: f64, limit: f64 },

    #[error("zero mass on {0}; the ratio is undefined")]
    ZeroMass(String),

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("subset family is degenerate: {0}")]
    DegenerateFamily(String),

    #[error(transparent)]
    Sim(#[from] SimError),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A uniform cell grid over an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    /// Lower corner of the box.
    pub origin: Vec<f64>,
    /// Cell edge.
    pub h: f64,
    /// Cells per axis.
    pub shape: Vec<usize>,
}

impl GridSpec {
    /// Symmetric box `[-half_extent, half_extent]^d` with the largest cell
    /// edge not exceeding `h` that divides the box evenly.
    pub fn centered_box(dim: usize, half_extent: f64, h: f64) -> Self {
        let n = ((2.0 * half_extent / h) - 1e-9).ceil().max(1.0) as usize;
        let h = 2.0 * half_extent / n as f64;
        GridSpec {
            dim,
            origin: vec![-half_extent; dim],
            h,
            shape: vec![n; dim],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Flat index of the cell containing `x`, or `None` outside the box.
    #[inline]
    pub fn cell_index(&self, x: &[f64]) -> Option<usize> {
        let inv_h = 1.0 / self.h;
        let mut flat = 0usize;
        for k in 0..self.dim {
            let t = (x[k] - self.origin[k]) * inv_h;
            if t < 0.0 {
                return None;
            }
            let i = t as usize; // truncation == floor for t ≥ 0
            if i >= self.shape[k] {
                return None;
            }
            flat = flat * self.shape[k] + i;
        }
        Some(flat)
    }

    pub fn cell_coords(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        let mut idx = vec![0usize; self.dim];
        for k in (0..self.dim).rev() {
            idx[k] = rem % self.shape[k];
            rem /= self.shape[k];
        }
        idx
    }

    pub fn flat_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.shape)
            .fold(0usize, |f, (&i, &s)| f * s + i)
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.cell_coords(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.origin[k] + (i as f64 + 0.5) * self.h)
            .collect()
    }

    /// Aggregate pairs of cells along every axis (shape must be even). Used
    /// to compare an estimate against its own coarsening: the pair shares
    /// every path, so the difference isolates discretization sensitivity.
    pub fn coarsen(&self) -> Option<GridSpec> {
        if self.shape.iter().any(|s| s % 2 != 0) {
            return None;
        }
        Some(GridSpec {
            dim: self.dim,
            origin: self.origin.clone(),
            h: self.h * 2.0,
            shape: self.shape.iter().map(|s| s / 2).collect(),
        })
    }
}

/// Refined sub-histogram of the cell containing the ensemble start point (the
/// pole of the Green's function), two subdivision levels deep. Norm and ratio
/// quadratures read sub-cell values there to tame the `|x|^{2−d}` blow-up.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleRefinement {
    /// Flat index of the refined cell in the parent grid.
    pub cell: usize,
    /// Sub-cells per axis (4 = two subdivision levels).
    pub factor: usize,
    /// Density values on the sub-grid, same units as the parent values.
    pub values: Vec<f64>,
}

/// Histogram estimate of a discounted (or domain) Green's density.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenEstimate {
    pub grid: GridSpec,
    /// Density per cell: expected (discounted) occupation time per unit
    /// volume, per path.
    pub values: Vec<f64>,
    /// Batch-means standard error per cell (64 path blocks).
    pub stderr: Vec<f64>,
    /// Discount rate; `None` for domain Green estimates.
    pub lambda: Option<f64>,
    pub n_paths: u64,
    pub seed: u64,
    /// Per-path total (discounted) time over the horizon; for resolvent
    /// estimates this is the deterministic discrete integral of
    /// `e^{-λt}` and equals interior + exterior mass exactly.
    pub total_time: f64,
    /// Mass that fell outside the grid box.
    pub exterior_mass: f64,
    pub pole: Option<PoleRefinement>,
}

impl GreenEstimate {
    /// Synthetic estimate with density `f` sampled at cell centers; zero
    /// standard error. Used by unit tests and quadrature oracles.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = grid.n_cells();
        let values: Vec<f64> = (0..n).map(|i| f(&grid.cell_center(i))).collect();
        let interior: f64 = values.iter().sum::<f64>() * grid.cell_volume();
        GreenEstimate {
            stderr: vec![0.0; n],
            values,
            lambda: None,
            n_paths: 0,
            seed: 0,
            total_time: interior,
            exterior_mass: 0.0,
            pole: None,
            grid,
        }
    }

    /// Σ values · cell volume.
    pub fn interior_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Piecewise-constant density lookup, reading the refined pole sub-cells
    /// where available; zero outside the grid.
    pub fn density_at(&self, x: &[f64]) -> f64 {
        match self.grid.cell_index(x) {
            None => 0.0,
            Some(flat) => {
                if let Some(pole) = &self.pole {
                    if pole.cell == flat {
                        return self.pole_value_at(pole, x);
                    }
                }
                self.values[flat]
            }
        }
    }

    fn pole_value_at(&self, pole: &PoleRefinement, x: &[f64]) -> f64 {
        let coords = self.grid.cell_coords(pole.cell);
        let sub_h = self.grid.h / pole.factor as f64;
        let mut flat = 0usize;
        for k in 0..self.grid.dim {
            let lo = self.grid.origin[k] + coords[k] as f64 * self.grid.h;
            let i = (((x[k] - lo) / sub_h) as usize).min(pole.factor - 1);
            flat = flat * pole.factor + i;
        }
        pole.values[flat]
    }

    /// Aggregate to the 2×-coarser grid (pole refinement is dropped; values
    /// average, standard errors combine in quadrature as an upper bound).
    pub fn coarsened(&self) -> Option<GreenEstimate> {
        let coarse = self.grid.coarsen()?;
        let mut values = vec![0.0; coarse.n_cells()];
        let mut stderr = vec![0.0; coarse.n_cells()];
        let children = 1usize << self.grid.dim;
        for flat in 0..self.grid.n_cells() {
            let idx = self.grid.cell_coords(flat);
            let cidx: Vec<usize> = idx.iter().map(|i| i / 2).collect();
            let cflat = coarse.flat_index(&cidx);
            values[cflat] += self.values[flat] / children as f64;
            stderr[cflat] += self.stderr[flat] * self.stderr[flat];
        }
        for s in stderr.iter_mut() {
            *s = s.sqrt() / children as f64;
        }
        Some(GreenEstimate {
            grid: coarse,
            values,
            stderr,
            lambda: self.lambda,
            n_paths: self.n_paths,
            seed: self.seed,
            total_time: self.total_time,
            exterior_mass: self.exterior_mass,
            pole: None,
        })
    }
}
