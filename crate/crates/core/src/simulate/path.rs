//! Materialized trajectories: positions on the uniform time grid plus the
//! per-step Gaussian draws that produced them, retained so residual
//! diagnostics can recompute the discrete stochastic integral exactly instead
//! of re-sampling.

use std::io::{self, Read, Write};

/// One discretized trajectory. `positions` holds `n_steps + 1` points of
/// dimension `dim` (flat, row-major); `draws` holds the `n_steps` standard
/// normal vectors consumed by the steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub dim: usize,
    pub dt: f64,
    /// Master seed of the generating ensemble.
    pub seed: u64,
    /// Index of this path within the ensemble.
    pub index: u64,
    pub(crate) positions: Vec<f64>,
    pub(crate) draws: Vec<f64>,
}

impl Path {
    pub fn n_steps(&self) -> usize {
        self.positions.len() / self.dim - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps())
    }

    #[inline]
    pub fn position(&self, k: usize) -> &[f64] {
        &self.positions[k * self.dim..(k + 1) * self.dim]
    }

    /// Gaussian draw used for the step from `position(k)` to `position(k+1)`.
    /// Empty when the path was read back from its binary form.
    #[inline]
    pub fn draw(&self, k: usize) -> &[f64] {
        &self.draws[k * self.dim..(k + 1) * self.dim]
    }

    pub fn has_draws(&self) -> bool {
        !self.draws.is_empty()
    }

    pub fn final_position(&self) -> &[f64] {
        self.position(self.n_steps())
    }

    /// `(time, position)` pairs along the grid.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        (0..=self.n_steps()).map(move |k| (self.time(k), self.position(k)))
    }

    /// Largest single-step displacement, used by exit-consistency checks.
    pub fn max_step_displacement(&self) -> f64 {
        (0..self.n_steps())
            .map(|k| crate::la::dist(self.position(k), self.position(k + 1)))
            .fold(0.0, f64::max)
    }

    /// Replay format: `d` (u32), `K` (u64), `dt` (f64), `seed` (u64), then
    /// the `K+1` positions as 64-bit floats, all little-endian.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.n_steps() as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.positions {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a path persisted by [`Path::write_binary`]. Draws are not part of
    /// the layout; the result replays positions only.
    pub fn read_binary<R: Read>(r: &mut R) -> io::Result<Path> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let k = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let dt = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        if dim == 0 || dim > super::MAX_DIM || !(dt > 0.0) {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "bad path header"));
        }
        let mut positions = vec![0.0f64; (k + 1) * dim];
        for v in positions.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        Ok(Path {
            dim,
            dt,
            seed,
            index: 0,
            positions,
            draws: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_path() -> Path {
        Path {
            dim: 2,
            dt: 0.25,
            seed: 99,
            index: 3,
            positions: vec![0.0, 0.0, 0.5, -0.25, 1.0, 0.125],
            draws: vec![1.0, -0.5, 1.0, 0.75],
        }
    }

    #[test]
    fn accessors() {
        let p = sample_path();
        assert_eq!(p.n_steps(), 2);
        assert_eq!(p.position(1), &[0.5, -0.25]);
        assert_eq!(p.draw(0), &[1.0, -0.5]);
        assert_eq!(p.horizon(), 0.5);
        assert!(p.max_step_displacement() > 0.0);
    }

    #[test]
    fn binary_round_trip_preserves_positions() {
        let p = sample_path();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        // 4 + 8 + 8 + 8 header bytes, then 6 f64s.
        assert_eq!(buf.len(), 28 + 6 * 8);
        let q = Path::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(q.dim, p.dim);
        assert_eq!(q.dt, p.dt);
        assert_eq!(q.seed, p.seed);
        assert_eq!(q.positions, p.positions);
        assert!(!q.has_draws());
    }

    #[test]
    fn truncated_stream_is_rejected() {
        let p = sample_path();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(Path::read_binary(&mut buf.as_slice()).is_err());
    }
}
