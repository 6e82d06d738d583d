use driftlab::simulate::{Ensemble, SimConfig, Truncation};
use driftlab::green::{estimate_green_density, GridSpec};
use std::time::Instant;

fn main() {
    // BM d=3 walk throughput with binning, the acceptance-3 profile.
    let e = Ensemble::brownian(SimConfig {
        dim: 3, dt: 1e-3, horizon: 27.7, truncation: Truncation::DtCoupled,
        master_seed: 7, n_paths: 20_000, start: vec![0.0; 3],
    }).unwrap();
    let grid = GridSpec::centered_box(3, 2.4, 0.08);
    let t0 = Instant::now();
    let est = estimate_green_density(&e, grid, 0.5).unwrap();
    let dt_s = t0.elapsed().as_secs_f64();
    let steps = 20_000f64 * 27_700f64;
    println!("green density: {:.2} s for {:.1e} steps = {:.1} ns/step (both cores)", dt_s, steps, dt_s / steps * 1e9);
    println!("projected 1e6 paths: {:.0} s", dt_s * 50.0);
    println!("mass: {}", est.interior_mass() + est.exterior_mass);
}
