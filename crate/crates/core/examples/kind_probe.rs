//! Scaled-down sweep over every experiment kind, printing verdicts and key
//! quantities. Development aid for threshold calibration; not part of the
//! test suite.

use driftlab::verify::{run_experiment, ExperimentKind};

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).collect();
    let scale: u64 = std::env::var("PROBE_SCALE")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(10);
    for kind in ExperimentKind::all() {
        if !filter.is_empty() && !filter.iter().any(|f| kind.name().contains(f)) {
            continue;
        }
        let mut cfg = kind.default_config();
        cfg.sim.n_paths = (cfg.sim.n_paths / scale).max(500);
        let t0 = std::time::Instant::now();
        match run_experiment(*kind, &cfg) {
            Ok(report) => {
                println!(
                    "{:<22} {:<12} {:6.1}s",
                    kind.name(),
                    report.verdict.to_string(),
                    t0.elapsed().as_secs_f64()
                );
                for q in &report.quantities {
                    let x = q.x.map(|v| format!(" @{v:.4}")).unwrap_or_default();
                    let se = q.stderr.map(|v| format!(" ±{v:.3e}")).unwrap_or_default();
                    let or = q.oracle.map(|v| format!(" (oracle {v:.4})")).unwrap_or_default();
                    println!("    {:<28}{x} = {:.5}{se}{or}", q.name, q.value);
                }
            }
            Err(e) => println!("{:<22} ERROR: {e}", kind.name()),
        }
    }
}
