//! Ensemble pilot for the phase and glue thresholds.
//!
//! `cargo run --release --example phase_pilot -- <p> <discrete|embedded> <seeds>`

use gnlab_core::analysis::{census_trajectory, mean_fertile, stabilization_fraction, TrajectorySpec};
use gnlab_core::embed::Mode;
use gnlab_core::rng::trial_seed;
use gnlab_core::Kernel64;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let p: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1.75);
    let mode = if args.get(2).map(String::as_str) == Some("embedded") { Mode::Embedded } else { Mode::Discrete };
    let seeds: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(50);
    let spec = TrajectorySpec {
        kernel: Kernel64::power(p).expect("valid exponent"),
        mode,
        checkpoints: vec![10_000, 30_000, 100_000],
        k_max: 3,
        shape_cap: 2,
        n_trunc: if mode == Mode::Embedded { 10_000 } else { 0 },
    };
    let reports: Vec<_> = (0..seeds).map(|i| census_trajectory(&spec, trial_seed(777, i)).expect("run")).collect();
    for k in 1..=spec.k_max {
        println!("k={k} mean {:?} stabilized {:.2}", mean_fertile(&reports, k), stabilization_fraction(&reports, k));
    }
    for r in &reports {
        let (mid, last) = (&r.snapshots[1], &r.snapshots[2]);
        println!(
            "seed {:#x}: max degree {} at {} (v_hat {:?}); shapes {:?}; larger {} -> {}",
            r.seed, last.max_degree, last.max_degree_vertex, last.v_hat, last.inventory.shapes, mid.inventory.larger, last.inventory.larger
        );
    }
}
