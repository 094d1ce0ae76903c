//! Materialized and separable encoding operators on the same shard: memory
//! footprint, agreement and time per normal-operator application.
//!
//! cargo run --release --example operator_modes

use std::time::Instant;

use csmri::dataset::{simulate, SimulationConfig};
use csmri::nudft::{materialized_bytes, DftOperator, OpMode};

fn main() -> csmri::Result<()> {
    let ds = simulate(&SimulationConfig::small())?;
    let traj = ds.kspace.trajectory();
    let grid = ds.sens.grid();
    println!(
        "{} samples on {:?}: materialized matrix {:.1} MiB (f64)",
        traj.len(),
        grid.shape(),
        materialized_bytes::<f64>(traj.len(), grid) as f64 / (1 << 20) as f64
    );
    let x = ds.phantom.clone();
    let mut outs = Vec::new();
    for mode in [OpMode::Materialized, OpMode::Separable] {
        let t = Instant::now();
        let op = DftOperator::<f64>::from_maps(traj, &ds.sens, mode)?;
        let build = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let reps = 5;
        let mut y = op.normal(&x)?;
        for _ in 1..reps {
            y = op.normal(&x)?;
        }
        println!(
            "{mode:?}: build {:.3} s, FᴴF x {:.1} ms",
            build,
            1e3 * t.elapsed().as_secs_f64() / reps as f64
        );
        outs.push(y);
    }
    let num: f64 = outs[0].data().iter().zip(outs[1].data()).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = outs[0].data().iter().map(|a| a.norm_sqr()).sum();
    println!("relative difference {:.2e}", (num / den).sqrt());
    Ok(())
}
