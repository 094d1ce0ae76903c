//! Strong-scaling table for ADMM on a fixed dataset.
//!
//! cargo run --release --example strong_scaling -- [workers, e.g. 1,2,4] [repeat]

use csmri::bench::{parse_worker_list, strong_scaling};
use csmri::dataset::{simulate, SimulationConfig};
use csmri::nudft::OpMode;
use csmri::recon::ReconOptions;
use csmri::Precision;

fn main() -> csmri::Result<()> {
    let mut args = std::env::args().skip(1);
    let workers = parse_worker_list(&args.next().unwrap_or_else(|| "1,2,4".into()))?;
    let repeat = args.next().map_or(3, |s| s.parse().expect("repeat count"));
    let ds = simulate(&SimulationConfig::new(256, 128, 12, 101, 256, 16.0))?;
    println!(
        "256×128, {} samples × {} coils, separable operator, {} core(s) available",
        ds.kspace.n_samples(),
        ds.kspace.n_coils(),
        std::thread::available_parallelism().map_or(1, |n| n.get())
    );
    let opts = ReconOptions {
        op_mode: OpMode::Separable,
        track_objective: false,
        ..Default::default()
    };
    let table = strong_scaling(&ds.kspace, &ds.sens, &opts, Precision::Double, &workers, repeat, |n, k, s| {
        println!("  P={n} run {k}: {s:.2} s")
    })?;
    print!("{}", table.to_csv());
    Ok(())
}
