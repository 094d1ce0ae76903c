//! The same ADMM reconstruction sharded over 1, 2, 4 and 8 workers, in the
//! default worker-order reduction and in the order-stable block mode.
//!
//! cargo run --release --example sharded_recon

use std::time::Instant;

use csmri::dataset::{simulate, SimulationConfig};
use csmri::recon::{reconstruct, ReconOptions, ReductionOrder};
use csmri::ComplexTensor;

fn rel_diff(a: &ComplexTensor<f64>, b: &ComplexTensor<f64>) -> f64 {
    let num: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.data().iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn main() -> csmri::Result<()> {
    let ds = simulate(&SimulationConfig::small())?;
    for reduction in [ReductionOrder::WorkerIndex, ReductionOrder::SampleBlocks(64)] {
        println!("{reduction:?}");
        let mut base = None;
        for workers in [1, 2, 4, 8] {
            let t = Instant::now();
            let opts = ReconOptions {
                workers,
                reduction,
                track_objective: false,
                ..Default::default()
            };
            let r = reconstruct::<f64>(&ds.kspace, &ds.sens, &opts)?;
            let secs = t.elapsed().as_secs_f64();
            let base = base.get_or_insert_with(|| r.image.clone());
            println!(
                "  P={workers}  {secs:6.2} s  allreduce calls {:3}  rel. diff vs P=1 {:.3e}",
                r.report.comm.allreduce_calls,
                rel_diff(&r.image, base)
            );
        }
    }
    Ok(())
}
