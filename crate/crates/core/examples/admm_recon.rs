//! ADMM reconstruction of the 128×64, 12-coil, factor-8 radial phantom,
//! compared with the plain adjoint.
//!
//! cargo run --release --example admm_recon -- [workers]

use std::time::Instant;

use csmri::dataset::{simulate, SimulationConfig};
use csmri::metrics::{nrmse, nrmse_scaled};
use csmri::recon::{reconstruct, Method, ReconOptions};

fn main() -> csmri::Result<()> {
    let workers = std::env::args().nth(1).map_or(1, |s| s.parse().expect("worker count"));
    let ds = simulate(&SimulationConfig::small())?;
    println!(
        "{} samples × {} coils on {:?}",
        ds.kspace.n_samples(),
        ds.kspace.n_coils(),
        ds.sens.grid().shape()
    );

    let adj = reconstruct::<f64>(
        &ds.kspace,
        &ds.sens,
        &ReconOptions {
            method: Method::Adjoint,
            workers,
            ..Default::default()
        },
    )?;

    let t = Instant::now();
    let opts = ReconOptions {
        workers,
        ..Default::default()
    };
    let admm = reconstruct::<f64>(&ds.kspace, &ds.sens, &opts)?;
    println!("ADMM with {workers} worker(s): {:.2} s", t.elapsed().as_secs_f64());

    let r = &admm.report;
    println!("initial objective {:.6e}", r.initial_objective.unwrap_or(f64::NAN));
    for it in &r.iterations {
        println!(
            "  iter {}  alpha {:.3e}  cg {:2}  tau {:.3e}  objective {:.6e}",
            it.iteration,
            it.alpha,
            it.cg_iterations,
            it.cg_residual_sq,
            it.objective.unwrap_or(f64::NAN)
        );
    }
    println!(
        "allreduce calls {} (expected {})",
        r.comm.allreduce_calls,
        r.expected_allreduce_calls(opts.init)
    );
    println!(
        "NRMSE  adjoint {:.4} (scale-fitted {:.4})  ADMM {:.4} (scale-fitted {:.4})",
        nrmse(&adj.image, &ds.phantom)?,
        nrmse_scaled(&adj.image, &ds.phantom)?,
        nrmse(&admm.image, &ds.phantom)?,
        nrmse_scaled(&admm.image, &ds.phantom)?,
    );
    Ok(())
}
