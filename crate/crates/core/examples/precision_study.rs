//! Single vs double precision on the 128×64 phantom: adjoint and ADMM
//! reconstructions, compared inside the 10%-of-max mask.
//!
//! cargo run --release --example precision_study -- [admm_iters] [cg_iters] [adjoint|zero]

use csmri::dataset::{simulate, SimulationConfig};
use csmri::metrics::{compare_images, nrmse, nrmse_scaled};
use csmri::recon::{reconstruct_dyn, InitialImage, Method, ReconOptions, Reconstruction};
use csmri::Precision;

fn log(label: &str, r: &Reconstruction<f64>) {
    println!("{label}: initial objective {:.6e}", r.report.initial_objective.unwrap_or(f64::NAN));
    for it in &r.report.iterations {
        println!(
            "  iter {}  alpha {:.3e}  cg {:2}  tau {:.3e}  objective {:.6e}",
            it.iteration,
            it.alpha,
            it.cg_iterations,
            it.cg_residual_sq,
            it.objective.unwrap_or(f64::NAN)
        );
    }
}

fn main() -> csmri::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let count = |i: usize| args.get(i).map(|s| s.parse::<usize>().expect("iteration count"));
    let mut opts = ReconOptions::default();
    if let Some(n) = count(0) {
        opts.params.admm_max_iters = n;
    }
    if let Some(n) = count(1) {
        opts.params.cg_max_iters = n;
    }
    match args.get(2).map(String::as_str) {
        None | Some("adjoint") => {}
        Some("zero") => opts.init = InitialImage::Zero,
        Some(other) => panic!("unknown start {other:?}, expected adjoint or zero"),
    }
    let ds = simulate(&SimulationConfig::small())?;
    let (k, s) = (&ds.kspace, &ds.sens);

    let adj_opts = ReconOptions {
        method: Method::Adjoint,
        ..opts
    };
    let a64 = reconstruct_dyn(k, s, &adj_opts, Precision::Double)?;
    let a32 = reconstruct_dyn(k, s, &adj_opts, Precision::Single)?;
    let c = compare_images(&a32.image, &a64.image)?.summary;
    println!(
        "adjoint f32 vs f64: median {:.3e} mean {:.3e} max {:.3e} over {} px",
        c.median, c.mean, c.max, c.mask_pixels
    );

    println!(
        "ADMM with {} outer / {} CG iterations, {:?} start",
        opts.params.admm_max_iters, opts.params.cg_max_iters, opts.init
    );
    let m64 = reconstruct_dyn(k, s, &opts, Precision::Double)?;
    let m32 = reconstruct_dyn(k, s, &opts, Precision::Single)?;
    log("f64", &m64);
    log("f32", &m32);
    let c = compare_images(&m32.image, &m64.image)?.summary;
    println!(
        "ADMM f32 vs f64: median {:.3e} mean {:.3e} max {:.3e} over {} px",
        c.median, c.mean, c.max, c.mask_pixels
    );
    for (label, img) in [("f64", &m64.image), ("f32", &m32.image)] {
        println!(
            "  {label} NRMSE vs phantom {:.4} (scale-fitted {:.4})",
            nrmse(img, &ds.phantom)?,
            nrmse_scaled(img, &ds.phantom)?
        );
    }
    println!("  ‖f32 − f64‖/‖f64‖ = {:.3e}", nrmse(&m32.image, &m64.image)?);
    Ok(())
}
