//! Adjoint (`Fᴴd`) reconstruction of the fully sampled and the factor-8
//! undersampled phantom, with centre-line relative-difference profiles
//! between single and double precision.
//!
//! cargo run --release --example adjoint_recon

use csmri::dataset::{simulate, SimulationConfig};
use csmri::metrics::{compare_images, nrmse_scaled};
use csmri::recon::{reconstruct_dyn, Method, ReconOptions};
use csmri::Precision;

fn main() -> csmri::Result<()> {
    let opts = ReconOptions {
        method: Method::Adjoint,
        ..Default::default()
    };
    for factor in [1.0, 8.0] {
        let mut config = SimulationConfig::small();
        config.undersample = factor;
        let ds = simulate(&config)?;
        let d = reconstruct_dyn(&ds.kspace, &ds.sens, &opts, Precision::Double)?.image;
        let s = reconstruct_dyn(&ds.kspace, &ds.sens, &opts, Precision::Single)?.image;
        let cmp = compare_images(&s, &d)?;
        println!(
            "factor {factor}: {} samples, scale-fitted NRMSE {:.4}, f32 vs f64 median {:.2e} max {:.2e}",
            ds.kspace.n_samples(),
            nrmse_scaled(&d, &ds.phantom)?,
            cmp.summary.median,
            cmp.summary.max
        );
        let every = |v: &[f64]| v.iter().step_by(16).map(|x| format!("{x:.1e}")).collect::<Vec<_>>().join(" ");
        println!("  row profile   {}", every(&cmp.profiles.row));
        println!("  column profile {}", every(&cmp.profiles.col));
    }
    Ok(())
}
