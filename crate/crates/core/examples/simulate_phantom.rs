//! Simulates the 128×64 radial dataset and writes it to a directory.
//!
//! cargo run --release --example simulate_phantom -- [out_dir]

use csmri::dataset::{simulate, SimulationConfig};

fn main() -> csmri::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "phantom_ds".into());
    let mut config = SimulationConfig::small();
    config.noise_snr = Some(30.0);
    config.seed = 7;
    let ds = simulate(&config)?;
    let meta = ds.meta();
    println!(
        "{} of {} readouts kept, {} samples each: {} samples × {} coils = {} measurements",
        meta.n_readouts_kept,
        config.readouts,
        meta.samples_per_readout,
        meta.n_samples,
        meta.n_coils,
        meta.total_measurements
    );
    let peak = ds.phantom.data().iter().map(|z| z.re).fold(f64::MIN, f64::max);
    let sos = ds.sens.sum_of_squares();
    let (lo, hi) = sos.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    println!("phantom peak {peak:.3}, coil sum-of-squares in [{lo:.3e}, {hi:.3e}]");
    ds.write(&out)?;
    println!("wrote {out}/");
    Ok(())
}
