//! `csmr`: simulate, reconstruct, compare and benchmark.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csmri::admm::ReconParams;
use csmri::bench::{parse_worker_list, strong_scaling};
use csmri::dataset::{simulate, Dataset, SimulationConfig};
use csmri::error::file_err;
use csmri::io::{read_complex, write_complex};
use csmri::metrics::compare_images;
use csmri::nudft::OpMode;
use csmri::recon::{reconstruct, Method, ReconOptions, ReductionOrder, RunReport};
use csmri::{Precision, Real};

#[derive(Parser)]
#[command(name = "csmr", version, about = "Compressed-sensing MRI reconstruction")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a radial multi-coil phantom dataset.
    Simulate(SimulateArgs),
    /// Reconstruct an image from a dataset directory.
    Reconstruct(ReconstructArgs),
    /// Compare two images by per-pixel relative difference.
    Compare(CompareArgs),
    /// Strong-scaling benchmark over worker counts.
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 128)]
    nx: usize,
    #[arg(long, default_value_t = 64)]
    ny: usize,
    #[arg(long, default_value_t = 12)]
    coils: usize,
    #[arg(long, default_value_t = 101)]
    readouts: usize,
    #[arg(long, default_value_t = 128)]
    samples: usize,
    /// Readout undersampling factor (≥ 1).
    #[arg(long, default_value_t = 8.0)]
    undersample: f64,
    /// Add complex Gaussian noise at this SNR in dB.
    #[arg(long)]
    noise_snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = csmri::dataset::DEFAULT_COIL_RADIUS_SCALE)]
    coil_radius_scale: f64,
    /// Coil profile width in pixels [default: 0.4·max(nx, ny)].
    #[arg(long)]
    coil_width: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Adjoint,
    Admm,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => Precision::Single,
            PrecisionArg::F64 => Precision::Double,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OpModeArg {
    Materialized,
    Separable,
    Auto,
}

impl From<OpModeArg> for OpMode {
    fn from(m: OpModeArg) -> Self {
        match m {
            OpModeArg::Materialized => OpMode::Materialized,
            OpModeArg::Separable => OpMode::Separable,
            OpModeArg::Auto => OpMode::Auto,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = ReconParams::default().lambda)]
    lambda: f64,
    #[arg(long, default_value_t = ReconParams::default().beta)]
    beta: f64,
    #[arg(long, default_value_t = ReconParams::default().admm_max_iters)]
    admm_iters: usize,
    #[arg(long, default_value_t = ReconParams::default().admm_rtol)]
    admm_rtol: f64,
    #[arg(long, default_value_t = ReconParams::default().cg_max_iters)]
    cg_iters: usize,
    #[arg(long, default_value_t = ReconParams::default().cg_atol)]
    cg_atol: f64,
    #[arg(long, value_enum, default_value_t = PrecisionArg::F64)]
    precision: PrecisionArg,
    #[arg(long, value_enum, default_value_t = OpModeArg::Auto)]
    op_mode: OpModeArg,
    /// Reduce fixed blocks of this many samples in sample order, making
    /// results independent of the worker count.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    order_stable_block: Option<u64>,
}

impl SolverArgs {
    fn options(&self, method: Method, workers: usize) -> ReconOptions {
        ReconOptions {
            method,
            params: ReconParams {
                lambda: self.lambda,
                beta: self.beta,
                admm_max_iters: self.admm_iters,
                admm_rtol: self.admm_rtol,
                cg_max_iters: self.cg_iters,
                cg_atol: self.cg_atol,
            },
            workers,
            op_mode: self.op_mode.into(),
            reduction: match self.order_stable_block {
                Some(b) => ReductionOrder::SampleBlocks(b as usize),
                None => ReductionOrder::WorkerIndex,
            },
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct ReconstructArgs {
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Admm)]
    method: MethodArg,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output image (.cplx).
    #[arg(long)]
    out: PathBuf,
    /// Output run report (.json).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Image under test.
    #[arg(long)]
    a: PathBuf,
    /// Reference image.
    #[arg(long)]
    b: PathBuf,
    /// Output prefix for `_row.csv`, `_col.csv` and `_summary.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated worker counts, e.g. 1,2,4,8.
    #[arg(long, value_parser = parse_workers)]
    workers_list: WorkerList,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    repeat: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Admm)]
    method: MethodArg,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone)]
struct WorkerList(Vec<usize>);

fn parse_workers(s: &str) -> Result<WorkerList, String> {
    parse_worker_list(s).map(WorkerList).map_err(|e| e.to_string())
}

fn method(m: MethodArg) -> Method {
    match m {
        MethodArg::Adjoint => Method::Adjoint,
        MethodArg::Admm => Method::Admm,
    }
}

fn run_simulate(a: &SimulateArgs) -> csmri::Result<()> {
    let config = SimulationConfig {
        noise_snr: a.noise_snr,
        seed: a.seed,
        coil_radius_scale: a.coil_radius_scale,
        coil_width: a
            .coil_width
            .unwrap_or(csmri::dataset::DEFAULT_COIL_WIDTH_FRACTION * a.nx.max(a.ny) as f64),
        ..SimulationConfig::new(a.nx, a.ny, a.coils, a.readouts, a.samples, a.undersample)
    };
    let ds = simulate(&config)?;
    ds.write(&a.out)?;
    let m = ds.meta();
    println!(
        "wrote {}: {} readouts × {} samples, {} coils ({} measurements)",
        a.out.display(),
        m.n_readouts_kept,
        m.samples_per_readout,
        m.n_coils,
        m.total_measurements
    );
    Ok(())
}

fn recon_and_write<T: Real>(ds: &Dataset, opts: &ReconOptions, out: &Path) -> csmri::Result<RunReport> {
    let r = reconstruct::<T>(&ds.kspace, &ds.sens, opts)?;
    write_complex(out, &r.image)?;
    Ok(r.report)
}

fn run_reconstruct(a: &ReconstructArgs) -> csmri::Result<()> {
    let ds = Dataset::read(&a.data)?;
    let opts = a.solver.options(method(a.method), a.workers as usize);
    let report = match Precision::from(a.solver.precision) {
        Precision::Single => recon_and_write::<f32>(&ds, &opts, &a.out)?,
        Precision::Double => recon_and_write::<f64>(&ds, &opts, &a.out)?,
    };
    println!(
        "{} reconstruction ({}, {} worker(s)): {} ADMM iteration(s), {} allreduce call(s), {:.3} s",
        match report.method {
            Method::Adjoint => "adjoint",
            Method::Admm => "ADMM",
        },
        report.precision,
        report.workers,
        report.iterations.len(),
        report.comm.allreduce_calls,
        report.timings.get("total").copied().unwrap_or(0.0)
    );
    if let Some(path) = &a.report {
        write_file(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> csmri::Result<()> {
    fs::write(path, contents).map_err(file_err(path))
}

fn profile_csv(values: &[f64]) -> String {
    let mut s = String::from("index,reldiff\n");
    for (i, v) in values.iter().enumerate() {
        writeln!(s, "{i},{v:.9e}").unwrap();
    }
    s
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run_compare(a: &CompareArgs) -> csmri::Result<()> {
    let img_a = read_complex::<f64>(&a.a)?;
    let img_b = read_complex::<f64>(&a.b)?;
    let c = compare_images(&img_a, &img_b)?;
    write_file(&with_suffix(&a.out, "_row.csv"), profile_csv(&c.profiles.row))?;
    write_file(&with_suffix(&a.out, "_col.csv"), profile_csv(&c.profiles.col))?;
    let summary = serde_json::json!({
        "shape": c.shape,
        "median": c.summary.median,
        "mean": c.summary.mean,
        "max": c.summary.max,
        "mask_pixels": c.summary.mask_pixels,
        "mask_fraction": csmri::metrics::MASK_FRACTION,
        "eps": csmri::metrics::RELDIFF_EPS,
    });
    write_file(
        &with_suffix(&a.out, "_summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    println!(
        "in-mask relative difference: median {:.3e}, mean {:.3e}, max {:.3e} over {} pixels",
        c.summary.median, c.summary.mean, c.summary.max, c.summary.mask_pixels
    );
    Ok(())
}

fn run_benchmark(a: &BenchmarkArgs) -> csmri::Result<()> {
    let ds = Dataset::read(&a.data)?;
    let opts = ReconOptions {
        track_objective: false,
        ..a.solver.options(method(a.method), 1)
    };
    let table = strong_scaling(
        &ds.kspace,
        &ds.sens,
        &opts,
        a.solver.precision.into(),
        &a.workers_list.0,
        a.repeat as usize,
        |n, k, secs| eprintln!("workers {n} run {}: {secs:.3} s", k + 1),
    )?;
    let csv = table.to_csv();
    write_file(&a.out, &csv)?;
    print!("{csv}");
    if table.has_violations() {
        eprintln!("warning: wall time increased with more workers (see monotone_violation)");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Simulate(a) => run_simulate(a),
        Cmd::Reconstruct(a) => run_reconstruct(a),
        Cmd::Compare(a) => run_compare(a),
        Cmd::Benchmark(a) => run_benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(1)
        }
    }
}
