//! End-to-end reconstruction on a pool of SPMD workers.
//!
//! Each worker owns a contiguous k-space shard, builds the DFT operator for
//! it, and runs the identical ADMM iteration. Images are replicated; the
//! only communication is the allreduce of partial adjoint images.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::acquisition::{ImageGrid, KSpaceDataset, SensitivityMaps};
use crate::admm::{
    adjoint_of_data, admm_should_continue, admm_step, objective, AdmmState, IterationRecord,
    ReconParams,
};
use crate::error::{Error, Result};
use crate::nudft::{DftOperator, OpMode, DEFAULT_MEMORY_BUDGET};
use crate::shard::{
    make_block_aligned_plan, make_shard_plan, run_spmd_with, Collective, CommStats, Phase,
    ShardPlan, SpmdConfig,
};
use crate::tensor::{ComplexTensor, Precision, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// A single reduced `Fᴴd`.
    Adjoint,
    Admm,
}

/// How partial images are ordered inside the allreduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionOrder {
    /// One partial per worker, summed in worker order.
    WorkerIndex,
    /// Shards are cut at multiples of the block size and every block is a
    /// separate partial, so the summation order depends only on sample
    /// index and results are bit-identical for any worker count.
    SampleBlocks(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialImage {
    /// `ρ₀ = Fᴴd`, reduced in its own collective.
    Adjoint,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconOptions {
    pub method: Method,
    pub params: ReconParams,
    pub workers: usize,
    pub op_mode: OpMode,
    pub memory_budget: u64,
    pub reduction: ReductionOrder,
    pub init: InitialImage,
    /// Evaluate the objective at the start and after every iteration.
    pub track_objective: bool,
    #[serde(skip, default = "default_timeout")]
    pub barrier_timeout: Duration,
}

fn default_timeout() -> Duration {
    SpmdConfig::default().barrier_timeout
}

impl Default for ReconOptions {
    fn default() -> Self {
        Self {
            method: Method::Admm,
            params: ReconParams::default(),
            workers: 1,
            op_mode: OpMode::Auto,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            reduction: ReductionOrder::WorkerIndex,
            init: InitialImage::Adjoint,
            track_objective: true,
            barrier_timeout: default_timeout(),
        }
    }
}

/// Everything a run reports besides the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub precision: Precision,
    pub workers: usize,
    pub grid: ImageGrid,
    pub n_samples: usize,
    pub n_coils: usize,
    /// Whether shard operators were materialized (`auto` resolved).
    pub materialized: bool,
    pub params: ReconParams,
    pub initial_objective: Option<f64>,
    pub iterations: Vec<IterationRecord>,
    pub comm: CommStats,
    /// Wall-clock seconds per phase, measured on worker 0.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn final_objective(&self) -> Option<f64> {
        match self.iterations.last() {
            Some(r) => r.objective,
            None => self.initial_objective,
        }
    }

    /// Image-size allreduce calls implied by the iteration log: the setup
    /// reductions plus one per normal-operator application (each CG solve
    /// applies it once for the initial residual and once per iteration).
    pub fn expected_allreduce_calls(&self, init: InitialImage) -> u64 {
        let setup = match (self.method, init) {
            (Method::Adjoint, _) => 1,
            (Method::Admm, InitialImage::Adjoint) => 2,
            (Method::Admm, InitialImage::Zero) => 1,
        };
        setup
            + self
                .iterations
                .iter()
                .map(|r| r.cg_iterations as u64 + 1)
                .sum::<u64>()
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction<T> {
    pub image: ComplexTensor<T>,
    pub report: RunReport,
}

/// Builds the shard plan implied by the options.
pub fn plan_for(n_samples: usize, opts: &ReconOptions) -> Result<ShardPlan> {
    if opts.workers < 1 {
        return Err(Error::InvalidArgument("need at least one worker".into()));
    }
    match opts.reduction {
        ReductionOrder::WorkerIndex => make_shard_plan(n_samples, opts.workers),
        ReductionOrder::SampleBlocks(b) => make_block_aligned_plan(n_samples, opts.workers, b),
    }
}

struct WorkerOutput<T> {
    image: ComplexTensor<T>,
    initial_objective: Option<f64>,
    iterations: Vec<IterationRecord>,
    materialized: bool,
    timings: BTreeMap<String, f64>,
}

/// Runs the configured reconstruction in precision `T`.
pub fn reconstruct<T: Real>(
    ds: &KSpaceDataset,
    sens: &SensitivityMaps,
    opts: &ReconOptions,
) -> Result<Reconstruction<T>> {
    opts.params.validate()?;
    let grid = sens.grid();
    if ds.n_coils() != sens.n_coils() {
        return Err(Error::Shape(format!(
            "dataset has {} coils, sensitivity maps have {}",
            ds.n_coils(),
            sens.n_coils()
        )));
    }
    let n_samples = ds.n_samples();
    let plan = plan_for(n_samples, opts)?;
    plan.validate()?;
    let block = match opts.reduction {
        ReductionOrder::WorkerIndex => None,
        ReductionOrder::SampleBlocks(b) => Some(b),
    };
    let nc = ds.n_coils();
    let sens_t: Arc<ComplexTensor<T>> = Arc::new(sens.maps().cast());
    let data = ds.data().data();
    let traj = ds.trajectory();

    let config = SpmdConfig {
        barrier_timeout: opts.barrier_timeout,
    };
    let (outputs, comm) = run_spmd_with::<T, _, _>(plan.n_workers(), config, |comm| {
        let rank = comm.rank();
        let mut timings = BTreeMap::new();
        let t0 = Instant::now();
        let segments = plan.segments(rank, block);
        let mut ops = Vec::with_capacity(segments.len());
        let mut shard_data = Vec::with_capacity(segments.len());
        for seg in &segments {
            ops.push(DftOperator::new(
                &traj.slice(seg.clone()),
                sens_t.clone(),
                opts.op_mode,
                opts.memory_budget,
            )?);
            let rows = ComplexTensor::from_vec(
                &[seg.len(), nc],
                data[seg.start * nc..seg.end * nc].to_vec(),
            )?;
            shard_data.push(rows.cast::<T>());
        }
        let materialized = ops.iter().all(|o| o.is_materialized());
        timings.insert("operator_build".to_string(), t0.elapsed().as_secs_f64());

        let out = match opts.method {
            Method::Adjoint => {
                let t = Instant::now();
                let image = adjoint_of_data(&ops, &shard_data, comm, Phase::InitialImage)?;
                timings.insert("adjoint".to_string(), t.elapsed().as_secs_f64());
                WorkerOutput {
                    image,
                    initial_objective: None,
                    iterations: Vec::new(),
                    materialized,
                    timings,
                }
            }
            Method::Admm => run_admm(comm, &ops, &shard_data, grid, opts, materialized, timings)?,
        };
        Ok(out)
    })?;

    let mut outputs = outputs;
    let mut w0 = outputs.swap_remove(0);
    w0.timings.insert(
        "total".to_string(),
        w0.timings.values().copied().sum::<f64>(),
    );
    Ok(Reconstruction {
        report: RunReport {
            method: opts.method,
            precision: T::PRECISION,
            workers: plan.n_workers(),
            grid,
            n_samples,
            n_coils: nc,
            materialized: w0.materialized,
            params: opts.params,
            initial_objective: w0.initial_objective,
            iterations: w0.iterations,
            comm,
            timings: w0.timings,
        },
        image: w0.image,
    })
}

fn run_admm<T: Real, C: Collective<T> + ?Sized>(
    comm: &C,
    ops: &[DftOperator<T>],
    data: &[ComplexTensor<T>],
    grid: ImageGrid,
    opts: &ReconOptions,
    materialized: bool,
    mut timings: BTreeMap<String, f64>,
) -> Result<WorkerOutput<T>> {
    let params = &opts.params;
    let t = Instant::now();
    let rho0 = match opts.init {
        InitialImage::Adjoint => adjoint_of_data(ops, data, comm, Phase::InitialImage)?,
        InitialImage::Zero => ComplexTensor::zeros(&grid.shape()),
    };
    let fhd = adjoint_of_data(ops, data, comm, Phase::RhsBase)?;
    timings.insert("setup".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let initial_objective = if opts.track_objective {
        Some(objective(&rho0, ops, data, params.lambda, comm)?)
    } else {
        None
    };
    let mut state = AdmmState::new(rho0)?;
    let mut iterations = Vec::new();
    let mut i = 0;
    while admm_should_continue(i, params.admm_max_iters, state.alpha, params.admm_rtol) {
        let (next, cg) = admm_step(&state, &fhd, params, ops, comm)?;
        let obj = if opts.track_objective {
            Some(objective(&next.rho, ops, data, params.lambda, comm)?)
        } else {
            None
        };
        iterations.push(IterationRecord {
            iteration: next.iteration,
            alpha: next.alpha,
            cg_iterations: cg.iterations_used,
            cg_residual_sq: cg.final_residual_sq,
            objective: obj,
        });
        state = next;
        i += 1;
    }
    timings.insert("iterations".to_string(), t.elapsed().as_secs_f64());
    Ok(WorkerOutput {
        image: state.rho,
        initial_objective,
        iterations,
        materialized,
        timings,
    })
}

/// Runs in the precision named at runtime and returns a double-precision
/// image (single-precision results are widened exactly).
pub fn reconstruct_dyn(
    ds: &KSpaceDataset,
    sens: &SensitivityMaps,
    opts: &ReconOptions,
    precision: Precision,
) -> Result<Reconstruction<f64>> {
    match precision {
        Precision::Double => reconstruct::<f64>(ds, sens, opts),
        Precision::Single => {
            let r = reconstruct::<f32>(ds, sens, opts)?;
            Ok(Reconstruction {
                image: r.image.cast(),
                report: r.report,
            })
        }
    }
}
