//! Compressed-sensing MRI reconstruction from multi-coil radial k-space.
//!
//! The image is recovered by ADMM on
//! `‖F(ρ) − d‖² + λ‖Θρ‖₁`, where `F` is the coil-weighted non-uniform DFT
//! and `Θ` stacks circular finite differences. The least-squares subproblem
//! is solved by conjugate gradients on the normal equations, with the
//! k-space samples sharded across workers that meet only at an image-size
//! allreduce.
//!
//! Module map:
//! - [`tensor`]: dense complex tensors in single or double precision
//! - [`acquisition`]: trajectories, phantom, coil maps, simulation
//! - [`nudft`]: the forward/adjoint encoding operator
//! - [`sparse`]: finite differences and soft thresholding
//! - [`shard`]: shard plans, the SPMD runtime and communication stats
//! - [`admm`]: CG and the ADMM iteration
//! - [`recon`]: end-to-end reconstruction and run reports
//! - [`io`], [`dataset`], [`metrics`], [`bench`]: files, datasets,
//!   comparisons and scaling benchmarks

// NaN must fail these checks too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod admm;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod io;
pub mod metrics;
pub mod nudft;
pub mod recon;
pub mod shard;
pub mod sparse;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{ComplexTensor, Precision, Real};
