//! Multi-coil non-uniform DFT operator for one k-space shard.
//!
//! The operator is generated from two per-axis phase tables
//! `phase0[κ,x] = exp(−i2π k_κ[0] r_x)` and `phase1[κ,y] = exp(−i2π k_κ[1] r_y)`.
//! In materialized mode their row-wise outer product is stored as a dense
//! `(n_samples × Nx·Ny)` matrix; in separable mode the two tables are
//! applied as successive contractions and the matrix never exists.
//!
//! Coil encoding is fused in: forward multiplies by `s_γ` before the DFT,
//! adjoint multiplies by `conj(s_γ)` and sums over coils after it. The
//! adjoint carries no `1/N` normalization.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::acquisition::{ImageGrid, SensitivityMaps, Trajectory};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{gemm, ComplexTensor, MatRef, Real};

/// Default per-worker memory budget for a materialized operator (2 GiB).
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpMode {
    Materialized,
    Separable,
    /// Materialized when it fits the memory budget, separable otherwise.
    Auto,
}

impl std::str::FromStr for OpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "materialized" => Ok(OpMode::Materialized),
            "separable" => Ok(OpMode::Separable),
            "auto" => Ok(OpMode::Auto),
            _ => Err(Error::InvalidArgument(format!("unknown operator mode {s:?}"))),
        }
    }
}

/// Per-axis phase tables for one shard.
#[derive(Debug, Clone)]
pub struct DftFactors<T> {
    pub phase0: ComplexTensor<T>,
    pub phase1: ComplexTensor<T>,
    grid: ImageGrid,
}

impl<T: Real> DftFactors<T> {
    pub fn n_samples(&self) -> usize {
        self.phase0.shape()[0]
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }
}

/// Builds the phase tables. The phase argument is formed in `T`, so a
/// single-precision operator carries single-precision phase error.
pub fn build_factors<T: Real>(traj_shard: &Trajectory, grid: ImageGrid) -> Result<DftFactors<T>> {
    if traj_shard.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot build a DFT operator for an empty shard".into(),
        ));
    }
    let two_pi = T::PI() + T::PI();
    let r0: Vec<T> = (0..grid.nx).map(|x| T::from_f64(grid.coord0(x))).collect();
    let r1: Vec<T> = (0..grid.ny).map(|y| T::from_f64(grid.coord1(y))).collect();
    let n = traj_shard.len();
    let mut p0 = Vec::with_capacity(n * grid.nx);
    let mut p1 = Vec::with_capacity(n * grid.ny);
    for k in traj_shard.coords() {
        let (k0, k1) = (T::from_f64(k[0]), T::from_f64(k[1]));
        p0.extend(r0.iter().map(|&r| Complex::from_polar(T::one(), -(two_pi * (k0 * r)))));
        p1.extend(r1.iter().map(|&r| Complex::from_polar(T::one(), -(two_pi * (k1 * r)))));
    }
    Ok(DftFactors {
        phase0: ComplexTensor::from_vec(&[n, grid.nx], p0)?,
        phase1: ComplexTensor::from_vec(&[n, grid.ny], p1)?,
        grid,
    })
}

/// Bytes needed to materialize an operator for `n_samples` on `grid`.
pub fn materialized_bytes<T: Real>(n_samples: usize, grid: ImageGrid) -> u64 {
    n_samples as u64 * grid.n_pixels() as u64 * 2 * T::PRECISION.bytes_per_component() as u64
}

/// Row `κ`, column `x·Ny + y` holds `phase0[κ,x]·phase1[κ,y]`.
pub fn materialize<T: Real>(factors: &DftFactors<T>, budget_bytes: u64) -> Result<ComplexTensor<T>> {
    let grid = factors.grid;
    let n = factors.n_samples();
    let required = materialized_bytes::<T>(n, grid);
    if required > budget_bytes {
        return Err(Error::MemoryBudget {
            required,
            budget: budget_bytes,
        });
    }
    let p0 = factors.phase0.data();
    let p1 = factors.phase1.data();
    let mut m = Vec::with_capacity(n * grid.n_pixels());
    for k in 0..n {
        let row1 = &p1[k * grid.ny..(k + 1) * grid.ny];
        for &a in &p0[k * grid.nx..(k + 1) * grid.nx] {
            m.extend(row1.iter().map(|&b| a * b));
        }
    }
    ComplexTensor::from_vec(&[n, grid.n_pixels()], m)
}

/// Coil-fused forward/adjoint DFT for one shard of samples.
#[derive(Debug, Clone)]
pub struct DftOperator<T> {
    factors: DftFactors<T>,
    matrix: Option<ComplexTensor<T>>,
    sens: Arc<ComplexTensor<T>>,
    n_coils: usize,
}

impl<T: Real> DftOperator<T> {
    /// Builds the operator for a shard. `sens` is shared by every shard
    /// operator of a worker; it must be shaped `(N_c × Nx × Ny)`.
    pub fn new(
        traj_shard: &Trajectory,
        sens: Arc<ComplexTensor<T>>,
        mode: OpMode,
        budget_bytes: u64,
    ) -> Result<Self> {
        if sens.ndim() != 3 {
            return Err(shape_err(format!(
                "sensitivity maps must be 3-D, got {:?}",
                sens.shape()
            )));
        }
        let grid = ImageGrid::new(sens.shape()[1], sens.shape()[2])?;
        let factors = build_factors(traj_shard, grid)?;
        let matrix = match mode {
            OpMode::Separable => None,
            OpMode::Materialized => Some(materialize(&factors, budget_bytes)?),
            OpMode::Auto => {
                if materialized_bytes::<T>(traj_shard.len(), grid) <= budget_bytes {
                    Some(materialize(&factors, budget_bytes)?)
                } else {
                    None
                }
            }
        };
        let n_coils = sens.shape()[0];
        Ok(Self {
            factors,
            matrix,
            sens,
            n_coils,
        })
    }

    /// Convenience constructor from double-precision maps.
    pub fn from_maps(traj_shard: &Trajectory, sens: &SensitivityMaps, mode: OpMode) -> Result<Self> {
        Self::new(
            traj_shard,
            Arc::new(sens.maps().cast()),
            mode,
            DEFAULT_MEMORY_BUDGET,
        )
    }

    pub fn is_materialized(&self) -> bool {
        self.matrix.is_some()
    }

    pub fn factors(&self) -> &DftFactors<T> {
        &self.factors
    }

    pub fn grid(&self) -> ImageGrid {
        self.factors.grid
    }

    pub fn n_samples(&self) -> usize {
        self.factors.n_samples()
    }

    pub fn n_coils(&self) -> usize {
        self.n_coils
    }

    fn check_image(&self, image: &ComplexTensor<T>) -> Result<()> {
        let g = self.grid();
        if image.shape() != g.shape() {
            return Err(shape_err(format!(
                "image {:?} does not match operator grid {:?}",
                image.shape(),
                g.shape()
            )));
        }
        Ok(())
    }

    /// `result[κ,γ] = Σ_n s[γ,n]·ρ[n]·exp(−i2π k_κ·r_n)`, shape `(n_samples × N_c)`.
    pub fn forward(&self, image: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
        self.check_image(image)?;
        let grid = self.grid();
        let (nx, ny, n) = (grid.nx, grid.ny, grid.n_pixels());
        let nc = self.n_coils;
        let ns = self.n_samples();
        let rho = image.data();
        let s = self.sens.data();
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![zero; ns * nc];

        // Coil images, (N_c × Nx × Ny) row-major.
        let coil: Vec<Complex<T>> = s
            .chunks_exact(n)
            .flat_map(|sg| sg.iter().zip(rho).map(|(&a, &b)| a * b))
            .collect();

        match &self.matrix {
            Some(m) => {
                // (ns × n) · (n × N_c)
                gemm(
                    MatRef::row_major(m.data(), ns, n),
                    MatRef::row_major(&coil[..], nc, n).t(),
                    &mut out,
                    false,
                )?;
            }
            None => {
                // y-contraction for every coil at once:
                // t[κ, γ·Nx + x] = Σ_y e1[κ,y]·c[γ,x,y]
                let mut t = vec![zero; ns * nc * nx];
                gemm(
                    MatRef::row_major(self.factors.phase1.data(), ns, ny),
                    MatRef::row_major(&coil[..], nc * nx, ny).t(),
                    &mut t,
                    false,
                )?;
                // then x-contraction, row by row.
                let p0 = self.factors.phase0.data();
                for k in 0..ns {
                    let e0 = &p0[k * nx..(k + 1) * nx];
                    let tk = &t[k * nc * nx..(k + 1) * nc * nx];
                    for (g, tg) in tk.chunks_exact(nx).enumerate() {
                        let mut acc = zero;
                        for (&a, &b) in e0.iter().zip(tg) {
                            acc += a * b;
                        }
                        out[k * nc + g] = acc;
                    }
                }
            }
        }
        ComplexTensor::from_vec(&[ns, nc], out)
    }

    /// `p[n] = Σ_γ conj(s[γ,n]) Σ_κ d[κ,γ]·exp(+i2π k_κ·r_n)`, shape `(Nx × Ny)`.
    pub fn adjoint(&self, data_shard: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
        let nc = self.n_coils;
        let ns = self.n_samples();
        if data_shard.shape() != [ns, nc] {
            return Err(shape_err(format!(
                "data shard {:?} does not match operator ({ns} × {nc})",
                data_shard.shape()
            )));
        }
        let grid = self.grid();
        let (nx, ny, n) = (grid.nx, grid.ny, grid.n_pixels());
        let d = data_shard.data();
        let s = self.sens.data();
        let zero = Complex::new(T::zero(), T::zero());

        // Per-coil images, (N_c × Nx × Ny) row-major.
        let mut imgs = vec![zero; nc * n];
        match &self.matrix {
            Some(m) => {
                // Conjugated coil images, conj(d)ᵀ·M = conj(Mᴴ·d), so only
                // the data is copied.
                gemm(
                    MatRef::row_major(d, ns, nc).t().conj(),
                    MatRef::row_major(m.data(), ns, n),
                    &mut imgs,
                    false,
                )?;
                for v in imgs.iter_mut() {
                    *v = v.conj();
                }
            }
            None => {
                // w[γ·Nx + x, κ] = conj(e0[κ,x])·d[κ,γ]
                let p0 = self.factors.phase0.data();
                let mut w = vec![zero; nc * nx * ns];
                for g in 0..nc {
                    for x in 0..nx {
                        let row = &mut w[(g * nx + x) * ns..(g * nx + x + 1) * ns];
                        for (k, o) in row.iter_mut().enumerate() {
                            *o = p0[k * nx + x].conj() * d[k * nc + g];
                        }
                    }
                }
                // (N_c·Nx × ns) · conj(ns × Ny)
                gemm(
                    MatRef::row_major(&w[..], nc * nx, ns),
                    MatRef::row_major(self.factors.phase1.data(), ns, ny).conj(),
                    &mut imgs,
                    false,
                )?;
            }
        }
        let mut out = vec![zero; n];
        for (sg, img) in s.chunks_exact(n).zip(imgs.chunks_exact(n)) {
            for ((o, &v), &c) in out.iter_mut().zip(img).zip(sg) {
                *o += c.conj() * v;
            }
        }
        ComplexTensor::from_vec(&grid.shape(), out)
    }

    /// `Fᴴ F x` restricted to this shard.
    pub fn normal(&self, image: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
        self.adjoint(&self.forward(image)?)
    }
}
