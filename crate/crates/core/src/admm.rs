//! ADMM with a conjugate-gradient ρ-update.
//!
//! Scaled-dual iteration for `min ‖F(ρ) − d‖² + λ‖Θ(ρ)‖₁`:
//!
//! ```text
//! μ⁺ = S_{λ/β}(Θρ + η)
//! ρ⁺ = CG solve of (FᴴF + β/2·ΘᴴΘ) ρ = Fᴴd + β/2·Θᴴ(μ⁺ − η), warm-started at ρ
//! η⁺ = η + Θρ⁺ − μ⁺
//! ```
//!
//! All DFT work goes through a [`Collective`] so the same code runs on one
//! worker or on a sharded pool.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nudft::DftOperator;
use crate::shard::{Collective, Phase};
use crate::sparse::{soft_threshold_stack, theta, theta_adjoint, theta_normal, DiffStack};
use crate::tensor::{axpy, hermitian_dot, norm2_squared, ComplexTensor, Real};

/// Solver hyperparameters. Defaults are the reference configuration
/// (λ = 1e-7, β = 1, rtol = 1e-4, 5 ADMM iterations, atol = 1e-6, 20 CG iterations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconParams {
    pub lambda: f64,
    pub beta: f64,
    pub admm_rtol: f64,
    pub admm_max_iters: usize,
    pub cg_atol: f64,
    pub cg_max_iters: usize,
}

impl Default for ReconParams {
    fn default() -> Self {
        Self {
            lambda: 1e-7,
            beta: 1.0,
            admm_rtol: 1e-4,
            admm_max_iters: 5,
            cg_atol: 1e-6,
            cg_max_iters: 20,
        }
    }
}

impl ReconParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("beta", self.beta)?;
        positive("admm_rtol", self.admm_rtol)?;
        positive("cg_atol", self.cg_atol)?;
        if self.admm_max_iters < 1 || self.cg_max_iters < 1 {
            return Err(Error::InvalidArgument(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Soft-threshold level `λ/β`.
    pub fn threshold(&self) -> f64 {
        self.lambda / self.beta
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub solution: ComplexTensor<T>,
    pub iterations_used: usize,
    /// `τ = Re⟨r,r⟩` at return.
    pub final_residual_sq: f64,
    /// `τ` before the first iteration and after each one.
    pub residual_history: Vec<f64>,
}

/// Conjugate gradient for a Hermitian positive (semi)definite map.
///
/// Starts from `r₀ = b − A·x₀` and iterates while `i < max_iters` and
/// `τ > atol²`. Calls `apply_a` exactly `1 + iterations_used` times.
pub fn cg_solve<T, F>(
    mut apply_a: F,
    b: &ComplexTensor<T>,
    x0: &ComplexTensor<T>,
    atol: f64,
    max_iters: usize,
) -> Result<CgOutcome<T>>
where
    T: Real,
    F: FnMut(&ComplexTensor<T>) -> Result<ComplexTensor<T>>,
{
    b.ensure_same_shape(x0, "cg_solve b vs x0")?;
    let mut x = x0.clone();
    let ax = apply_a(&x)?;
    let mut r = b.sub(&ax)?;
    let mut d = r.clone();
    let mut tau = norm2_squared(&r);
    let check = |tau: T| {
        if tau.is_finite() {
            Ok(())
        } else {
            Err(Error::Divergence(format!("τ = {tau}")))
        }
    };
    check(tau)?;
    let tol_sq = atol * atol;
    let mut history = vec![tau.to_f64()];
    let mut i = 0;
    while i < max_iters && tau.to_f64() > tol_sq {
        let ad = apply_a(&d)?;
        let curvature = hermitian_dot(&d, &ad)?.re;
        let alpha = tau / curvature;
        x = axpy(Complex::new(alpha, T::zero()), &d, &x)?;
        r = axpy(Complex::new(-alpha, T::zero()), &ad, &r)?;
        let tau_next = norm2_squared(&r);
        check(tau_next)?;
        let beta = tau_next / tau;
        d = axpy(Complex::new(beta, T::zero()), &d, &r)?;
        tau = tau_next;
        history.push(tau.to_f64());
        i += 1;
    }
    Ok(CgOutcome {
        solution: x,
        iterations_used: i,
        final_residual_sq: tau.to_f64(),
        residual_history: history,
    })
}

/// `A·x = allreduce(Σ_segments Fᴴ_s F_s x) + β/2·ΘᴴΘ x`.
///
/// Only the DFT part is reduced; the `ΘᴴΘ` term is computed identically on
/// every worker.
pub fn normal_operator<T: Real, C: Collective<T> + ?Sized>(
    x: &ComplexTensor<T>,
    ops: &[DftOperator<T>],
    beta: f64,
    comm: &C,
) -> Result<ComplexTensor<T>> {
    let parts = ops.iter().map(|op| op.normal(x)).collect::<Result<Vec<_>>>()?;
    let dft = comm.allreduce(parts, Phase::NormalOperator)?;
    let reg = theta_normal(x)?;
    axpy(Complex::new(T::from_f64(beta / 2.0), T::zero()), &reg, &dft)
}

/// Reduced `Fᴴd` over all segments and workers.
pub fn adjoint_of_data<T: Real, C: Collective<T> + ?Sized>(
    ops: &[DftOperator<T>],
    data: &[ComplexTensor<T>],
    comm: &C,
    phase: Phase,
) -> Result<ComplexTensor<T>> {
    if ops.len() != data.len() {
        return Err(Error::InvalidArgument(format!(
            "{} operators for {} data segments",
            ops.len(),
            data.len()
        )));
    }
    let parts = ops
        .iter()
        .zip(data)
        .map(|(op, d)| op.adjoint(d))
        .collect::<Result<Vec<_>>>()?;
    comm.allreduce(parts, phase)
}

/// `b = Fᴴd + β/2·Θᴴ(μ − η)`.
pub fn build_rhs<T: Real>(
    fhd: &ComplexTensor<T>,
    mu: &DiffStack<T>,
    eta: &DiffStack<T>,
    beta: f64,
) -> Result<ComplexTensor<T>> {
    let back = theta_adjoint(&mu.sub(eta)?)?;
    fhd.ensure_same_shape(&back, "build_rhs")?;
    axpy(Complex::new(T::from_f64(beta / 2.0), T::zero()), &back, fhd)
}

/// `‖F(ρ) − d‖² + λ·Σ|Θ(ρ)|`, with the data term reduced across workers.
pub fn objective<T: Real, C: Collective<T> + ?Sized>(
    rho: &ComplexTensor<T>,
    ops: &[DftOperator<T>],
    data: &[ComplexTensor<T>],
    lambda: f64,
    comm: &C,
) -> Result<f64> {
    let mut local = 0.0;
    for (op, d) in ops.iter().zip(data) {
        let resid = op.forward(rho)?.sub(d)?;
        local += norm2_squared(&resid).to_f64();
    }
    let fidelity = comm.allreduce_scalar(local)?;
    Ok(fidelity + lambda * theta(rho)?.l1_norm().to_f64())
}

/// `‖new − old‖² / ‖old‖²` with `0/0 = 0` and `x/0 = ∞`.
pub fn relative_change<T: Real>(new: &ComplexTensor<T>, old: &ComplexTensor<T>) -> Result<f64> {
    let num = norm2_squared(&new.sub(old)?).to_f64();
    let den = norm2_squared(old).to_f64();
    Ok(if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    })
}

#[derive(Debug, Clone)]
pub struct AdmmState<T> {
    pub rho: ComplexTensor<T>,
    pub mu: DiffStack<T>,
    pub eta: DiffStack<T>,
    pub iteration: usize,
    /// Squared relative change of ρ in the last step.
    pub alpha: f64,
}

impl<T: Real> AdmmState<T> {
    /// `η = 0`, `μ = 0`, `α = 1`.
    pub fn new(rho0: ComplexTensor<T>) -> Result<Self> {
        if rho0.ndim() != 2 {
            return Err(Error::Shape(format!(
                "initial image must be 2-D, got {:?}",
                rho0.shape()
            )));
        }
        let (nx, ny) = (rho0.shape()[0], rho0.shape()[1]);
        Ok(Self {
            rho: rho0,
            mu: DiffStack::zeros(nx, ny),
            eta: DiffStack::zeros(nx, ny),
            iteration: 0,
            alpha: 1.0,
        })
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub alpha: f64,
    pub cg_iterations: usize,
    pub cg_residual_sq: f64,
    pub objective: Option<f64>,
}

/// One μ / ρ / η update.
pub fn admm_step<T: Real, C: Collective<T> + ?Sized>(
    state: &AdmmState<T>,
    fhd: &ComplexTensor<T>,
    params: &ReconParams,
    ops: &[DftOperator<T>],
    comm: &C,
) -> Result<(AdmmState<T>, CgOutcome<T>)> {
    let t = T::from_f64(params.threshold());
    let mu = soft_threshold_stack(&theta(&state.rho)?.add(&state.eta)?, t)?;
    let b = build_rhs(fhd, &mu, &state.eta, params.beta)?;
    let cg = cg_solve(
        |x| normal_operator(x, ops, params.beta, comm),
        &b,
        &state.rho,
        params.cg_atol,
        params.cg_max_iters,
    )?;
    let rho = cg.solution.clone();
    let alpha = relative_change(&rho, &state.rho)?;
    let eta = state.eta.add(&theta(&rho)?.sub(&mu)?)?;
    Ok((
        AdmmState {
            rho,
            mu,
            eta,
            iteration: state.iteration + 1,
            alpha,
        },
        cg,
    ))
}

/// Outer-loop guard: continue while `i < max_iters` and `α > rtol²`.
pub fn admm_should_continue(i: usize, max_iters: usize, alpha: f64, rtol: f64) -> bool {
    i < max_iters && alpha > rtol * rtol
}

/// Drives `step` under [`admm_should_continue`], starting from `α = 1`.
/// `step` receives the iteration index and returns the new `α`.
/// Returns the number of steps taken.
pub fn admm_loop(
    max_iters: usize,
    rtol: f64,
    mut step: impl FnMut(usize) -> Result<f64>,
) -> Result<usize> {
    let mut alpha = 1.0;
    let mut i = 0;
    while admm_should_continue(i, max_iters, alpha, rtol) {
        alpha = step(i)?;
        i += 1;
    }
    Ok(i)
}
