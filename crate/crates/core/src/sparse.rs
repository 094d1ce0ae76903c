//! Finite-difference sparsifying transform and complex soft thresholding.
//!
//! `Θ` is a circular 1-D convolution with kernel `[1, −1]` along each image
//! axis; `Θᴴ` is the matching circular correlation summed over both axes, so
//! `ΘᴴΘ` is the periodic 5-point Laplacian.

use num_complex::Complex;

use crate::error::{shape_err, Error, Result};
use crate::tensor::{ComplexTensor, Real};

/// Forward-difference kernel applied along each axis.
pub const DIFF_KERNEL: [f64; 2] = [1.0, -1.0];

/// Axis-0 and axis-1 differences stacked as `(2 × Nx × Ny)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffStack<T> {
    diffs: ComplexTensor<T>,
}

impl<T: Real> DiffStack<T> {
    pub fn new(diffs: ComplexTensor<T>) -> Result<Self> {
        if diffs.ndim() != 3 || diffs.shape()[0] != 2 {
            return Err(shape_err(format!(
                "difference stack must be (2 × nx × ny), got {:?}",
                diffs.shape()
            )));
        }
        Ok(Self { diffs })
    }

    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            diffs: ComplexTensor::zeros(&[2, nx, ny]),
        }
    }

    pub fn tensor(&self) -> &ComplexTensor<T> {
        &self.diffs
    }

    pub fn into_tensor(self) -> ComplexTensor<T> {
        self.diffs
    }

    pub fn image_shape(&self) -> [usize; 2] {
        [self.diffs.shape()[1], self.diffs.shape()[2]]
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            diffs: self.diffs.add(&other.diffs)?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            diffs: self.diffs.sub(&other.diffs)?,
        })
    }

    /// Sum of elementwise complex magnitudes (ℓ1 norm).
    pub fn l1_norm(&self) -> T {
        let mut acc = T::zero();
        for z in self.diffs.data() {
            acc += z.norm();
        }
        acc
    }
}

fn check_image<T: Real>(image: &ComplexTensor<T>) -> Result<(usize, usize)> {
    if image.ndim() != 2 {
        return Err(shape_err(format!(
            "expected a 2-D image, got {:?}",
            image.shape()
        )));
    }
    Ok((image.shape()[0], image.shape()[1]))
}

/// Circular convolution (`correlate == false`) or correlation along one
/// axis of a row-major `(nx × ny)` buffer, accumulated into `out`.
///
/// Convolution: `out[i] += Σ_j kernel[j]·src[(i − j) mod n]`.
/// Correlation: `out[i] += Σ_j kernel[j]·src[(i + j) mod n]`.
fn circular_filter_axis<T: Real>(
    src: &[Complex<T>],
    out: &mut [Complex<T>],
    (nx, ny): (usize, usize),
    axis: usize,
    kernel: &[T],
    correlate: bool,
) {
    let n = if axis == 0 { nx } else { ny };
    for x in 0..nx {
        for y in 0..ny {
            let i = if axis == 0 { x } else { y };
            let mut acc = Complex::new(T::zero(), T::zero());
            for (j, &w) in kernel.iter().enumerate() {
                let shift = j % n;
                let s = if correlate {
                    (i + shift) % n
                } else {
                    (i + n - shift) % n
                };
                let p = if axis == 0 { s * ny + y } else { x * ny + s };
                acc += src[p] * w;
            }
            out[x * ny + y] += acc;
        }
    }
}

fn kernel<T: Real>() -> [T; 2] {
    [T::from_f64(DIFF_KERNEL[0]), T::from_f64(DIFF_KERNEL[1])]
}

/// `diffs[0][x,y] = ρ[x,y] − ρ[x−1,y]`, `diffs[1][x,y] = ρ[x,y] − ρ[x,y−1]` (circular).
pub fn theta<T: Real>(image: &ComplexTensor<T>) -> Result<DiffStack<T>> {
    let (nx, ny) = check_image(image)?;
    let n = nx * ny;
    let mut out = ComplexTensor::zeros(&[2, nx, ny]);
    let k = kernel::<T>();
    let (d0, d1) = out.data_mut().split_at_mut(n);
    circular_filter_axis(image.data(), d0, (nx, ny), 0, &k, false);
    circular_filter_axis(image.data(), d1, (nx, ny), 1, &k, false);
    DiffStack::new(out)
}

/// Exact adjoint of [`theta`] under the Hermitian inner product.
pub fn theta_adjoint<T: Real>(d: &DiffStack<T>) -> Result<ComplexTensor<T>> {
    let [nx, ny] = d.image_shape();
    let n = nx * ny;
    let mut out = ComplexTensor::zeros(&[nx, ny]);
    let k = kernel::<T>();
    let (d0, d1) = d.diffs.data().split_at(n);
    circular_filter_axis(d0, out.data_mut(), (nx, ny), 0, &k, true);
    circular_filter_axis(d1, out.data_mut(), (nx, ny), 1, &k, true);
    Ok(out)
}

/// `ΘᴴΘ x`.
pub fn theta_normal<T: Real>(image: &ComplexTensor<T>) -> Result<ComplexTensor<T>> {
    theta_adjoint(&theta(image)?)
}

#[inline]
fn shrink<T: Real>(z: Complex<T>, t: T) -> Complex<T> {
    let mag = z.norm();
    if mag <= t {
        Complex::new(T::zero(), T::zero())
    } else {
        z * (T::one() - t / mag)
    }
}

/// Elementwise magnitude shrinkage: `0` if `|z| ≤ t`, else `z·(1 − t/|z|)`.
pub fn soft_threshold<T: Real>(z: &ComplexTensor<T>, t: T) -> Result<ComplexTensor<T>> {
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be non-negative, got {t}"
        )));
    }
    if t == T::zero() {
        return Ok(z.clone());
    }
    Ok(z.map(|v| shrink(v, t)))
}

pub fn soft_threshold_stack<T: Real>(z: &DiffStack<T>, t: T) -> Result<DiffStack<T>> {
    DiffStack::new(soft_threshold(&z.diffs, t)?)
}
