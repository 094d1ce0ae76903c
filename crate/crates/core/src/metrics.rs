//! Image comparison metrics: relative-difference maps, center-line
//! profiles, in-mask summaries and NRMSE.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::tensor::ComplexTensor;

/// Floor for the denominator, relative to `max|b|`.
pub const RELDIFF_EPS: f64 = 1e-6;
/// Pixels with `|b|` at or above this fraction of `max|b|` count as inside
/// the object.
pub const MASK_FRACTION: f64 = 0.1;

fn check_2d(a: &ComplexTensor<f64>, b: &ComplexTensor<f64>) -> Result<[usize; 2]> {
    if a.shape() != b.shape() {
        return Err(shape_err(format!(
            "cannot compare {:?} with {:?}",
            a.shape(),
            b.shape()
        )));
    }
    match *a.shape() {
        [nx, ny] => Ok([nx, ny]),
        ref s => Err(shape_err(format!("expected a 2-D image, got {s:?}"))),
    }
}

/// Per-pixel `|a−b| / max(|b|, ε·max|b|)`. Identical all-zero images give
/// zeros.
pub fn relative_difference(a: &ComplexTensor<f64>, b: &ComplexTensor<f64>) -> Result<Vec<f64>> {
    a.ensure_same_shape(b, "relative difference")?;
    let floor = RELDIFF_EPS * b.max_abs();
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let num = (x - y).norm();
            let den = y.norm().max(floor);
            if num == 0.0 {
                0.0
            } else {
                num / den
            }
        })
        .collect())
}

/// Center-line profiles of a per-pixel map on an `nx × ny` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profiles {
    /// Fixed `x = nx/2`, indexed by `y`.
    pub row: Vec<f64>,
    /// Fixed `y = ny/2`, indexed by `x`.
    pub col: Vec<f64>,
}

pub fn center_profiles(map: &[f64], nx: usize, ny: usize) -> Profiles {
    let (cx, cy) = (nx / 2, ny / 2);
    Profiles {
        row: map[cx * ny..(cx + 1) * ny].to_vec(),
        col: (0..nx).map(|x| map[x * ny + cy]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSummary {
    pub median: f64,
    pub mean: f64,
    pub max: f64,
    pub mask_pixels: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Statistics of `map` over pixels where `|b| ≥ MASK_FRACTION·max|b|`.
pub fn masked_summary(map: &[f64], b: &ComplexTensor<f64>) -> MaskSummary {
    let thresh = MASK_FRACTION * b.max_abs();
    let vals: Vec<f64> = map
        .iter()
        .zip(b.data())
        .filter(|(_, z)| z.norm() >= thresh)
        .map(|(&v, _)| v)
        .collect();
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let max = vals.iter().copied().fold(f64::NAN, f64::max);
    MaskSummary {
        median: median(vals),
        mean,
        max,
        mask_pixels: n,
    }
}

/// Full comparison of `a` against reference `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub shape: [usize; 2],
    pub profiles: Profiles,
    pub summary: MaskSummary,
}

pub fn compare_images(a: &ComplexTensor<f64>, b: &ComplexTensor<f64>) -> Result<Comparison> {
    let [nx, ny] = check_2d(a, b)?;
    let map = relative_difference(a, b)?;
    Ok(Comparison {
        shape: [nx, ny],
        profiles: center_profiles(&map, nx, ny),
        summary: masked_summary(&map, b),
    })
}

/// `‖a − b‖ / ‖b‖`, i.e. RMS error over the reference RMS magnitude.
pub fn nrmse(a: &ComplexTensor<f64>, reference: &ComplexTensor<f64>) -> Result<f64> {
    a.ensure_same_shape(reference, "nrmse")?;
    let err: f64 = a
        .data()
        .iter()
        .zip(reference.data())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let refn: f64 = reference.data().iter().map(|y| y.norm_sqr()).sum();
    Ok((err / refn).sqrt())
}

/// NRMSE after scaling `a` by the complex least-squares factor
/// `c = ⟨a, b⟩/‖a‖²`. Removes the arbitrary global scale of unnormalized
/// reconstructions such as the plain adjoint.
pub fn nrmse_scaled(a: &ComplexTensor<f64>, reference: &ComplexTensor<f64>) -> Result<f64> {
    let c = crate::tensor::hermitian_dot(a, reference)? / crate::tensor::norm2_squared(a);
    let c = if c.is_finite() { c } else { num_complex::Complex64::new(0.0, 0.0) };
    nrmse(&a.scale(c), reference)
}
