//! Dense complex tensors in single or double precision.
//!
//! Every reduction in this module runs single-threaded in a fixed order and
//! accumulates in the tensor's own precision, so results are
//! bit-reproducible and single precision is not silently widened.

use std::fmt;

use num_complex::Complex;
use num_traits::{Float, FloatConst, NumAssign};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};

/// Floating-point component type of a complex tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn bytes_per_component(self) -> usize {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Single => f.write_str("f32"),
            Precision::Double => f.write_str("f64"),
        }
    }
}

/// Scalar component type (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + NumAssign + Default + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    const PRECISION: Precision;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    const PRECISION: Precision = Precision::Single;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::Double;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

pub type C<T> = Complex<T>;

/// Row-major dense complex array.
#[derive(Clone, PartialEq)]
pub struct ComplexTensor<T> {
    shape: Vec<usize>,
    data: Vec<Complex<T>>,
}

impl<T> fmt::Debug for ComplexTensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexTensor")
            .field("shape", &self.shape)
            .field("type", &std::any::type_name::<T>())
            .finish()
    }
}

impl<T: Real> ComplexTensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<Complex<T>>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(shape_err(format!(
                "shape {:?} holds {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a tensor from real values (zero imaginary part).
    pub fn from_real(shape: &[usize], re: &[T]) -> Result<Self> {
        Self::from_vec(shape, re.iter().map(|&r| Complex::new(r, T::zero())).collect())
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> Complex<T>) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(shape_err(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Converts to another precision, rounding each component.
    pub fn cast<U: Real>(&self) -> ComplexTensor<U> {
        ComplexTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|z| Complex::new(U::from_f64(z.re.to_f64()), U::from_f64(z.im.to_f64())))
                .collect(),
        }
    }

    pub fn ensure_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(shape_err(format!(
                "{what}: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(Complex<T>) -> Complex<T>) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &Self,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> Result<Self> {
        self.ensure_same_shape(other, "elementwise")?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.ensure_same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, z| if z.norm() > m { z.norm() } else { m })
    }
}

/// `Σ_i conj(a_i)·b_i`, summed in ascending index order.
pub fn hermitian_dot<T: Real>(a: &ComplexTensor<T>, b: &ComplexTensor<T>) -> Result<Complex<T>> {
    a.ensure_same_shape(b, "hermitian_dot")?;
    Ok(dot_slices(&a.data, &b.data))
}

#[inline]
pub(crate) fn dot_slices<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// Squared 2-norm; identical to `Re⟨a,a⟩` computed through [`hermitian_dot`].
pub fn norm2_squared<T: Real>(a: &ComplexTensor<T>) -> T {
    dot_slices(&a.data, &a.data).re
}

/// Returns `y + alpha·x`.
pub fn axpy<T: Real>(
    alpha: Complex<T>,
    x: &ComplexTensor<T>,
    y: &ComplexTensor<T>,
) -> Result<ComplexTensor<T>> {
    x.ensure_same_shape(y, "axpy")?;
    Ok(ComplexTensor {
        shape: y.shape.clone(),
        data: y
            .data
            .iter()
            .zip(&x.data)
            .map(|(&yi, &xi)| yi + alpha * xi)
            .collect(),
    })
}

/// Applies a materialized `(n_samples × n_pixels)` operator to a vector.
///
/// Forward gives `op · vec` (length `n_samples`); adjoint gives `opᴴ · vec`
/// (length `n_pixels`). Each output is accumulated in ascending order of the
/// contracted index.
pub fn contract_samples_by_pixels<T: Real>(
    op_matrix: &ComplexTensor<T>,
    vec: &ComplexTensor<T>,
    adjoint: bool,
) -> Result<ComplexTensor<T>> {
    if op_matrix.ndim() != 2 {
        return Err(shape_err(format!(
            "operator must be 2-D, got {:?}",
            op_matrix.shape
        )));
    }
    let (rows, cols) = (op_matrix.shape[0], op_matrix.shape[1]);
    let expected = if adjoint { rows } else { cols };
    if vec.len() != expected {
        return Err(shape_err(format!(
            "operator {:?} cannot contract a vector of length {} ({})",
            op_matrix.shape,
            vec.len(),
            if adjoint { "adjoint" } else { "forward" }
        )));
    }
    let m = &op_matrix.data;
    let v = &vec.data;
    if adjoint {
        let mut out = vec![Complex::new(T::zero(), T::zero()); cols];
        for (row, &w) in m.chunks_exact(cols).zip(v) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a.conj() * w;
            }
        }
        ComplexTensor::from_vec(&[cols], out)
    } else {
        let out = (0..rows)
            .map(|r| {
                let row = &m[r * cols..(r + 1) * cols];
                let mut acc = Complex::new(T::zero(), T::zero());
                for (&a, &x) in row.iter().zip(v) {
                    acc += a * x;
                }
                acc
            })
            .collect();
        ComplexTensor::from_vec(&[rows], out)
    }
}

/// Strided view of a complex matrix for [`gemm`], optionally conjugated.
#[derive(Clone, Copy)]
pub struct MatRef<'a, T> {
    pub data: &'a [Complex<T>],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
    pub conj: bool,
}

impl<'a, T> MatRef<'a, T> {
    /// Row-major `rows × cols`.
    pub fn row_major(data: &'a [Complex<T>], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride: cols,
            col_stride: 1,
            conj: false,
        }
    }

    /// The transpose, without copying.
    pub fn t(self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
            ..self
        }
    }

    pub fn conj(self) -> Self {
        Self {
            conj: !self.conj,
            ..self
        }
    }

    fn fits(&self, len: usize) -> bool {
        self.rows == 0
            || self.cols == 0
            || (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride < len
    }
}

/// `C = op(A)·op(B)` (or `C += …` when `accumulate`) into the row-major
/// `a.rows × b.cols` buffer `c`, where `op` conjugates when requested.
///
/// Runs a single-threaded blocked kernel whose summation order depends only
/// on the matrix sizes, so repeated calls are bit-identical. A single
/// conjugated operand is copied, so flag the smaller one.
pub fn gemm<T: Real>(a: MatRef<'_, T>, b: MatRef<'_, T>, c: &mut [Complex<T>], accumulate: bool) -> Result<()> {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if b.rows != k || c.len() != m * n || !a.fits(a.data.len()) || !b.fits(b.data.len()) {
        return Err(shape_err(format!(
            "gemm: ({m} × {k}) · ({} × {n}) into buffer of {}",
            b.rows,
            c.len()
        )));
    }
    let zero = Complex::new(T::zero(), T::zero());
    if m == 0 || n == 0 {
        return Ok(());
    }
    if k == 0 {
        if !accumulate {
            c.fill(zero);
        }
        return Ok(());
    }
    fn conj_copy<T: Real>(v: MatRef<'_, T>) -> Vec<Complex<T>> {
        (0..v.rows * v.cols)
            .map(|i| v.data[(i / v.cols) * v.row_stride + (i % v.cols) * v.col_stride].conj())
            .collect()
    }
    match (a.conj, b.conj) {
        (false, false) => raw_gemm(a, b, c, accumulate),
        (true, false) => {
            let ac = conj_copy(a);
            raw_gemm(MatRef::row_major(&ac[..], m, k), b, c, accumulate);
        }
        (false, true) => {
            let bc = conj_copy(b);
            raw_gemm(a, MatRef::row_major(&bc[..], k, n), c, accumulate);
        }
        (true, true) => {
            // conj(A)·conj(B) = conj(A·B)
            let mut tmp = vec![zero; m * n];
            raw_gemm(a, b, &mut tmp, false);
            for (o, t) in c.iter_mut().zip(&tmp) {
                *o = if accumulate { *o + t.conj() } else { t.conj() };
            }
        }
    }
    Ok(())
}

/// Unconjugated product; `a`, `b` and `c` already validated.
fn raw_gemm<T: Real>(a: MatRef<'_, T>, b: MatRef<'_, T>, c: &mut [Complex<T>], accumulate: bool) {
    use matrixmultiply::CGemmOption::Standard;
    use std::any::TypeId;

    let (m, k, n) = (a.rows, a.cols, b.cols);
    let (ars, acs, brs, bcs) = (
        a.row_stride as isize,
        a.col_stride as isize,
        b.row_stride as isize,
        b.col_stride as isize,
    );
    let ncols = n as isize;
    // SAFETY: `Complex<T>` is `repr(C)` with two `T` fields, matching the
    // `[T; 2]` element layout; the type check selects the matching kernel,
    // and the caller's bounds checks keep every index in range.
    unsafe {
        if TypeId::of::<T>() == TypeId::of::<f64>() {
            let beta = if accumulate { [1.0, 0.0] } else { [0.0, 0.0] };
            matrixmultiply::zgemm(
                Standard,
                Standard,
                m,
                k,
                n,
                [1.0, 0.0],
                a.data.as_ptr() as *const [f64; 2],
                ars,
                acs,
                b.data.as_ptr() as *const [f64; 2],
                brs,
                bcs,
                beta,
                c.as_mut_ptr() as *mut [f64; 2],
                ncols,
                1,
            );
        } else if TypeId::of::<T>() == TypeId::of::<f32>() {
            let beta = if accumulate { [1.0, 0.0] } else { [0.0, 0.0] };
            matrixmultiply::cgemm(
                Standard,
                Standard,
                m,
                k,
                n,
                [1.0, 0.0],
                a.data.as_ptr() as *const [f32; 2],
                ars,
                acs,
                b.data.as_ptr() as *const [f32; 2],
                brs,
                bcs,
                beta,
                c.as_mut_ptr() as *mut [f32; 2],
                ncols,
                1,
            );
        } else {
            unreachable!("Real is implemented only for f32 and f64");
        }
    }
}
