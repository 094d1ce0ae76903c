//! `.cplx` tensor container.
//!
//! Layout (all little-endian):
//!
//! | bytes | field                                                        |
//! |-------|--------------------------------------------------------------|
//! | 4     | magic `CSMR`                                                 |
//! | 1     | version = 1                                                  |
//! | 1     | dtype: 0 complex f32, 1 complex f64, 2 real f32, 3 real f64  |
//! | 1     | ndim                                                         |
//! | 1     | reserved = 0                                                 |
//! | 8·ndim| dims as u64                                                  |
//! | ...   | row-major payload, complex as interleaved (re, im)           |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{file_err, Error, Result};
use crate::tensor::{ComplexTensor, Real};

pub const MAGIC: &[u8; 4] = b"CSMR";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    ComplexSingle = 0,
    ComplexDouble = 1,
    RealSingle = 2,
    RealDouble = 3,
}

impl DType {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            0 => DType::ComplexSingle,
            1 => DType::ComplexDouble,
            2 => DType::RealSingle,
            3 => DType::RealDouble,
            _ => return Err(Error::Format(format!("unknown dtype code {v}"))),
        })
    }

    /// Bytes per stored element (a complex element counts both parts).
    pub fn element_size(self) -> usize {
        match self {
            DType::ComplexSingle => 8,
            DType::ComplexDouble => 16,
            DType::RealSingle => 4,
            DType::RealDouble => 8,
        }
    }

    pub fn is_complex(self) -> bool {
        matches!(self, DType::ComplexSingle | DType::ComplexDouble)
    }
}

/// Decoded file contents. Values are kept as `f64` regardless of the
/// stored width; widening from `f32` is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dtype: DType,
    pub dims: Vec<usize>,
    /// Interleaved `(re, im)` for complex dtypes, plain values otherwise.
    pub values: Vec<f64>,
}

fn write_header(w: &mut impl Write, dtype: DType, dims: &[usize]) -> Result<()> {
    if dims.len() > u8::MAX as usize {
        return Err(Error::Format(format!("{} dimensions is too many", dims.len())));
    }
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, dtype as u8, dims.len() as u8, 0])?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    Ok(())
}

fn encode<T: Real>(buf: &mut Vec<u8>, v: T) {
    match T::PRECISION {
        crate::tensor::Precision::Single => buf.extend_from_slice(&(v.to_f64() as f32).to_le_bytes()),
        crate::tensor::Precision::Double => buf.extend_from_slice(&v.to_f64().to_le_bytes()),
    }
}

pub fn complex_dtype<T: Real>() -> DType {
    match T::PRECISION {
        crate::tensor::Precision::Single => DType::ComplexSingle,
        crate::tensor::Precision::Double => DType::ComplexDouble,
    }
}

pub fn real_dtype<T: Real>() -> DType {
    match T::PRECISION {
        crate::tensor::Precision::Single => DType::RealSingle,
        crate::tensor::Precision::Double => DType::RealDouble,
    }
}

/// Writes a complex tensor in its own precision.
pub fn write_complex<T: Real>(path: impl AsRef<Path>, t: &ComplexTensor<T>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(t.len() * 2 * T::PRECISION.bytes_per_component());
    for z in t.data() {
        encode(&mut buf, z.re);
        encode(&mut buf, z.im);
    }
    let mut w = BufWriter::new(File::create(path).map_err(file_err(path))?);
    write_header(&mut w, complex_dtype::<T>(), t.shape())?;
    w.write_all(&buf).map_err(file_err(path))?;
    w.flush().map_err(file_err(path))?;
    Ok(())
}

/// Writes a real tensor given as a flat row-major slice.
pub fn write_real<T: Real>(path: impl AsRef<Path>, dims: &[usize], values: &[T]) -> Result<()> {
    let path = path.as_ref();
    let n: usize = dims.iter().product();
    if n != values.len() {
        return Err(Error::Format(format!(
            "dims {dims:?} hold {n} values, got {}",
            values.len()
        )));
    }
    let mut buf = Vec::with_capacity(n * T::PRECISION.bytes_per_component());
    for &v in values {
        encode(&mut buf, v);
    }
    let mut w = BufWriter::new(File::create(path).map_err(file_err(path))?);
    write_header(&mut w, real_dtype::<T>(), dims)?;
    w.write_all(&buf).map_err(file_err(path))?;
    w.flush().map_err(file_err(path))?;
    Ok(())
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<TensorFile> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(file_err(path))?);
    let mut head = [0u8; 8];
    r.read_exact(&mut head)
        .map_err(|e| Error::Format(format!("{}: truncated header ({e})", path.display())))?;
    if &head[..4] != MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    if head[4] != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {}",
            path.display(),
            head[4]
        )));
    }
    let dtype = DType::from_u8(head[5])?;
    let ndim = head[6] as usize;
    if head[7] != 0 {
        return Err(Error::Format(format!("{}: reserved byte is not zero", path.display())));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)
            .map_err(|e| Error::Format(format!("{}: truncated dims ({e})", path.display())))?;
        dims.push(u64::from_le_bytes(b) as usize);
    }
    let n: usize = dims.iter().product();
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(file_err(path))?;
    let expected = n * dtype.element_size();
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "{}: payload is {} bytes, dims {dims:?} need {expected}",
            path.display(),
            payload.len()
        )));
    }
    let values = match dtype {
        DType::ComplexSingle | DType::RealSingle => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        DType::ComplexDouble | DType::RealDouble => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok(TensorFile {
        dtype,
        dims,
        values,
    })
}

/// Reads a complex file of either precision into precision `T`.
pub fn read_complex<T: Real>(path: impl AsRef<Path>) -> Result<ComplexTensor<T>> {
    let f = read_tensor_file(path.as_ref())?;
    if !f.dtype.is_complex() {
        return Err(Error::Format(format!(
            "{}: expected a complex tensor, found {:?}",
            path.as_ref().display(),
            f.dtype
        )));
    }
    let data = f
        .values
        .chunks_exact(2)
        .map(|p| Complex::new(T::from_f64(p[0]), T::from_f64(p[1])))
        .collect();
    ComplexTensor::from_vec(&f.dims, data)
}

/// Reads a real file of either precision as `f64`.
pub fn read_real(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<f64>)> {
    let f = read_tensor_file(path.as_ref())?;
    if f.dtype.is_complex() {
        return Err(Error::Format(format!(
            "{}: expected a real tensor, found {:?}",
            path.as_ref().display(),
            f.dtype
        )));
    }
    Ok((f.dims, f.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::{Complex32, Complex64};
    use proptest::prelude::*;

    #[test]
    fn header_bytes_are_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.cplx");
        let t = ComplexTensor::from_vec(&[1, 2], vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.0)])
            .unwrap();
        write_complex(&p, &t).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], b"CSMR\x01\x01\x02\x00");
        assert_eq!(&bytes[8..16], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &2u64.to_le_bytes());
        assert_eq!(&bytes[24..32], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[32..40], &(-2.0f64).to_le_bytes());
        assert_eq!(bytes.len(), 24 + 2 * 16);

        write_real(&p, &[3], &[1.0f32, 2.0, 3.0]).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], b"CSMR\x01\x02\x01\x00");
        assert_eq!(bytes.len(), 16 + 12);
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.cplx");
        std::fs::write(&p, b"NOPE\x01\x01\x00\x00").unwrap();
        assert!(matches!(read_tensor_file(&p), Err(Error::Format(_))));
        let mut ok = b"CSMR\x01\x01\x01\x00".to_vec();
        ok.extend_from_slice(&2u64.to_le_bytes());
        ok.extend_from_slice(&[0u8; 16]); // one element short
        std::fs::write(&p, &ok).unwrap();
        assert!(matches!(read_tensor_file(&p), Err(Error::Format(_))));
        write_real(&p, &[1], &[1.0f64]).unwrap();
        assert!(read_complex::<f64>(&p).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(
            dims in proptest::collection::vec(1usize..5, 1..4),
            seed in any::<u64>(),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let mut s = seed;
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f64::from_bits((s >> 2) | 0x3000_0000_0000_0000)
            };
            let t64 = ComplexTensor::from_fn(&dims, |_| Complex64::new(next(), -next()));
            let p = dir.path().join("a.cplx");
            write_complex(&p, &t64).unwrap();
            prop_assert_eq!(read_complex::<f64>(&p).unwrap(), t64.clone());

            let t32: ComplexTensor<f32> = t64.cast();
            write_complex(&p, &t32).unwrap();
            let back = read_complex::<f32>(&p).unwrap();
            let same = back.data().iter().zip(t32.data()).all(|(a, b): (&Complex32, &Complex32)| {
                a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
            });
            prop_assert!(same);
            prop_assert_eq!(back.shape(), &dims[..]);
        }
    }
}
