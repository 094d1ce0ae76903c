//! Writes and reads back `.cplx` tensor files and prints the header bytes.
//!
//! cargo run --release --example tensor_file_io

use csmri::io::{read_complex, read_tensor_file, write_complex, write_real};
use csmri::ComplexTensor;
use num_complex::Complex;

fn main() -> csmri::Result<()> {
    let dir = std::env::temp_dir().join("csmri_tensor_file_io");
    std::fs::create_dir_all(&dir).map_err(csmri::error::file_err(&dir))?;

    let t = ComplexTensor::from_fn(&[3, 4], |i| Complex::new(i as f32, -(i as f32) / 2.0));
    let path = dir.join("img.cplx");
    write_complex(&path, &t)?;
    let bytes = std::fs::read(&path).map_err(csmri::error::file_err(&path))?;
    println!("{} bytes, header {:02x?}", bytes.len(), &bytes[..8]);
    let back: ComplexTensor<f32> = read_complex(&path)?;
    assert_eq!(back, t);
    // widening to double is exact
    let wide: ComplexTensor<f64> = read_complex(&path)?;
    println!("read back as {:?} and as {:?}", back.precision(), wide.precision());

    let traj = dir.join("traj.cplx");
    write_real(&traj, &[2, 2], &[0.25f64, -0.5, 0.0, 0.125])?;
    let f = read_tensor_file(&traj)?;
    println!("{:?} {:?} {:?}", f.dtype, f.dims, f.values);
    Ok(())
}
