#![allow(dead_code)]

use std::f64::consts::PI;

use csmri::acquisition::{ImageGrid, SensitivityMaps, Trajectory};
use csmri::ComplexTensor;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_c(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> ComplexTensor<f64> {
    ComplexTensor::from_fn(shape, |_| rand_c(rng))
}

/// Random complex coil maps with magnitude in [0.2, 1].
pub fn random_sens(rng: &mut impl Rng, nc: usize, nx: usize, ny: usize) -> SensitivityMaps {
    let t = ComplexTensor::from_fn(&[nc, nx, ny], |_| {
        Complex64::from_polar(rng.gen_range(0.2..1.0), rng.gen_range(-PI..PI))
    });
    SensitivityMaps::new(t).unwrap()
}

pub fn random_traj(rng: &mut impl Rng, n: usize) -> Trajectory {
    Trajectory::from_coords(
        (0..n)
            .map(|_| [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
            .collect(),
    )
    .unwrap()
}

/// Dense encoding matrix, row `κ·N_c + γ`, column `x·Ny + y`, built from
/// the forward-model formula with its own coordinate convention.
pub fn dense_encoding(sens: &SensitivityMaps, traj: &Trajectory) -> DMatrix<Complex64> {
    let nc = sens.n_coils();
    let (nx, ny) = (sens.maps().shape()[1], sens.maps().shape()[2]);
    let s = sens.maps().data();
    let n = nx * ny;
    DMatrix::from_fn(traj.len() * nc, n, |row, col| {
        let (k, g) = (row / nc, row % nc);
        let (x, y) = (col / ny, col % ny);
        let rx = x as f64 - (nx / 2) as f64;
        let ry = y as f64 - (ny / 2) as f64;
        let kk = traj.coords()[k];
        let phase = -2.0 * PI * (kk[0] * rx + kk[1] * ry);
        s[g * n + col] * Complex64::new(phase.cos(), phase.sin())
    })
}

pub fn to_dvec(t: &ComplexTensor<f64>) -> DVector<Complex64> {
    DVector::from_column_slice(t.data())
}

pub fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn grid(nx: usize, ny: usize) -> ImageGrid {
    ImageGrid::new(nx, ny).unwrap()
}
