//! Synthetic acquisition: radial trajectories, the Shepp–Logan phantom,
//! coil sensitivities, direct-summation k-space simulation and
//! retrospective undersampling.
//!
//! k-space coordinates are in cycles/pixel (Nyquist at ±0.5). Image
//! coordinates are centered integer pixel offsets `x − ⌊Nx/2⌋`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::ComplexTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub nx: usize,
    pub ny: usize,
}

impl ImageGrid {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "image grid must be at least 1×1, got {nx}×{ny}"
            )));
        }
        Ok(Self { nx, ny })
    }

    pub fn n_pixels(&self) -> usize {
        self.nx * self.ny
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.nx, self.ny]
    }

    /// Centered coordinate of row index `x` along axis 0.
    pub fn coord0(&self, x: usize) -> f64 {
        x as f64 - (self.nx / 2) as f64
    }

    /// Centered coordinate of column index `y` along axis 1.
    pub fn coord1(&self, y: usize) -> f64 {
        y as f64 - (self.ny / 2) as f64
    }
}

/// Non-uniform k-space sample positions, grouped into readouts.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    coords: Vec<[f64; 2]>,
    n_readouts: usize,
    samples_per_readout: usize,
}

impl Trajectory {
    /// Wraps raw coordinates as a single unstructured readout.
    pub fn from_coords(coords: Vec<[f64; 2]>) -> Result<Self> {
        Self::with_readouts(coords.clone(), 1, coords.len())
    }

    pub fn with_readouts(
        coords: Vec<[f64; 2]>,
        n_readouts: usize,
        samples_per_readout: usize,
    ) -> Result<Self> {
        if coords.len() != n_readouts * samples_per_readout {
            return Err(shape_err(format!(
                "{} coordinates do not form {n_readouts} readouts of {samples_per_readout}",
                coords.len()
            )));
        }
        if let Some(bad) = coords
            .iter()
            .find(|k| k.iter().any(|&c| !(-0.5..0.5).contains(&c)))
        {
            return Err(Error::InvalidArgument(format!(
                "k-space coordinate {bad:?} outside [-0.5, 0.5)"
            )));
        }
        Ok(Self {
            coords,
            n_readouts,
            samples_per_readout,
        })
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn n_readouts(&self) -> usize {
        self.n_readouts
    }

    pub fn samples_per_readout(&self) -> usize {
        self.samples_per_readout
    }

    /// Contiguous sample range as an unstructured trajectory.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Trajectory {
        let coords = self.coords[range].to_vec();
        let n = coords.len();
        Trajectory {
            coords,
            n_readouts: 1,
            samples_per_readout: n,
        }
    }
}

/// Per-coil complex sensitivity, shape `(N_c × Nx × Ny)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMaps {
    maps: ComplexTensor<f64>,
}

impl SensitivityMaps {
    pub fn new(maps: ComplexTensor<f64>) -> Result<Self> {
        if maps.ndim() != 3 || maps.shape().contains(&0) {
            return Err(shape_err(format!(
                "sensitivity maps must be (coils × nx × ny), got {:?}",
                maps.shape()
            )));
        }
        let n = maps.shape()[1] * maps.shape()[2];
        let data = maps.data();
        for p in 0..n {
            let sos: f64 = data.iter().skip(p).step_by(n).map(|s| s.norm_sqr()).sum();
            if !(sos > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "pixel {p} has zero sensitivity in every coil"
                )));
            }
        }
        Ok(Self { maps })
    }

    pub fn maps(&self) -> &ComplexTensor<f64> {
        &self.maps
    }

    pub fn n_coils(&self) -> usize {
        self.maps.shape()[0]
    }

    pub fn grid(&self) -> ImageGrid {
        ImageGrid {
            nx: self.maps.shape()[1],
            ny: self.maps.shape()[2],
        }
    }

    /// Sum over coils of `|s|²` at each pixel.
    pub fn sum_of_squares(&self) -> Vec<f64> {
        let n = self.grid().n_pixels();
        let mut sos = vec![0.0; n];
        for coil in self.maps.data().chunks_exact(n) {
            for (acc, s) in sos.iter_mut().zip(coil) {
                *acc += s.norm_sqr();
            }
        }
        sos
    }
}

/// Measured samples, shape `(N_k × N_c)`, aligned with a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceDataset {
    data: ComplexTensor<f64>,
    trajectory: Trajectory,
}

impl KSpaceDataset {
    pub fn new(data: ComplexTensor<f64>, trajectory: Trajectory) -> Result<Self> {
        if data.ndim() != 2 || data.shape()[0] != trajectory.len() {
            return Err(shape_err(format!(
                "k-space data {:?} does not match {} trajectory samples",
                data.shape(),
                trajectory.len()
            )));
        }
        Ok(Self { data, trajectory })
    }

    pub fn data(&self) -> &ComplexTensor<f64> {
        &self.data
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn n_coils(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn n_samples(&self) -> usize {
        self.trajectory.len()
    }
}

/// Radial spokes at angles `jπ/n_readouts`, each sampling `t/n_samples` for
/// `t = −⌊n_samples/2⌋ … n_samples − ⌊n_samples/2⌋ − 1`.
pub fn gen_radial_trajectory(n_readouts: usize, n_samples: usize) -> Result<Trajectory> {
    if n_readouts < 1 || n_samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "radial trajectory needs ≥1 readout and ≥2 samples, got {n_readouts}×{n_samples}"
        )));
    }
    let t0 = -((n_samples / 2) as i64);
    let mut coords = Vec::with_capacity(n_readouts * n_samples);
    for j in 0..n_readouts {
        let theta = j as f64 * PI / n_readouts as f64;
        let (s, c) = theta.sin_cos();
        for i in 0..n_samples as i64 {
            let k = (t0 + i) as f64 / n_samples as f64;
            coords.push([k * c, k * s]);
        }
    }
    Trajectory::with_readouts(coords, n_readouts, n_samples)
}

/// Readout indices kept by an undersampling factor: `m = ⌈R/factor⌉`
/// evenly spaced spokes `round(j·R/m)`, deduplicated and ascending.
pub fn kept_readouts(n_readouts: usize, factor: f64) -> Result<Vec<usize>> {
    if !(factor >= 1.0) || !factor.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "undersampling factor must be ≥ 1, got {factor}"
        )));
    }
    let m = ((n_readouts as f64 / factor).ceil() as usize).max(1);
    let mut idx: Vec<usize> = (0..m)
        .map(|j| ((j as f64 * n_readouts as f64 / m as f64).round() as usize).min(n_readouts - 1))
        .collect();
    idx.dedup();
    Ok(idx)
}

pub fn undersample_trajectory(traj: &Trajectory, factor: f64) -> Result<Trajectory> {
    let spr = traj.samples_per_readout();
    let kept = kept_readouts(traj.n_readouts(), factor)?;
    let coords = kept
        .iter()
        .flat_map(|&r| traj.coords()[r * spr..(r + 1) * spr].iter().copied())
        .collect();
    Trajectory::with_readouts(coords, kept.len(), spr)
}

/// Keeps whole, evenly spaced readouts; data rows follow their samples.
pub fn undersample(ds: &KSpaceDataset, factor: f64) -> Result<KSpaceDataset> {
    let traj = ds.trajectory();
    let spr = traj.samples_per_readout();
    let nc = ds.n_coils();
    let kept = kept_readouts(traj.n_readouts(), factor)?;
    let src = ds.data().data();
    let data = kept
        .iter()
        .flat_map(|&r| src[r * spr * nc..(r + 1) * spr * nc].iter().copied())
        .collect();
    let data = ComplexTensor::from_vec(&[kept.len() * spr, nc], data)?;
    KSpaceDataset::new(data, undersample_trajectory(traj, factor)?)
}

/// One ellipse of the phantom: intensity, semi-axes, center, rotation (degrees).
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub intensity: f64,
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    pub phi_deg: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.phi_deg.to_radians().sin_cos();
        let (dx, dy) = (x - self.x0, y - self.y0);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

const fn ellipse(intensity: f64, a: f64, b: f64, x0: f64, y0: f64, phi_deg: f64) -> Ellipse {
    Ellipse {
        intensity,
        a,
        b,
        x0,
        y0,
        phi_deg,
    }
}

/// The ten-ellipse Shepp–Logan head with the contrast-enhanced intensities
/// (Toft), whose composite lies in `[0, 1]`.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    ellipse(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    ellipse(-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    ellipse(-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    ellipse(-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    ellipse(0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    ellipse(0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    ellipse(0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    ellipse(0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    ellipse(0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    ellipse(0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// Phantom value at normalized coordinates (`[-1, 1]²` spans the field of view).
pub fn shepp_logan_at(x: f64, y: f64) -> f64 {
    let v: f64 = SHEPP_LOGAN
        .iter()
        .filter(|e| e.contains(x, y))
        .map(|e| e.intensity)
        .sum();
    v.clamp(0.0, 1.0)
}

/// Real-valued phantom stretched over the grid. The phantom's vertical
/// axis runs along grid axis 0, so a 128×64 grid holds an upright head.
pub fn shepp_logan(grid: ImageGrid) -> ComplexTensor<f64> {
    let hx = grid.nx as f64 / 2.0;
    let hy = grid.ny as f64 / 2.0;
    let mut re = Vec::with_capacity(grid.n_pixels());
    for x in 0..grid.nx {
        for y in 0..grid.ny {
            re.push(shepp_logan_at(grid.coord1(y) / hy, grid.coord0(x) / hx));
        }
    }
    ComplexTensor::from_real(&grid.shape(), &re).expect("grid-sized buffer")
}

/// Gaussian-magnitude coil profiles with a linear phase ramp.
///
/// Coil `γ` sits at angle `2πγ/N_c` on a circle of radius
/// `coil_radius_scale·max(Nx,Ny)/2`. The phase advances by
/// `π/max(Nx,Ny)` radians per pixel along the coil's radial direction.
pub fn gen_coil_sensitivities(
    grid: ImageGrid,
    n_coils: usize,
    coil_radius_scale: f64,
    width: f64,
) -> Result<SensitivityMaps> {
    if n_coils < 1 {
        return Err(Error::InvalidArgument("need at least one coil".into()));
    }
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "coil width must be positive, got {width}"
        )));
    }
    let extent = grid.nx.max(grid.ny) as f64;
    let radius = coil_radius_scale * extent / 2.0;
    let slope = PI / extent;
    let mut data = Vec::with_capacity(n_coils * grid.n_pixels());
    for g in 0..n_coils {
        let ang = 2.0 * PI * g as f64 / n_coils as f64;
        let (dir1, dir0) = ang.sin_cos();
        let (c0, c1) = (radius * dir0, radius * dir1);
        for x in 0..grid.nx {
            for y in 0..grid.ny {
                let (r0, r1) = (grid.coord0(x), grid.coord1(y));
                let d2 = (r0 - c0).powi(2) + (r1 - c1).powi(2);
                let mag = (-d2 / (2.0 * width * width)).exp();
                let phase = slope * (r0 * dir0 + r1 * dir1);
                data.push(Complex64::from_polar(mag, phase));
            }
        }
    }
    SensitivityMaps::new(ComplexTensor::from_vec(
        &[n_coils, grid.nx, grid.ny],
        data,
    )?)
}

/// Direct evaluation of `d[κ,γ] = Σ_n s[γ,n]·ρ[n]·exp(−i2π k_κ·r_n)`.
///
/// This is the brute-force reference for the operators in [`crate::nudft`];
/// it recomputes every exponential and shares no code with them.
pub fn simulate_kspace(
    image: &ComplexTensor<f64>,
    sens: &SensitivityMaps,
    traj: &Trajectory,
) -> Result<KSpaceDataset> {
    let grid = sens.grid();
    if image.shape() != grid.shape() {
        return Err(shape_err(format!(
            "image {:?} does not match sensitivity grid {:?}",
            image.shape(),
            grid.shape()
        )));
    }
    let nc = sens.n_coils();
    let n = grid.n_pixels();
    let rho = image.data();
    let s = sens.maps().data();
    let mut out = Vec::with_capacity(traj.len() * nc);
    for k in traj.coords() {
        let mut acc = vec![Complex64::new(0.0, 0.0); nc];
        for x in 0..grid.nx {
            for y in 0..grid.ny {
                let p = x * grid.ny + y;
                let arg = -2.0 * PI * (k[0] * grid.coord0(x) + k[1] * grid.coord1(y));
                let e = Complex64::from_polar(1.0, arg) * rho[p];
                for (g, a) in acc.iter_mut().enumerate() {
                    *a += s[g * n + p] * e;
                }
            }
        }
        out.extend(acc);
    }
    KSpaceDataset::new(
        ComplexTensor::from_vec(&[traj.len(), nc], out)?,
        traj.clone(),
    )
}

/// Adds complex white Gaussian noise at `snr_db` relative to the RMS signal
/// magnitude. Deterministic for a given seed.
pub fn add_noise(ds: &KSpaceDataset, snr_db: f64, seed: u64) -> Result<KSpaceDataset> {
    let d = ds.data();
    if d.is_empty() {
        return Ok(ds.clone());
    }
    let rms = (d.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / d.len() as f64).sqrt();
    let sigma = rms / 10f64.powf(snr_db / 20.0) / 2f64.sqrt();
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidArgument(format!("noise level: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = d.map(|z| z + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)));
    KSpaceDataset::new(noisy, ds.trajectory().clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_counts() {
        assert_eq!(gen_radial_trajectory(101, 128).unwrap().len(), 12928);
        assert_eq!(gen_radial_trajectory(804, 1024).unwrap().len(), 823_296);
        let t = gen_radial_trajectory(1, 2).unwrap();
        assert_eq!(t.coords(), &[[-0.5, 0.0], [0.0, 0.0]]);
        assert!(gen_radial_trajectory(0, 4).is_err());
        assert!(gen_radial_trajectory(3, 1).is_err());
    }

    #[test]
    fn radial_coords_in_range() {
        for (r, s) in [(101, 128), (7, 3), (13, 17)] {
            let t = gen_radial_trajectory(r, s).unwrap();
            assert!(t
                .coords()
                .iter()
                .flatten()
                .all(|c| (-0.5..0.5).contains(c)));
        }
    }

    #[test]
    fn undersample_paper_counts() {
        let kept = kept_readouts(101, 8.0).unwrap();
        assert_eq!(kept.len(), 13);
        assert_eq!(kept_readouts(804, 8.0).unwrap().len(), 101);
        let t = undersample_trajectory(&gen_radial_trajectory(101, 128).unwrap(), 8.0).unwrap();
        assert_eq!(t.len(), 1664);
        assert_eq!(t.len() * 12, 19_968);
        let t = undersample_trajectory(&gen_radial_trajectory(804, 1024).unwrap(), 8.0).unwrap();
        assert_eq!(t.len(), 103_424);
        assert!(kept_readouts(10, 0.5).is_err());
    }

    #[test]
    fn undersample_factor_one_is_identity_and_subset_otherwise() {
        let grid = ImageGrid::new(4, 4).unwrap();
        let sens = gen_coil_sensitivities(grid, 2, 1.2, 3.0).unwrap();
        let traj = gen_radial_trajectory(9, 4).unwrap();
        let ds = simulate_kspace(&shepp_logan(grid), &sens, &traj).unwrap();
        assert_eq!(undersample(&ds, 1.0).unwrap(), ds);

        let sub = undersample(&ds, 3.0).unwrap();
        let kept = kept_readouts(9, 3.0).unwrap();
        assert_eq!(sub.trajectory().n_readouts(), kept.len());
        for (i, &r) in kept.iter().enumerate() {
            for s in 0..4 {
                assert_eq!(
                    sub.trajectory().coords()[i * 4 + s],
                    traj.coords()[r * 4 + s]
                );
                for g in 0..2 {
                    assert_eq!(
                        sub.data().data()[(i * 4 + s) * 2 + g],
                        ds.data().data()[(r * 4 + s) * 2 + g]
                    );
                }
            }
        }
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
    }

    // Independent point-in-ellipse evaluation at the origin.
    fn origin_value() -> f64 {
        let mut v = 0.0;
        for e in SHEPP_LOGAN.iter() {
            let (s, c) = (e.phi_deg * PI / 180.0).sin_cos();
            let xr = (-e.x0) * c + (-e.y0) * s;
            let yr = -(-e.x0) * s + (-e.y0) * c;
            if xr * xr / (e.a * e.a) + yr * yr / (e.b * e.b) <= 1.0 {
                v += e.intensity;
            }
        }
        v
    }

    #[test]
    fn phantom_center_values() {
        let expected = origin_value();
        assert!((expected - 0.2).abs() < 1e-15);
        let one = shepp_logan(ImageGrid::new(1, 1).unwrap());
        assert_eq!(one.shape(), &[1, 1]);
        assert_eq!(one.data()[0].re, expected);
        let big = shepp_logan(ImageGrid::new(64, 64).unwrap());
        assert_eq!(big.data()[32 * 64 + 32].re, expected);
        assert_eq!(shepp_logan(ImageGrid::new(64, 64).unwrap()), big);
    }

    #[test]
    fn phantom_range_and_real() {
        for (nx, ny) in [(128, 64), (33, 17), (2, 3)] {
            let p = shepp_logan(ImageGrid::new(nx, ny).unwrap());
            assert!(p
                .data()
                .iter()
                .all(|z| z.im == 0.0 && (0.0..=1.0).contains(&z.re)));
        }
    }

    #[test]
    fn coil_maps() {
        let grid = ImageGrid::new(128, 64).unwrap();
        let s = gen_coil_sensitivities(grid, 12, 1.1, 40.0).unwrap();
        assert_eq!(s.maps().shape(), &[12, 128, 64]);
        assert!(s.sum_of_squares().iter().all(|&v| v > 0.0));

        let flat = gen_coil_sensitivities(ImageGrid::new(5, 7).unwrap(), 1, 1.0, f64::INFINITY)
            .unwrap();
        assert!(flat.maps().data().iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        assert!(gen_coil_sensitivities(grid, 0, 1.0, 1.0).is_err());
    }

    #[test]
    fn simulate_trivial_cases() {
        let ones = SensitivityMaps::new(ComplexTensor::from_fn(&[1, 3, 3], |_| {
            Complex64::new(1.0, 0.0)
        }))
        .unwrap();
        let mut img = ComplexTensor::zeros(&[3, 3]);
        img.data_mut()[3 + 1] = Complex64::new(1.0, 0.0); // r = (0, 0)
        let traj = gen_radial_trajectory(5, 6).unwrap();
        let ds = simulate_kspace(&img, &ones, &traj).unwrap();
        assert!(ds
            .data()
            .data()
            .iter()
            .all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let mut img = ComplexTensor::zeros(&[3, 3]);
        img.data_mut()[2 * 3 + 1] = Complex64::new(1.0, 0.0); // r = (1, 0)
        let traj = Trajectory::from_coords(vec![[-0.5, 0.0]]).unwrap();
        let d = simulate_kspace(&img, &ones, &traj).unwrap().data().data()[0];
        assert!((d - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn simulate_is_linear() {
        let grid = ImageGrid::new(4, 5).unwrap();
        let sens = gen_coil_sensitivities(grid, 2, 1.0, 3.0).unwrap();
        let traj = gen_radial_trajectory(3, 4).unwrap();
        let a = shepp_logan(grid);
        let b = ComplexTensor::from_fn(&[4, 5], |i| Complex64::new(i as f64 * 0.1, -0.3));
        let alpha = Complex64::new(0.7, -1.3);
        let lhs = simulate_kspace(&a.scale(alpha).add(&b).unwrap(), &sens, &traj).unwrap();
        let da = simulate_kspace(&a, &sens, &traj).unwrap();
        let db = simulate_kspace(&b, &sens, &traj).unwrap();
        let rhs = da.data().scale(alpha).add(db.data()).unwrap();
        for (l, r) in lhs.data().data().iter().zip(rhs.data()) {
            assert!((l - r).norm() < 1e-12);
        }
    }

    #[test]
    fn noise_is_seeded() {
        let grid = ImageGrid::new(4, 4).unwrap();
        let sens = gen_coil_sensitivities(grid, 2, 1.0, 3.0).unwrap();
        let traj = gen_radial_trajectory(3, 4).unwrap();
        let ds = simulate_kspace(&shepp_logan(grid), &sens, &traj).unwrap();
        let a = add_noise(&ds, 20.0, 7).unwrap();
        let b = add_noise(&ds, 20.0, 7).unwrap();
        let c = add_noise(&ds, 20.0, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, ds);
    }
}
