//! Synthetic datasets and their on-disk layout.
//!
//! A dataset directory holds `phantom.cplx`, `sens.cplx`, `traj.cplx`
//! (real, `N_k × 2`), `kspace.cplx` (`N_k × N_c`) and `meta.json` echoing
//! the [`SimulationConfig`] and derived counts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    add_noise, gen_coil_sensitivities, gen_radial_trajectory, shepp_logan, simulate_kspace,
    undersample_trajectory, ImageGrid, KSpaceDataset, SensitivityMaps, Trajectory,
};
use crate::error::{file_err, Error, Result};
use crate::io::{read_complex, read_real, write_complex, write_real};
use crate::tensor::ComplexTensor;

pub const PHANTOM_FILE: &str = "phantom.cplx";
pub const SENS_FILE: &str = "sens.cplx";
pub const TRAJ_FILE: &str = "traj.cplx";
pub const KSPACE_FILE: &str = "kspace.cplx";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub nx: usize,
    pub ny: usize,
    pub coils: usize,
    pub readouts: usize,
    pub samples: usize,
    pub undersample: f64,
    /// SNR in dB relative to the RMS signal; `None` is noiseless.
    pub noise_snr: Option<f64>,
    pub seed: u64,
    pub coil_radius_scale: f64,
    /// Gaussian width of each coil profile, in pixels.
    pub coil_width: f64,
}

/// Default coil width as a fraction of `max(nx, ny)`.
pub const DEFAULT_COIL_WIDTH_FRACTION: f64 = 0.4;
pub const DEFAULT_COIL_RADIUS_SCALE: f64 = 1.0;

impl SimulationConfig {
    /// A config with default coil geometry.
    pub fn new(
        nx: usize,
        ny: usize,
        coils: usize,
        readouts: usize,
        samples: usize,
        undersample: f64,
    ) -> Self {
        Self {
            nx,
            ny,
            coils,
            readouts,
            samples,
            undersample,
            noise_snr: None,
            seed: 0,
            coil_radius_scale: DEFAULT_COIL_RADIUS_SCALE,
            coil_width: DEFAULT_COIL_WIDTH_FRACTION * nx.max(ny) as f64,
        }
    }

    /// 128×64 grid, 12 coils, 101 readouts of 128 samples, factor 8.
    pub fn small() -> Self {
        Self::new(128, 64, 12, 101, 128, 8.0)
    }

    pub fn grid(&self) -> Result<ImageGrid> {
        ImageGrid::new(self.nx, self.ny)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: SimulationConfig,
    pub phantom: ComplexTensor<f64>,
    pub sens: SensitivityMaps,
    pub kspace: KSpaceDataset,
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub config: SimulationConfig,
    pub n_readouts_kept: usize,
    pub samples_per_readout: usize,
    pub n_samples: usize,
    pub n_coils: usize,
    pub total_measurements: usize,
}

/// Generates the phantom and coil maps, undersamples the radial trajectory
/// and simulates k-space by direct summation on the kept samples only.
pub fn simulate(config: &SimulationConfig) -> Result<Dataset> {
    let grid = config.grid()?;
    let phantom = shepp_logan(grid);
    let sens = gen_coil_sensitivities(grid, config.coils, config.coil_radius_scale, config.coil_width)?;
    let full = gen_radial_trajectory(config.readouts, config.samples)?;
    let traj = undersample_trajectory(&full, config.undersample)?;
    let mut kspace = simulate_kspace(&phantom, &sens, &traj)?;
    if let Some(snr) = config.noise_snr {
        kspace = add_noise(&kspace, snr, config.seed)?;
    }
    Ok(Dataset {
        config: *config,
        phantom,
        sens,
        kspace,
    })
}

impl Dataset {
    pub fn meta(&self) -> DatasetMeta {
        let t = self.kspace.trajectory();
        DatasetMeta {
            config: self.config,
            n_readouts_kept: t.n_readouts(),
            samples_per_readout: t.samples_per_readout(),
            n_samples: t.len(),
            n_coils: self.kspace.n_coils(),
            total_measurements: t.len() * self.kspace.n_coils(),
        }
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(file_err(dir))?;
        write_complex(dir.join(PHANTOM_FILE), &self.phantom)?;
        write_complex(dir.join(SENS_FILE), self.sens.maps())?;
        let t = self.kspace.trajectory();
        let flat: Vec<f64> = t.coords().iter().flatten().copied().collect();
        write_real(dir.join(TRAJ_FILE), &[t.len(), 2], &flat)?;
        write_complex(dir.join(KSPACE_FILE), self.kspace.data())?;
        let meta = serde_json::to_string_pretty(&self.meta())?;
        let mp = dir.join(META_FILE);
        fs::write(&mp, meta + "\n").map_err(file_err(&mp))?;
        Ok(())
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mp = dir.join(META_FILE);
        let meta: DatasetMeta =
            serde_json::from_str(&fs::read_to_string(&mp).map_err(file_err(&mp))?)?;
        let phantom = read_complex::<f64>(dir.join(PHANTOM_FILE))?;
        let sens = SensitivityMaps::new(read_complex::<f64>(dir.join(SENS_FILE))?)?;
        let (dims, vals) = read_real(dir.join(TRAJ_FILE))?;
        if dims.len() != 2 || dims[1] != 2 {
            return Err(Error::Format(format!("trajectory must be N_k × 2, got {dims:?}")));
        }
        let coords: Vec<[f64; 2]> = vals.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let traj = if meta.n_readouts_kept * meta.samples_per_readout == coords.len() {
            Trajectory::with_readouts(coords, meta.n_readouts_kept, meta.samples_per_readout)?
        } else {
            Trajectory::from_coords(coords)?
        };
        let kspace = KSpaceDataset::new(read_complex::<f64>(dir.join(KSPACE_FILE))?, traj)?;
        if kspace.n_coils() != sens.n_coils() {
            return Err(Error::Format(format!(
                "k-space has {} coils, sensitivity maps {}",
                kspace.n_coils(),
                sens.n_coils()
            )));
        }
        if phantom.shape() != sens.grid().shape() {
            return Err(Error::Format(format!(
                "phantom {:?} does not match the sensitivity grid {:?}",
                phantom.shape(),
                sens.grid().shape()
            )));
        }
        Ok(Self {
            config: meta.config,
            phantom,
            sens,
            kspace,
        })
    }
}
