//! Strong-scaling harness: fixed problem, varying worker count.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{KSpaceDataset, SensitivityMaps};
use crate::error::{Error, Result};
use crate::recon::{reconstruct_dyn, ReconOptions};
use crate::tensor::Precision;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub workers: usize,
    /// Best-of-k wall time in seconds.
    pub best_seconds: f64,
    pub all_seconds: Vec<f64>,
    /// `T_base / T_N`.
    pub speedup: f64,
    /// `N / base`.
    pub ideal: f64,
    pub efficiency: f64,
    /// Set when this row is slower than the previous one.
    pub slower_than_previous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub precision: Precision,
    pub repeat: usize,
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    /// Builds the table from per-worker-count timing samples, in the given
    /// order. The base is the smallest worker count.
    pub fn from_timings(precision: Precision, repeat: usize, timings: &[(usize, Vec<f64>)]) -> Result<Self> {
        if timings.is_empty() {
            return Err(Error::InvalidArgument("empty worker list".into()));
        }
        let best = |t: &[f64]| t.iter().copied().fold(f64::INFINITY, f64::min);
        let (base_n, base_t) = timings
            .iter()
            .min_by_key(|(n, _)| *n)
            .map(|(n, t)| (*n, best(t)))
            .unwrap();
        let mut rows = Vec::with_capacity(timings.len());
        let mut prev: Option<f64> = None;
        for (n, t) in timings {
            let b = best(t);
            let speedup = base_t / b;
            let ideal = *n as f64 / base_n as f64;
            rows.push(ScalingRow {
                workers: *n,
                best_seconds: b,
                all_seconds: t.clone(),
                speedup,
                ideal,
                efficiency: speedup / ideal,
                slower_than_previous: prev.is_some_and(|p| b > p),
            });
            prev = Some(b);
        }
        Ok(Self {
            precision,
            repeat,
            rows,
        })
    }

    pub fn speedup_at(&self, workers: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.workers == workers).map(|r| r.speedup)
    }

    pub fn has_violations(&self) -> bool {
        self.rows.iter().any(|r| r.slower_than_previous)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("workers,best_seconds,speedup,ideal_speedup,efficiency,monotone_violation\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{:.6},{:.4},{:.4},{:.4},{}",
                r.workers, r.best_seconds, r.speedup, r.ideal, r.efficiency, r.slower_than_previous
            )
            .unwrap();
        }
        s
    }
}

/// Parses a comma-separated worker list such as `1,2,4,8`.
pub fn parse_worker_list(s: &str) -> Result<Vec<usize>> {
    let list: Vec<usize> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::InvalidArgument(format!("bad worker count {t:?}")))
        })
        .collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(Error::InvalidArgument("empty worker list".into()));
    }
    Ok(list)
}

/// Runs `repeat` identical reconstructions per worker count and keeps the
/// fastest wall time of each.
pub fn strong_scaling(
    ds: &KSpaceDataset,
    sens: &SensitivityMaps,
    base: &ReconOptions,
    precision: Precision,
    workers: &[usize],
    repeat: usize,
    mut progress: impl FnMut(usize, usize, f64),
) -> Result<ScalingTable> {
    if workers.is_empty() {
        return Err(Error::InvalidArgument("empty worker list".into()));
    }
    if repeat < 1 {
        return Err(Error::InvalidArgument("repeat must be at least 1".into()));
    }
    let mut timings = Vec::with_capacity(workers.len());
    for &n in workers {
        let opts = ReconOptions {
            workers: n,
            ..*base
        };
        let mut t = Vec::with_capacity(repeat);
        for k in 0..repeat {
            let start = Instant::now();
            reconstruct_dyn(ds, sens, &opts, precision)?;
            let secs = start.elapsed().as_secs_f64();
            progress(n, k, secs);
            t.push(secs);
        }
        timings.push((n, t));
    }
    ScalingTable::from_timings(precision, repeat, &timings)
}
