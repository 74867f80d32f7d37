//! Multitaper local scattering function and its Doppler marginal.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{sfft_matrix, DelayDopplerGrid, TimeFrequencyWindow};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tfanalysis::dpss::dpss_tapers;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LSFConfig {
    /// Snapshots per window, `M`.
    pub window_length: usize,
    /// Tones per window, `K`.
    pub tone_count: usize,
    pub time_tapers: usize,
    pub freq_tapers: usize,
    /// Time-bandwidth product of both taper families.
    pub nw: f64,
}

impl Default for LSFConfig {
    fn default() -> Self {
        Self {
            window_length: 360,
            tone_count: 21,
            time_tapers: 3,
            freq_tapers: 3,
            nw: 2.0,
        }
    }
}

/// Tapers prepared once for repeated estimates on equally sized windows.
#[derive(Debug, Clone)]
pub struct LsfEstimator {
    cfg: LSFConfig,
    /// Windows `u_j u_i^T`, each `K x M`.
    windows: Vec<Grid<f64>>,
}

impl LsfEstimator {
    pub fn new(cfg: &LSFConfig) -> Result<Self> {
        if cfg.time_tapers == 0 || cfg.freq_tapers == 0 {
            return Err(Error::config("tapers", "at least one taper per dimension"));
        }
        let time = dpss_tapers(cfg.window_length, cfg.nw, cfg.time_tapers)?;
        let freq = dpss_tapers(cfg.tone_count, cfg.nw, cfg.freq_tapers)?;
        let mut windows = Vec::with_capacity(cfg.time_tapers * cfg.freq_tapers);
        for ut in &time.sequences {
            for uf in &freq.sequences {
                windows.push(Grid::from_fn(cfg.tone_count, cfg.window_length, |k, m| uf[k] * ut[m]));
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            windows,
        })
    }

    pub fn config(&self) -> &LSFConfig {
        &self.cfg
    }

    /// Mean of the squared SFFT magnitudes over all taper pairs.
    pub fn estimate(&self, w: &TimeFrequencyWindow) -> Result<DelayDopplerGrid<f64>> {
        let (k, m) = w.values.shape();
        if (k, m) != (self.cfg.tone_count, self.cfg.window_length) {
            return Err(Error::Shape {
                expected: format!("{}x{} window", self.cfg.tone_count, self.cfg.window_length),
                found: format!("{k}x{m}"),
            });
        }
        let mut acc: Grid<f64> = Grid::zeros(k, m);
        let mut tapered: Grid<Complex64> = Grid::zeros(k, m);
        for win in &self.windows {
            for ((t, h), u) in tapered.as_mut_slice().iter_mut().zip(w.values.iter()).zip(win.iter()) {
                *t = h * u;
            }
            let s = sfft_matrix(&tapered)?;
            for (a, x) in acc.as_mut_slice().iter_mut().zip(s.iter()) {
                *a += x.norm_sqr();
            }
        }
        let scale = 1.0 / self.windows.len() as f64;
        acc.as_mut_slice().iter_mut().for_each(|a| *a *= scale);
        Ok(DelayDopplerGrid::from_raw(
            &acc,
            w.delay_resolution(),
            w.doppler_resolution(),
            w.start_time,
        ))
    }
}

pub fn lsf_estimate(w: &TimeFrequencyWindow, cfg: &LSFConfig) -> Result<DelayDopplerGrid<f64>> {
    LsfEstimator::new(cfg)?.estimate(w)
}

/// Doppler spectral density: the LSF summed over delay, ordered like `lsf.doppler_axis`.
pub fn dsd(lsf: &DelayDopplerGrid<f64>) -> Vec<f64> {
    let (rows, cols) = lsf.values.shape();
    (0..cols).map(|c| (0..rows).map(|r| lsf.values[(r, c)]).sum()).collect()
}

/// Copy of `grid` scaled to unit total; an all-zero grid is returned unchanged.
pub fn normalized(grid: &DelayDopplerGrid<f64>) -> DelayDopplerGrid<f64> {
    let total: f64 = grid.values.iter().sum();
    let mut out = grid.clone();
    if total > 0.0 {
        out.values.as_mut_slice().iter_mut().for_each(|x| *x /= total);
    }
    out
}
