//! Delay-Doppler analysis of transfer-function windows.
//!
//! A window is `K` tones by `M` consecutive snapshots. Its symplectic
//! transform `S = F_K^H H F_M` (unitary DFTs) puts delay along rows and
//! Doppler along columns; grids carry the Doppler columns centred so that the
//! axis runs from `-M/2` to `M/2 - 1` bins.

mod dpss;
mod lsf;
mod peaks;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use dpss::{dpss_tapers, Tapers};
pub use lsf::{dsd, lsf_estimate, normalized, LSFConfig, LsfEstimator};
pub use peaks::{top_peaks_2d, Peak, PeakList};

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::Grid;
use crate::params::SounderConfig;
use crate::rxproc::TransferFunctionGrid;

/// `K x M` slice of a transfer function: tones by snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeFrequencyWindow {
    pub values: Grid<Complex64>,
    /// Hz between adjacent tones.
    pub tone_spacing: f64,
    /// Seconds between adjacent snapshots.
    pub snapshot_period: f64,
    pub start_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayDopplerGrid<T> {
    /// Delay bins by centred Doppler bins.
    pub values: Grid<T>,
    /// Seconds.
    pub delay_axis: Vec<f64>,
    /// Hz, ascending.
    pub doppler_axis: Vec<f64>,
    pub window_start_time: f64,
}

impl<T: Clone> DelayDopplerGrid<T> {
    /// Wraps a grid in raw DFT column order, centring the Doppler columns.
    pub fn from_raw(raw: &Grid<T>, delay_step: f64, doppler_step: f64, window_start_time: f64) -> Self {
        let (rows, cols) = raw.shape();
        Self {
            values: Grid::from_fn(rows, cols, |r, c| raw[(r, fft::raw_index(c, cols))].clone()),
            delay_axis: (0..rows).map(|n| n as f64 * delay_step).collect(),
            doppler_axis: (0..cols)
                .map(|c| fft::centered_value(c, cols) as f64 * doppler_step)
                .collect(),
            window_start_time,
        }
    }

    /// Values back in raw DFT column order.
    pub fn to_raw(&self) -> Grid<T> {
        let (rows, cols) = self.values.shape();
        Grid::from_fn(rows, cols, |r, c| {
            self.values[(r, fft::centered_column(c, cols))].clone()
        })
    }

    pub fn delay_step(&self) -> f64 {
        axis_step(&self.delay_axis)
    }

    pub fn doppler_step(&self) -> f64 {
        axis_step(&self.doppler_axis)
    }
}

fn axis_step(axis: &[f64]) -> f64 {
    match axis {
        [a, b, ..] => b - a,
        _ => 0.0,
    }
}

fn check_nonempty<T>(g: &Grid<T>) -> Result<()> {
    if g.rows() == 0 || g.cols() == 0 {
        return Err(Error::Shape {
            expected: "non-empty grid".into(),
            found: format!("{}x{}", g.rows(), g.cols()),
        });
    }
    Ok(())
}

fn transform_columns(g: &mut Grid<Complex64>, f: fn(&mut [Complex64])) {
    let (rows, cols) = g.shape();
    let mut buf = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            buf[r] = g[(r, c)];
        }
        f(&mut buf);
        for r in 0..rows {
            g[(r, c)] = buf[r];
        }
    }
}

fn transform_rows(g: &mut Grid<Complex64>, f: fn(&mut [Complex64])) {
    for r in 0..g.rows() {
        f(g.row_mut(r));
    }
}

/// `S = F_K^H H F_M` in raw index order.
pub fn sfft_matrix(h: &Grid<Complex64>) -> Result<Grid<Complex64>> {
    check_nonempty(h)?;
    let mut s = h.clone();
    transform_columns(&mut s, fft::inverse_unitary);
    transform_rows(&mut s, fft::forward_unitary);
    Ok(s)
}

/// `H = F_K S F_M^H` in raw index order.
pub fn isfft_matrix(s: &Grid<Complex64>) -> Result<Grid<Complex64>> {
    check_nonempty(s)?;
    let mut h = s.clone();
    transform_columns(&mut h, fft::forward_unitary);
    transform_rows(&mut h, fft::inverse_unitary);
    Ok(h)
}

impl TimeFrequencyWindow {
    pub fn new(values: Grid<Complex64>, tone_spacing: f64, snapshot_period: f64, start_time: f64) -> Result<Self> {
        check_nonempty(&values)?;
        Ok(Self {
            values,
            tone_spacing,
            snapshot_period,
            start_time,
        })
    }

    pub fn tone_count(&self) -> usize {
        self.values.rows()
    }

    pub fn snapshot_count(&self) -> usize {
        self.values.cols()
    }

    /// Native delay bin, `1 / (K * tone_spacing)`.
    pub fn delay_resolution(&self) -> f64 {
        1.0 / (self.tone_count() as f64 * self.tone_spacing)
    }

    /// Native Doppler bin, `1 / (M * snapshot_period)`.
    pub fn doppler_resolution(&self) -> f64 {
        1.0 / (self.snapshot_count() as f64 * self.snapshot_period)
    }
}

pub fn sfft(w: &TimeFrequencyWindow) -> Result<DelayDopplerGrid<Complex64>> {
    let raw = sfft_matrix(&w.values)?;
    Ok(DelayDopplerGrid::from_raw(
        &raw,
        w.delay_resolution(),
        w.doppler_resolution(),
        w.start_time,
    ))
}

pub fn isfft(s: &DelayDopplerGrid<Complex64>) -> Result<TimeFrequencyWindow> {
    let (k, m) = s.values.shape();
    let values = isfft_matrix(&s.to_raw())?;
    let tone_spacing = 1.0 / (k as f64 * s.delay_step());
    let snapshot_period = 1.0 / (m as f64 * s.doppler_step());
    TimeFrequencyWindow::new(values, tone_spacing, snapshot_period, s.window_start_time)
}

/// Cuts `M` snapshots starting at snapshot `start` out of `h`, transposed to tones by time.
pub fn window_at(h: &TransferFunctionGrid, start: usize, m: usize, cfg: &SounderConfig) -> Result<TimeFrequencyWindow> {
    if m == 0 || start + m > h.snapshot_count() {
        return Err(Error::Length {
            needed: start + m.max(1),
            available: h.snapshot_count(),
        });
    }
    let k = h.tone_count();
    let values = Grid::from_fn(k, m, |r, c| h.values[(start + c, r)]);
    let tone_spacing = match h.tone_frequencies.as_slice() {
        [a, b, ..] => b - a,
        _ => cfg.tone_spacing,
    };
    let snapshot_period = cfg.snapshot_period();
    let start_time = h.snapshot_times[start] - snapshot_period / 2.0;
    TimeFrequencyWindow::new(values, tone_spacing, snapshot_period, start_time)
}

/// Non-overlapping windows of `M` snapshots; a trailing remainder is dropped.
pub fn tile_windows(h: &TransferFunctionGrid, m: usize, cfg: &SounderConfig) -> Result<Vec<TimeFrequencyWindow>> {
    if m == 0 {
        return Err(Error::config("window_length", "must be at least 1"));
    }
    (0..h.snapshot_count() / m)
        .map(|w| window_at(h, w * m, m, cfg))
        .collect()
}
