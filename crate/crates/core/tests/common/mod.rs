#![allow(dead_code)]

use std::f64::consts::PI;

use dds_core::grid::Grid;
use dds_core::tfanalysis::TimeFrequencyWindow;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const TONE_SPACING: f64 = 4.76e6;
pub const SNAPSHOT_PERIOD: f64 = 178.08e-6;

/// Circular complex Gaussian samples of variance `var`.
pub fn noise(n: usize, var: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let s = (var / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * s
        })
        .collect()
}

pub fn random_grid(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Grid<Complex64> {
    Grid::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// `K x M` window holding taps `(delay s, Doppler Hz, gain)` plus noise of variance `noise_var` per cell.
pub fn planted_window(
    k: usize,
    m: usize,
    taps: &[(f64, f64, Complex64)],
    noise_var: f64,
    rng: &mut ChaCha8Rng,
) -> TimeFrequencyWindow {
    let w = noise(k * m, noise_var, rng);
    let values = Grid::from_fn(k, m, |r, c| {
        let f = r as f64 * TONE_SPACING;
        let t = c as f64 * SNAPSHOT_PERIOD;
        taps.iter()
            .map(|&(tau, nu, g)| g * Complex64::from_polar(1.0, -2.0 * PI * f * tau + 2.0 * PI * nu * t))
            .sum::<Complex64>()
            + w[r * m + c]
    });
    TimeFrequencyWindow::new(values, TONE_SPACING, SNAPSHOT_PERIOD, 0.0).unwrap()
}

/// Native delay bin width of a `k`-tone window, s.
pub fn delay_bin(k: usize) -> f64 {
    1.0 / (k as f64 * TONE_SPACING)
}

/// Native Doppler bin width of an `m`-snapshot window, Hz.
pub fn doppler_bin(m: usize) -> f64 {
    1.0 / (m as f64 * SNAPSHOT_PERIOD)
}
