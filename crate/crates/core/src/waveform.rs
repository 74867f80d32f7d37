//! Zadoff-Chu weighted multitone sounding waveforms.
//!
//! Every transmitter sends one period of `L = T * fs` samples, repeated. Its
//! `K` tones sit on the `1/T` grid at `(k - K/2) * step + tx_index` bins, so
//! the combs of different transmitters interleave without sharing a bin and
//! every period is exactly periodic.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::params::SounderConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    /// Epoch of the first sample, seconds.
    pub t0: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, t0: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::config("sample_rate", "must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::Input("signal must contain at least one sample".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
            t0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean sample power.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn time_of(&self, n: usize) -> f64 {
        self.t0 + n as f64 / self.sample_rate
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zadoff-Chu sequence `exp(-j pi r n (n + c) / L)`, `c = L mod 2`.
pub fn zadoff_chu(root: i64, length: usize) -> Result<Vec<Complex64>> {
    if length < 1 {
        return Err(Error::Input("sequence length must be at least 1".into()));
    }
    if gcd(root.unsigned_abs(), length as u64) != 1 {
        return Err(Error::InvalidRoot { root, length });
    }
    let l = length as i128;
    let c = l % 2;
    // Reduce the phase numerator mod 2L in integers to keep long sequences exact.
    Ok((0..l)
        .map(|n| {
            let num = (root as i128 * n * (n + c)).rem_euclid(2 * l);
            Complex64::from_polar(1.0, -PI * num as f64 / l as f64)
        })
        .collect())
}

/// Tones and weights carried by one transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TonePlan {
    pub tx_index: usize,
    /// Baseband tone frequencies, Hz, ascending.
    pub tone_frequencies: Vec<f64>,
    /// Unit-magnitude complex weight of each tone.
    pub tone_weights: Vec<Complex64>,
    /// Bin of each tone in the DFT of one period.
    pub bins: Vec<usize>,
    /// Samples (and DFT bins) per period.
    pub period_len: usize,
}

impl TonePlan {
    /// Plan weighted by a Zadoff-Chu sequence of length `K` and the given root.
    pub fn new(cfg: &SounderConfig, tx_index: usize, zc_root: i64) -> Result<Self> {
        let weights = zadoff_chu(zc_root, cfg.tone_count)?;
        Self::with_weights(cfg, tx_index, weights)
    }

    pub fn with_weights(cfg: &SounderConfig, tx_index: usize, weights: Vec<Complex64>) -> Result<Self> {
        if tx_index >= cfg.tx_count {
            return Err(Error::config(
                "tx_index",
                format!("{tx_index} out of range for {} transmitters", cfg.tx_count),
            ));
        }
        if weights.len() != cfg.tone_count {
            return Err(Error::Shape {
                expected: format!("{} tone weights", cfg.tone_count),
                found: weights.len().to_string(),
            });
        }
        if weights.iter().any(|w| (w.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::Input("tone weights must have unit magnitude".into()));
        }
        let period_len = cfg.samples_per_period()?;
        let step = cfg.comb_step()?;
        if tx_index >= step || step * cfg.tone_count > period_len {
            return Err(Error::config(
                "tone_count",
                format!(
                    "{} tones at step {step} with offset {tx_index} do not fit {period_len} bins",
                    cfg.tone_count
                ),
            ));
        }
        let half = (cfg.tone_count / 2) as isize;
        let grid = 1.0 / cfg.sequence_period;
        let offsets: Vec<isize> = (0..cfg.tone_count as isize)
            .map(|k| (k - half) * step as isize + tx_index as isize)
            .collect();
        let tone_frequencies: Vec<f64> = offsets.iter().map(|&o| o as f64 * grid).collect();
        let max_abs = tone_frequencies.iter().fold(0.0f64, |m, f| m.max(f.abs()));
        if cfg.sample_rate < 2.0 * max_abs {
            return Err(Error::config(
                "sample_rate",
                format!("{} S/s cannot carry a tone at {max_abs} Hz", cfg.sample_rate),
            ));
        }
        let bins = offsets
            .iter()
            .map(|&o| o.rem_euclid(period_len as isize) as usize)
            .collect();
        Ok(Self {
            tx_index,
            tone_frequencies,
            tone_weights: weights,
            bins,
            period_len,
        })
    }

    pub fn tone_count(&self) -> usize {
        self.bins.len()
    }

    /// Spacing of adjacent tones, Hz.
    pub fn tone_spacing(&self) -> f64 {
        match self.tone_frequencies.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }
}

/// Every period-DFT bin used by any transmitter of `cfg`.
pub fn occupied_bins(cfg: &SounderConfig) -> Result<Vec<usize>> {
    let ones = vec![Complex64::new(1.0, 0.0); cfg.tone_count];
    let mut bins = Vec::new();
    for tx in 0..cfg.tx_count {
        bins.extend(TonePlan::with_weights(cfg, tx, ones.clone())?.bins);
    }
    bins.sort_unstable();
    bins.dedup();
    Ok(bins)
}

/// One period of the sum of the planned tones, each scaled by its weight.
pub fn multitone_waveform(cfg: &SounderConfig, plan: &TonePlan) -> Result<SampledSignal> {
    let len = cfg.samples_per_period()?;
    if len != plan.period_len {
        return Err(Error::config(
            "sequence_period",
            format!(
                "plan built for {} samples per period, config has {len}",
                plan.period_len
            ),
        ));
    }
    let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
    for (&bin, &w) in plan.bins.iter().zip(&plan.tone_weights) {
        spectrum[bin] += w;
    }
    fft::inverse(&mut spectrum);
    SampledSignal::new(spectrum, cfg.sample_rate, 0.0)
}

/// Peak amplitude over RMS amplitude.
pub fn crest_factor(sig: &SampledSignal) -> Result<f64> {
    let peak = sig.samples.iter().fold(0.0f64, |m, s| m.max(s.norm()));
    if peak == 0.0 {
        return Err(Error::Domain("crest factor of an all-zero signal".into()));
    }
    Ok(peak / sig.power().sqrt())
}
