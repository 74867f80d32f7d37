//! Receive-record synthesis.
//!
//! The record is built in blocks of one snapshot (`N * L` samples). Path
//! parameters are frozen at the block midpoint; each path contributes the
//! periodic transmit waveform delayed by an exact band-limited phase ramp,
//! scaled by its complex gain and rotated by its Doppler phasor. Noise for a
//! block comes from its own ChaCha stream so blocks can be generated in any
//! order.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{scenario_paths, Path, ScenarioConfig};
use crate::error::{Error, Result};
use crate::fft;
use crate::params::SounderConfig;
use crate::waveform::SampledSignal;

/// Time-varying multipath seen by each transmitter.
pub trait PathModel: Sync {
    /// Paths of transmitter `tx_index` at time `t`; gains are instantaneous.
    fn paths(&self, t: f64, tx_index: usize) -> Result<Vec<Path>>;
}

/// Fixed delays and Dopplers. Gains are given at `t = 0` and rotate with the
/// path Doppler.
#[derive(Debug, Clone, Default)]
pub struct StaticPaths {
    pub per_tx: Vec<Vec<Path>>,
}

impl StaticPaths {
    pub fn new(per_tx: Vec<Vec<Path>>) -> Self {
        Self { per_tx }
    }
}

impl PathModel for StaticPaths {
    fn paths(&self, t: f64, tx_index: usize) -> Result<Vec<Path>> {
        let paths = self.per_tx.get(tx_index).cloned().unwrap_or_default();
        Ok(paths
            .into_iter()
            .map(|p| Path {
                gain: p.gain * Complex64::from_polar(1.0, 2.0 * PI * p.doppler * t),
                ..p
            })
            .collect())
    }
}

/// Drive-by geometry as a [`PathModel`]. Times past the scenario end are
/// clamped so a trailing partial block still has a defined channel.
#[derive(Debug, Clone)]
pub struct ScenarioModel<'a> {
    pub scenario: &'a ScenarioConfig,
    pub config: &'a SounderConfig,
}

impl<'a> ScenarioModel<'a> {
    pub fn new(scenario: &'a ScenarioConfig, config: &'a SounderConfig) -> Self {
        Self { scenario, config }
    }
}

impl PathModel for ScenarioModel<'_> {
    fn paths(&self, t: f64, tx_index: usize) -> Result<Vec<Path>> {
        let t = t.clamp(0.0, self.scenario.duration);
        Ok(scenario_paths(self.scenario, self.config, t, tx_index)?.paths)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Impairments {
    /// Carrier frequency offset, Hz.
    pub cfo: f64,
    /// Complex noise variance per sample.
    pub noise_power: f64,
}

/// Synthesizes `len` samples starting at the first sample of snapshot block
/// `start_block` (time zero is the trigger).
pub fn synthesize(
    tx_signals: &[SampledSignal],
    model: &dyn PathModel,
    cfg: &SounderConfig,
    start_block: usize,
    len: usize,
    imp: Impairments,
    seed: u64,
) -> Result<SampledSignal> {
    if len == 0 {
        return Err(Error::Input("empty record requested".into()));
    }
    if !(imp.noise_power.is_finite() && imp.noise_power >= 0.0) {
        return Err(Error::config("noise_power", "must be finite and non-negative"));
    }
    let period = cfg.samples_per_period()?;
    let block_len = cfg.samples_per_snapshot()?;
    let fs = cfg.sample_rate;
    let spectra = tx_spectra(tx_signals, period, fs)?;
    let bin_freqs: Vec<f64> = (0..period)
        .map(|k| fft::signed_bin(k, period) as f64 * fs / period as f64)
        .collect();
    let noise_std = (imp.noise_power / 2.0).sqrt();

    let mut samples = vec![Complex64::new(0.0, 0.0); len];
    samples
        .par_chunks_mut(block_len)
        .enumerate()
        .try_for_each(|(b, out)| -> Result<()> {
            let block = start_block + b;
            let first = block * block_len;
            let t_mid = (first as f64 + block_len as f64 / 2.0) / fs;
            for (tx, spectrum) in spectra.iter().enumerate() {
                for path in model.paths(t_mid, tx)? {
                    add_path(out, spectrum, &bin_freqs, &path, first, t_mid, fs);
                }
            }
            apply_cfo(out, imp.cfo, first, period, fs);
            if noise_std > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(block as u64);
                for s in out.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *s += Complex64::new(re, im) * noise_std;
                }
            }
            Ok(())
        })?;
    SampledSignal::new(samples, fs, (start_block * block_len) as f64 / fs)
}

fn tx_spectra(tx_signals: &[SampledSignal], period: usize, fs: f64) -> Result<Vec<Vec<Complex64>>> {
    tx_signals
        .iter()
        .map(|s| {
            if (s.sample_rate - fs).abs() > 1e-9 * fs {
                return Err(Error::config(
                    "sample_rate",
                    format!("transmit signal at {} S/s, sounder at {fs} S/s", s.sample_rate),
                ));
            }
            if s.len() != period {
                return Err(Error::Shape {
                    expected: format!("{period}-sample transmit period"),
                    found: s.len().to_string(),
                });
            }
            let mut spec = s.samples.clone();
            fft::forward(&mut spec);
            Ok(spec)
        })
        .collect()
}

fn add_path(
    out: &mut [Complex64],
    spectrum: &[Complex64],
    bin_freqs: &[f64],
    path: &Path,
    first: usize,
    t_ref: f64,
    fs: f64,
) {
    let period = spectrum.len();
    let mut delayed: Vec<Complex64> = spectrum
        .iter()
        .zip(bin_freqs)
        .map(|(&x, &f)| x * Complex64::from_polar(1.0, -2.0 * PI * f * path.delay))
        .collect();
    fft::inverse(&mut delayed);
    let scale = 1.0 / period as f64;
    let step = Complex64::from_polar(1.0, 2.0 * PI * path.doppler / fs);
    for (p, chunk) in out.chunks_mut(period).enumerate() {
        let n0 = first + p * period;
        let t0 = n0 as f64 / fs - t_ref;
        // Re-anchor the phasor every period to bound rounding drift.
        let mut rot = path.gain * scale * Complex64::from_polar(1.0, 2.0 * PI * path.doppler * t0);
        let offset = n0 % period;
        for (i, s) in chunk.iter_mut().enumerate() {
            *s += delayed[(offset + i) % period] * rot;
            rot *= step;
        }
    }
}

fn apply_cfo(out: &mut [Complex64], cfo: f64, first: usize, period: usize, fs: f64) {
    if cfo == 0.0 {
        return;
    }
    let step = Complex64::from_polar(1.0, 2.0 * PI * cfo / fs);
    for (p, chunk) in out.chunks_mut(period).enumerate() {
        let n0 = first + p * period;
        let mut rot = Complex64::from_polar(1.0, 2.0 * PI * cfo * (n0 as f64 / fs));
        for s in chunk.iter_mut() {
            *s *= rot;
            rot *= step;
        }
    }
}

/// Full drive-by record of `duration * sample_rate` samples.
pub fn apply_channel(
    tx_signals: &[SampledSignal],
    sc: &ScenarioConfig,
    cfg: &SounderConfig,
    seed: u64,
) -> Result<SampledSignal> {
    sc.validate(cfg)?;
    if tx_signals.len() != cfg.tx_count {
        return Err(Error::config(
            "tx_count",
            format!(
                "{} transmit signals for {} transmitters",
                tx_signals.len(),
                cfg.tx_count
            ),
        ));
    }
    let len = (sc.duration * cfg.sample_rate).round() as usize;
    let imp = Impairments {
        cfo: sc.cfo,
        noise_power: sc.noise_power(),
    };
    synthesize(tx_signals, &ScenarioModel::new(sc, cfg), cfg, 0, len, imp, seed)
}
