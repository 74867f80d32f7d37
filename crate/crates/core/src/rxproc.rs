//! Receive chain: CFO estimation, per-snapshot derotation and coherent
//! averaging, tone demultiplexing and LOS delay alignment.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::fft;
use crate::grid::Grid;
use crate::params::{SounderConfig, SPEED_OF_LIGHT};
use crate::waveform::{occupied_bins, SampledSignal, TonePlan};

/// A correlator peak must exceed this multiple of the median grid value.
pub const DETECTION_RATIO: f64 = 10.0;

const REFINE_STEPS: usize = 12;

/// Time-variant transfer function of one transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunctionGrid {
    pub tx_index: usize,
    /// `Q x K`: snapshots by tones.
    pub values: Grid<Complex64>,
    /// Centre time of each snapshot, seconds after the trigger.
    pub snapshot_times: Vec<f64>,
    /// Baseband tone frequencies, Hz.
    pub tone_frequencies: Vec<f64>,
    /// Noise power per tone estimate, same scale as `|H|^2`.
    pub noise_power: Vec<f64>,
    pub snr_db: Vec<f64>,
}

impl TransferFunctionGrid {
    pub fn snapshot_count(&self) -> usize {
        self.values.rows()
    }

    pub fn tone_count(&self) -> usize {
        self.values.cols()
    }
}

/// Coherently averaged periods, one row per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedSnapshots {
    pub tx_index: usize,
    /// `Q x L`.
    pub periods: Grid<Complex64>,
    pub snapshot_times: Vec<f64>,
    /// Global index (samples since the trigger) of each snapshot's first sample.
    pub start_samples: Vec<i64>,
    /// Frequency removed before averaging (LOS Doppler plus CFO), Hz.
    pub offsets: Vec<f64>,
    pub averaging_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Derotation {
    /// Estimate the transmitter's LOS offset in each snapshot and remove it before averaging.
    #[default]
    LosEstimate,
    /// Average the raw periods.
    Off,
}

/// Per-bin period DFT values, `seq[k][p]`.
fn period_bins(samples: &[Complex64], period: usize, bins: &[usize]) -> Vec<Vec<Complex64>> {
    let periods = samples.len() / period;
    let mut seq = vec![Vec::with_capacity(periods); bins.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); period];
    for p in 0..periods {
        buf.copy_from_slice(&samples[p * period..(p + 1) * period]);
        fft::forward(&mut buf);
        for (s, &b) in seq.iter_mut().zip(bins) {
            s.push(buf[b]);
        }
    }
    seq
}

/// `sum_k |sum_p X_p[k] e^{-j 2 pi f p T}|^2`.
fn correlator(seq: &[Vec<Complex64>], f: f64, period_s: f64) -> f64 {
    let step = Complex64::from_polar(1.0, -2.0 * PI * f * period_s);
    seq.iter()
        .map(|s| {
            let mut rot = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for &x in s {
                acc += x * rot;
                rot *= step;
            }
            acc.norm_sqr()
        })
        .sum()
}

/// Iterated three-point parabolic refinement around a grid maximum.
fn refine_peak(mut f: f64, mut h: f64, eval: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..REFINE_STEPS {
        let (a, b, c) = (eval(f - h), eval(f), eval(f + h));
        let curvature = a - 2.0 * b + c;
        if curvature < 0.0 {
            f += (0.5 * (a - c) / curvature * h).clamp(-h, h);
        } else if a > b || c > b {
            f += if c > a { h } else { -h };
        }
        h *= 0.25;
    }
    f
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Carrier frequency offset of a standstill record, found by correlating the
/// occupied tones of `reference` (one transmit period) across periods.
pub fn estimate_cfo(rx: &SampledSignal, reference: &SampledSignal) -> Result<f64> {
    let period = reference.len();
    if (rx.sample_rate - reference.sample_rate).abs() > 1e-9 * rx.sample_rate {
        return Err(Error::config("sample_rate", "record and reference sample rates differ"));
    }
    let periods = rx.len() / period;
    if periods < 2 {
        return Err(Error::Length {
            needed: 2 * period,
            available: rx.len(),
        });
    }
    let mut spec = reference.samples.clone();
    fft::forward(&mut spec);
    let strongest = spec.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    if strongest == 0.0 {
        return Err(Error::Input("reference waveform is zero".into()));
    }
    let bins: Vec<usize> = (0..period).filter(|&k| spec[k].norm() > 1e-6 * strongest).collect();
    let seq = period_bins(&rx.samples, period, &bins);
    let period_s = period as f64 / rx.sample_rate;

    // Coarse search over the full unambiguous range with a zero-padded FFT per bin.
    let size = (4 * periods).next_power_of_two();
    let mut coarse = vec![0.0; size];
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for s in &seq {
        buf.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        buf[..s.len()].copy_from_slice(s);
        fft::forward(&mut buf);
        for (c, x) in coarse.iter_mut().zip(&buf) {
            *c += x.norm_sqr();
        }
    }
    let (best, &peak) = coarse
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let threshold = DETECTION_RATIO * median(&coarse);
    if peak.is_nan() || peak <= threshold {
        return Err(Error::NoSignal { peak, threshold });
    }
    let step = 1.0 / (size as f64 * period_s);
    let f0 = fft::signed_bin(best, size) as f64 * step;
    Ok(refine_peak(f0, step, |f| correlator(&seq, f, period_s)))
}

fn unit_plan(cfg: &SounderConfig, tx_index: usize) -> Result<TonePlan> {
    TonePlan::with_weights(cfg, tx_index, vec![Complex64::new(1.0, 0.0); cfg.tone_count])
}

/// Averages `N` periods per snapshot with LOS offset derotation.
pub fn coherent_average(
    rx: &SampledSignal,
    cfg: &SounderConfig,
    cfo: f64,
    tx_index: usize,
) -> Result<AveragedSnapshots> {
    coherent_average_with(rx, cfg, cfo, tx_index, Derotation::LosEstimate)
}

/// Splits the record into non-overlapping snapshots of `N` periods and averages each.
///
/// With derotation the estimated offset is removed relative to the snapshot
/// centre, so the averaged period carries the channel at that instant, still
/// rotated by the CFO phase there. That CFO phase is then removed, which
/// leaves the Doppler evolution between snapshots intact.
pub fn coherent_average_with(
    rx: &SampledSignal,
    cfg: &SounderConfig,
    cfo: f64,
    tx_index: usize,
    derotation: Derotation,
) -> Result<AveragedSnapshots> {
    if (rx.sample_rate - cfg.sample_rate).abs() > 1e-9 * cfg.sample_rate {
        return Err(Error::config("sample_rate", "record does not match the sounder"));
    }
    let period = cfg.samples_per_period()?;
    let n = cfg.averaging_count;
    let block = period * n;
    let q_count = rx.len() / block;
    if q_count == 0 {
        return Err(Error::Length {
            needed: block,
            available: rx.len(),
        });
    }
    let bins = unit_plan(cfg, tx_index)?.bins;
    let fs = cfg.sample_rate;
    let period_s = period as f64 / fs;
    let span = 2.0 * cfg.max_doppler;
    let grid_step = (1.0 / (4.0 * n as f64 * period_s)).min(span / 16.0);
    let grid_points = (2.0 * span / grid_step).ceil() as usize + 1;
    let first_global = (rx.t0 * fs).round() as i64;

    let rows: Vec<(Vec<Complex64>, f64)> = (0..q_count)
        .into_par_iter()
        .map(|q| {
            let samples = &rx.samples[q * block..(q + 1) * block];
            let t_c = rx.time_of(q * block) + block as f64 / (2.0 * fs);
            let offset = match derotation {
                Derotation::Off => cfo,
                Derotation::LosEstimate => {
                    let seq = period_bins(samples, period, &bins);
                    let eval = |f: f64| correlator(&seq, f, period_s);
                    let lo = cfo - span;
                    let f0 = (0..grid_points)
                        .map(|i| lo + i as f64 * grid_step)
                        .max_by(|a, b| eval(*a).total_cmp(&eval(*b)))
                        .expect("non-empty grid");
                    refine_peak(f0, grid_step, eval)
                }
            };
            let mut avg = vec![Complex64::new(0.0, 0.0); period];
            let derotate = derotation == Derotation::LosEstimate;
            let step = Complex64::from_polar(1.0, -2.0 * PI * offset / fs);
            for p in 0..n {
                let chunk = &samples[p * period..(p + 1) * period];
                if derotate {
                    let dt = (p * period) as f64 / fs - block as f64 / (2.0 * fs);
                    let mut rot = Complex64::from_polar(1.0, -2.0 * PI * offset * dt);
                    for (a, &x) in avg.iter_mut().zip(chunk) {
                        *a += x * rot;
                        rot *= step;
                    }
                } else {
                    for (a, &x) in avg.iter_mut().zip(chunk) {
                        *a += x;
                    }
                }
            }
            let cfo_phase = -2.0 * PI * (cfo * t_c).fract();
            let scale = Complex64::from_polar(1.0 / n as f64, cfo_phase);
            avg.iter_mut().for_each(|a| *a *= scale);
            (avg, offset)
        })
        .collect();

    let mut data = Vec::with_capacity(q_count * period);
    let mut offsets = Vec::with_capacity(q_count);
    for (row, off) in rows {
        data.extend(row);
        offsets.push(off);
    }
    Ok(AveragedSnapshots {
        tx_index,
        periods: Grid::from_vec(q_count, period, data),
        snapshot_times: (0..q_count)
            .map(|q| rx.time_of(q * block) + block as f64 / (2.0 * fs))
            .collect(),
        start_samples: (0..q_count).map(|q| first_global + (q * block) as i64).collect(),
        offsets,
        averaging_count: n,
    })
}

/// Extracts the tones of `plan` from every averaged period.
pub fn demultiplex(avg: &AveragedSnapshots, cfg: &SounderConfig, plan: &TonePlan) -> Result<TransferFunctionGrid> {
    let period = avg.periods.cols();
    if plan.period_len != period || cfg.samples_per_period()? != period {
        return Err(Error::config(
            "sequence_period",
            format!(
                "plan has {} bins, averaged periods have {period} samples",
                plan.period_len
            ),
        ));
    }
    let occupied = occupied_bins(cfg)?;
    let free: Vec<usize> = (0..period).filter(|b| occupied.binary_search(b).is_err()).collect();
    if free.is_empty() {
        return Err(Error::config(
            "tone_count",
            "no unoccupied bins left for noise estimation",
        ));
    }
    let l = period as f64;
    let q_count = avg.periods.rows();
    let k_count = plan.tone_count();
    let mut values = Vec::with_capacity(q_count * k_count);
    let mut noise_power = Vec::with_capacity(q_count);
    let mut snr_db = Vec::with_capacity(q_count);
    let mut buf = vec![Complex64::new(0.0, 0.0); period];
    for q in 0..q_count {
        buf.copy_from_slice(avg.periods.row(q));
        fft::forward(&mut buf);
        // Undo the phase of a period that does not start on a period boundary.
        let shift = avg.start_samples[q].rem_euclid(period as i64) as f64;
        let row: Vec<Complex64> = plan
            .bins
            .iter()
            .zip(&plan.tone_weights)
            .map(|(&b, &w)| {
                let align = Complex64::from_polar(1.0, -2.0 * PI * b as f64 * shift / l);
                buf[b] * align / (w * l)
            })
            .collect();
        let noise = free.iter().map(|&b| buf[b].norm_sqr()).sum::<f64>() / (free.len() as f64 * l * l);
        let signal = row.iter().map(|h| h.norm_sqr()).sum::<f64>() / k_count as f64;
        snr_db.push(10.0 * (signal / noise).log10());
        noise_power.push(noise);
        values.extend(row);
    }
    Ok(TransferFunctionGrid {
        tx_index: plan.tx_index,
        values: Grid::from_vec(q_count, k_count, values),
        snapshot_times: avg.snapshot_times.clone(),
        tone_frequencies: plan.tone_frequencies.clone(),
        noise_power,
        snr_db,
    })
}

/// Advances every snapshot by `delay` seconds: `H[t, f] e^{+j 2 pi f delay}`.
pub fn advance_delay(h: &TransferFunctionGrid, delay: f64) -> TransferFunctionGrid {
    let ramp: Vec<Complex64> = h
        .tone_frequencies
        .iter()
        .map(|&f| Complex64::from_polar(1.0, 2.0 * PI * f * delay))
        .collect();
    let mut out = h.clone();
    for q in 0..out.values.rows() {
        for (x, r) in out.values.row_mut(q).iter_mut().zip(&ramp) {
            *x *= r;
        }
    }
    out
}

/// References delay to the LOS path at the trigger, computed from the known
/// trigger distance.
pub fn align_los_delay(h: &TransferFunctionGrid, sc: &ScenarioConfig) -> TransferFunctionGrid {
    advance_delay(h, sc.trigger_los_distance() / SPEED_OF_LIGHT)
}

/// Mean tone power over noise power per snapshot, dB.
pub fn snr_per_tx(h: &TransferFunctionGrid, noise_power: &[f64]) -> Result<Vec<f64>> {
    if noise_power.len() != h.snapshot_count() {
        return Err(Error::Shape {
            expected: format!("{} noise estimates", h.snapshot_count()),
            found: noise_power.len().to_string(),
        });
    }
    (0..h.snapshot_count())
        .map(|q| {
            let noise = noise_power[q];
            if noise.is_nan() || noise <= 0.0 {
                return Err(Error::Degenerate(format!("zero noise estimate in snapshot {q}")));
            }
            let row = h.values.row(q);
            let signal = row.iter().map(|x| x.norm_sqr()).sum::<f64>() / row.len() as f64;
            Ok(10.0 * (signal / noise).log10())
        })
        .collect()
}
