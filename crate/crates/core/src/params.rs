//! Sounder parameter checks and derived link quantities.
//!
//! A [`SounderConfig`] is valid when its tone plan samples the delay spread
//! without aliasing, its snapshot rate samples the Doppler spread, and the
//! interleaved per-transmitter combs fit on the period grid.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative slack granted to the rounded values of a published parameter table.
pub const ROUNDING_TOLERANCE: f64 = 1e-3;

/// Allowed mismatch between the configured snapshot count and `floor(T_rec / T_snap)`.
pub const SNAPSHOT_COUNT_TOLERANCE: f64 = 0.01;

/// Allowed mismatch between the configured maximum Doppler and `v_max * fc / c`.
pub const DOPPLER_ROUNDING_TOLERANCE: f64 = 0.01;

/// Missing keys take their [`SounderConfig::street_crossing`] value when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SounderConfig {
    /// Hz.
    pub center_frequency: f64,
    /// Spacing between the tones of one transmitter, Hz.
    pub tone_spacing: f64,
    pub tone_count: usize,
    pub tx_count: usize,
    /// Frequency offset between the combs of adjacent transmitters, Hz.
    pub tx_tone_offset: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Seconds.
    pub max_excess_delay: f64,
    /// Period of one sounding sequence, seconds.
    pub sequence_period: f64,
    /// Number of periods coherently averaged per snapshot.
    pub averaging_count: usize,
    /// Seconds.
    pub snapshot_time: f64,
    /// m/s.
    pub max_speed: f64,
    /// Hz.
    pub max_doppler: f64,
    /// Seconds.
    pub recording_time: f64,
    /// Complex samples per second.
    pub sample_rate: f64,
    pub snapshot_count: usize,
}

impl Default for SounderConfig {
    fn default() -> Self {
        Self::street_crossing()
    }
}

impl SounderConfig {
    /// The 60 GHz street-crossing sounder.
    pub fn street_crossing() -> Self {
        Self {
            center_frequency: 60.15e9,
            tone_spacing: 4.76e6,
            tone_count: 21,
            tx_count: 2,
            tx_tone_offset: 1.19e6,
            bandwidth: 100e6,
            max_excess_delay: 105e-9,
            sequence_period: 840e-9,
            averaging_count: 212,
            snapshot_time: 178.07e-6,
            max_speed: 14.0,
            max_doppler: 2800.0,
            recording_time: 3.6,
            sample_rate: 125e6,
            snapshot_count: 20_275,
        }
    }

    /// Rejects non-positive or non-finite fields, naming the first offender.
    pub fn check_positive(&self) -> Result<()> {
        let reals = [
            ("center_frequency", self.center_frequency),
            ("tone_spacing", self.tone_spacing),
            ("tx_tone_offset", self.tx_tone_offset),
            ("bandwidth", self.bandwidth),
            ("max_excess_delay", self.max_excess_delay),
            ("sequence_period", self.sequence_period),
            ("snapshot_time", self.snapshot_time),
            ("max_speed", self.max_speed),
            ("max_doppler", self.max_doppler),
            ("recording_time", self.recording_time),
            ("sample_rate", self.sample_rate),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        let ints = [
            ("tone_count", self.tone_count),
            ("tx_count", self.tx_count),
            ("averaging_count", self.averaging_count),
            ("snapshot_count", self.snapshot_count),
        ];
        for (name, v) in ints {
            if v < 1 {
                return Err(Error::config(name, "must be at least 1"));
            }
        }
        Ok(())
    }

    /// `T * sample_rate`, required to be an integer.
    pub fn samples_per_period(&self) -> Result<usize> {
        let exact = self.sequence_period * self.sample_rate;
        let rounded = exact.round();
        if rounded < 1.0 || (exact - rounded).abs() > 1e-6 {
            return Err(Error::config(
                "sequence_period",
                format!("period spans {exact} samples, not an integer"),
            ));
        }
        Ok(rounded as usize)
    }

    pub fn samples_per_snapshot(&self) -> Result<usize> {
        Ok(self.samples_per_period()? * self.averaging_count)
    }

    /// Snapshot duration implied by the averaging, `N * T`.
    pub fn snapshot_period(&self) -> f64 {
        self.averaging_count as f64 * self.sequence_period
    }

    /// Number of period-DFT bins between adjacent tones of one transmitter.
    pub fn comb_step(&self) -> Result<usize> {
        let ratio = self.tone_spacing / self.tx_tone_offset;
        let step = ratio.round();
        if step < 1.0 || ((ratio - step) / step).abs() > ROUNDING_TOLERANCE {
            return Err(Error::config(
                "tone_spacing",
                format!("tone spacing is {ratio:.4} comb offsets, not an integer"),
            ));
        }
        Ok(step as usize)
    }

    /// Speed-derived maximum Doppler `v_max * fc / c`.
    pub fn exact_max_doppler(&self) -> f64 {
        self.max_speed * self.center_frequency / SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
    /// How `value` relates to `bound` when the check passes.
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub derived: BTreeMap<String, f64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<20} {:>16.9e} {:<3} {:>16.9e} {}",
                c.name,
                c.value,
                c.relation,
                c.bound,
                if c.pass { "PASS" } else { "FAIL" }
            )?;
        }
        for (k, v) in &self.derived {
            writeln!(f, "# {k} = {v:.9e}")?;
        }
        writeln!(f, "{}", if self.passed() { "OVERALL PASS" } else { "OVERALL FAIL" })
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

pub fn validate_config(cfg: &SounderConfig) -> Result<ValidationReport> {
    cfg.check_positive()?;
    let mut checks = Vec::new();
    let mut push = |name: &str, pass: bool, value: f64, bound: f64, relation: &str| {
        checks.push(Check {
            name: name.to_string(),
            pass,
            value,
            bound,
            relation: relation.to_string(),
        })
    };

    let delay_bound = 1.0 / (2.0 * cfg.max_excess_delay);
    push(
        "delay_sampling",
        cfg.tone_spacing <= delay_bound,
        cfg.tone_spacing,
        delay_bound,
        "<=",
    );

    let t_snap = cfg.snapshot_period();
    let doppler_bound = 1.0 / (2.0 * cfg.max_doppler);
    push("doppler_sampling", t_snap <= doppler_bound, t_snap, doppler_bound, "<=");

    let exact_doppler = cfg.exact_max_doppler();
    push(
        "doppler_rounding",
        rel_close(cfg.max_doppler, exact_doppler, DOPPLER_ROUNDING_TOLERANCE),
        cfg.max_doppler,
        exact_doppler,
        "~=",
    );

    let comb_period = 1.0 / cfg.tx_tone_offset;
    push(
        "comb_period",
        rel_close(cfg.sequence_period, comb_period, ROUNDING_TOLERANCE),
        cfg.sequence_period,
        comb_period,
        "~=",
    );

    push(
        "snapshot_time",
        rel_close(cfg.snapshot_time, t_snap, ROUNDING_TOLERANCE),
        cfg.snapshot_time,
        t_snap,
        "~=",
    );

    let occupied = cfg.tone_count as f64 * cfg.tone_spacing;
    push("bandwidth", occupied <= cfg.bandwidth, occupied, cfg.bandwidth, "<=");

    let period_samples = cfg.sequence_period * cfg.sample_rate;
    push(
        "period_samples",
        (period_samples - period_samples.round()).abs() <= 1e-6 && period_samples >= 1.0,
        period_samples,
        period_samples.round(),
        "==",
    );

    // The combs interleave on the 1/T grid: each transmitter owns one of
    // `step` residues and the K tones of one comb must fit in one period.
    let ratio = cfg.tone_spacing / cfg.tx_tone_offset;
    let comb_fits = match (cfg.comb_step(), cfg.samples_per_period()) {
        (Ok(step), Ok(bins)) => cfg.tx_count <= step && step * cfg.tone_count <= bins,
        _ => false,
    };
    push("comb_fit", comb_fits, cfg.tx_count as f64, ratio, "<=");

    let q = (cfg.recording_time / t_snap).floor();
    push(
        "snapshot_count",
        (cfg.snapshot_count as f64 - q).abs() <= SNAPSHOT_COUNT_TOLERANCE * q,
        cfg.snapshot_count as f64,
        q,
        "~=",
    );

    let mut derived = BTreeMap::new();
    derived.insert("processing_gain_db".into(), processing_gain(cfg.averaging_count)?);
    derived.insert("alias_free_delay_s".into(), 1.0 / (2.0 * cfg.tone_spacing));
    derived.insert("snapshot_time_s".into(), t_snap);
    derived.insert("max_doppler_exact_hz".into(), exact_doppler);
    derived.insert("max_doppler_rounded_hz".into(), cfg.max_doppler);
    derived.insert("snapshot_count".into(), q);
    derived.insert("samples_per_period".into(), period_samples);
    derived.insert("travel_distance_m".into(), cfg.max_speed * cfg.recording_time);

    Ok(ValidationReport { checks, derived })
}

/// SNR gain of coherently averaging `n` repetitions, in dB.
pub fn processing_gain(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("averaging count must be at least 1".into()));
    }
    Ok(10.0 * (n as f64).log10())
}

/// Free-space path loss `20 log10(4 pi d fc / c)` in dB.
pub fn free_space_path_loss(distance: f64, fc: f64) -> Result<f64> {
    if !(distance > 0.0 && fc > 0.0) {
        return Err(Error::Domain(format!(
            "distance and frequency must be positive (got {distance} m, {fc} Hz)"
        )));
    }
    Ok(20.0 * (4.0 * PI * distance * fc / SPEED_OF_LIGHT).log10())
}

/// Doppler shift of a radial speed at carrier `fc`.
pub fn max_doppler(speed: f64, fc: f64) -> Result<f64> {
    if speed < 0.0 {
        return Err(Error::Domain(format!("speed must be non-negative, got {speed}")));
    }
    Ok(speed * fc / SPEED_OF_LIGHT)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn street_crossing_passes_every_check() {
        let report = validate_config(&SounderConfig::street_crossing()).unwrap();
        for c in &report.checks {
            assert!(c.pass, "{c:?}");
        }
        assert_eq!(report.checks.len(), 9);
        let d = &report.derived;
        assert!((d["alias_free_delay_s"] - 105e-9).abs() < 0.1e-9);
        assert!((d["processing_gain_db"] - 23.26).abs() < 0.005);
        assert_eq!(d["samples_per_period"], 105.0);
    }

    #[test]
    fn long_excess_delay_fails_delay_check() {
        let cfg = SounderConfig {
            max_excess_delay: 200e-9,
            ..SounderConfig::street_crossing()
        };
        let report = validate_config(&cfg).unwrap();
        assert!(!report.check("delay_sampling").unwrap().pass);
        assert!(!report.passed());
    }

    #[test]
    fn one_more_average_breaks_doppler_sampling() {
        let cfg = SounderConfig {
            averaging_count: 213,
            ..SounderConfig::street_crossing()
        };
        let report = validate_config(&cfg).unwrap();
        let c = report.check("doppler_sampling").unwrap();
        // 213 * 840 ns against 1 / (2 * 2800 Hz)
        assert!((c.value - 178.92e-6).abs() < 1e-10);
        assert!((c.bound - 178.571_428_6e-6).abs() < 1e-12);
        assert!(!c.pass);
    }

    #[test]
    fn non_positive_field_is_named() {
        let cfg = SounderConfig {
            bandwidth: 0.0,
            ..SounderConfig::street_crossing()
        };
        match validate_config(&cfg) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "bandwidth"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = SounderConfig {
            tone_count: 0,
            ..SounderConfig::street_crossing()
        };
        assert!(matches!(validate_config(&cfg), Err(Error::InvalidConfig { .. })));
    }

    #[test]
    fn processing_gain_values() {
        assert!((processing_gain(212).unwrap() - 23.26).abs() < 0.005);
        assert_eq!(processing_gain(1).unwrap(), 0.0);
        assert!((processing_gain(100).unwrap() - 20.0).abs() < 1e-12);
        assert!(processing_gain(0).is_err());
    }

    #[test]
    fn path_loss_values() {
        let l44 = free_space_path_loss(44.0, 60.15e9).unwrap();
        assert!((l44 - 100.9).abs() < 0.05, "{l44}");
        let l1 = free_space_path_loss(1.0, 60.15e9).unwrap();
        assert!((l1 - 68.03).abs() < 0.01, "{l1}");
        let l2 = free_space_path_loss(2.0, 60.15e9).unwrap();
        assert!((l2 - l1 - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!(free_space_path_loss(-1.0, 60e9).is_err());
        assert!(free_space_path_loss(1.0, 0.0).is_err());
    }

    #[test]
    fn doppler_values() {
        let d14 = max_doppler(14.0, 60.15e9).unwrap();
        assert!((d14 - 2808.94).abs() < 0.01);
        assert_eq!(max_doppler(0.0, 60e9).unwrap(), 0.0);
        assert!((max_doppler(7.0, 60.15e9).unwrap() - d14 / 2.0).abs() < 1e-9);
        assert!(max_doppler(-1.0, 60e9).is_err());
    }
}
