//! TOML configuration files.
//!
//! The run config holds the sections `[sounder]`, `[capture]`, `[lsf]`,
//! `[sbl]` and `[export]`; the scenario file holds the scenario keys at top
//! level. Every key is optional and unknown keys are rejected.

use std::fs;
use std::path::Path;

use dds_core::channel::ScenarioConfig;
use dds_core::params::SounderConfig;
use dds_core::sbl::SBLConfig;
use dds_core::tfanalysis::LSFConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Which parts of the record are synthesized and processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureConfig {
    /// Evaluation windows spread evenly over the scenario; each is one burst
    /// of `lsf.window_length` snapshots.
    pub windows: usize,
    /// Snapshots of the standstill record used for CFO calibration.
    pub standstill_snapshots: usize,
    /// Zadoff-Chu root of each transmitter's tone weights.
    pub zc_roots: Vec<i64>,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            windows: 20,
            standstill_snapshots: 16,
            zc_roots: vec![1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    /// SBL peaks weaker than this many dB above the noise variance are not exported.
    pub sbl_threshold_db: f64,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self { sbl_threshold_db: 15.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sounder: SounderConfig,
    pub capture: CaptureConfig,
    pub lsf: LSFConfig,
    pub sbl: SBLConfig,
    pub export: ExportConfig,
}

impl Default for RunConfig {
    /// Street-crossing sounder with 32-snapshot windows, small enough for a desktop run.
    fn default() -> Self {
        Self {
            sounder: SounderConfig::street_crossing(),
            capture: CaptureConfig::default(),
            lsf: LSFConfig {
                window_length: 32,
                ..LSFConfig::default()
            },
            sbl: SBLConfig::default(),
            export: ExportConfig::default(),
        }
    }
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_run_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), read_toml)
}

pub fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig> {
    path.map_or_else(|| Ok(ScenarioConfig::default()), read_toml)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg: RunConfig = toml::from_str("[sounder]\nmax_excess_delay = 200e-9\n[sbl]\npeaks = 4\n").unwrap();
        assert_eq!(cfg.sounder.max_excess_delay, 200e-9);
        assert_eq!(cfg.sounder.tone_count, 21);
        assert_eq!(cfg.sbl.peaks, 4);
        assert_eq!(cfg.lsf.window_length, 32);
    }

    #[test]
    fn unknown_key_is_named_with_its_line() {
        let err = toml::from_str::<RunConfig>("[sounder]\ntone_count = 21\ntone_cuont = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tone_cuont"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn scenario_round_trips() {
        let sc = ScenarioConfig::default();
        let text = toml::to_string(&sc).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, sc);
    }
}
