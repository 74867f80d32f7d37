//! The `dds` binary: exit codes, diagnostics and on-disk products.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dds_cli::config::{load_run_config, load_scenario, RunConfig};
use dds_cli::formats::{self, PeakFile};
use dds_cli::manifest::{hash_file, RunManifest, MANIFEST_FILE};
use dds_cli::pipeline::layout;
use dds_core::channel::ScenarioConfig;
use dds_core::grid::Grid;
use dds_core::rxproc::TransferFunctionGrid;
use num_complex::Complex64;
use tempfile::TempDir;

fn dds(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dds"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env("DDS_THREADS", "2")
        .output()
        .expect("dds runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_configs_match_the_defaults() {
    assert_eq!(
        load_run_config(Some(&shipped("sounder.toml"))).unwrap(),
        RunConfig::default()
    );
    assert_eq!(
        load_scenario(Some(&shipped("drive_by.toml"))).unwrap(),
        ScenarioConfig::default()
    );
}

#[test]
fn plan_passes_street_crossing() {
    let dir = TempDir::new().unwrap();
    let cfg = shipped("sounder.toml");
    let o = dds(dir.path(), &["plan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join(layout::PLAN)).unwrap();
    assert!(report.starts_with("# dds plan report, seed 7\n"));
    assert!(report.contains("OVERALL PASS"));
}

#[test]
fn plan_fails_on_long_delay() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "long.toml", "[sounder]\nmax_excess_delay = 200e-9\n");
    let o = dds(&dir.path().join("out"), &["plan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("out").join(layout::PLAN)).unwrap();
    assert!(report.contains("FAIL"));
}

#[test]
fn malformed_key_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "[sounder]\ntone_count = 21\nmax_excess_dealy = 1e-7\n",
    );
    let o = dds(dir.path(), &["plan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("max_excess_dealy") && msg.contains("line 3"), "{msg}");
}

#[test]
fn zero_duration_is_rejected() {
    let dir = TempDir::new().unwrap();
    let sc = ScenarioConfig {
        duration: 0.0,
        ..ScenarioConfig::default()
    };
    let path = write_config(dir.path(), "empty.toml", &toml::to_string(&sc).unwrap());
    let o = dds(dir.path(), &["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty record"), "{}", stderr(&o));
}

#[test]
fn missing_input_names_the_file() {
    let dir = TempDir::new().unwrap();
    let o = dds(dir.path(), &["process"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("standstill.dds") && msg.contains("simulate"), "{msg}");
}

#[test]
fn corrupt_input_names_the_file() {
    let dir = TempDir::new().unwrap();
    let o = dds(dir.path(), &["simulate", "--windows", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let burst = dir.path().join(layout::burst(1));
    let bytes = fs::read(&burst).unwrap();
    fs::write(&burst, &bytes[..bytes.len() / 2]).unwrap();
    let o = dds(dir.path(), &["process", "--windows", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("burst_001.dds"), "{}", stderr(&o));
}

fn noise_grid(tx_index: usize, seed: u64) -> TransferFunctionGrid {
    // Deterministic pseudo-noise without pulling in an RNG.
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let (q, k) = (32, 21);
    TransferFunctionGrid {
        tx_index,
        values: Grid::from_fn(q, k, |_, _| Complex64::new(next(), next())),
        snapshot_times: (0..q).map(|i| (i as f64 + 0.5) * 178.08e-6).collect(),
        tone_frequencies: (0..k).map(|i| 60.15e9 + (i as f64 - 10.0) * 4.76e6).collect(),
        noise_power: vec![1.0 / 6.0; q],
        snr_db: vec![0.0; q],
    }
}

#[test]
fn pure_noise_window_exports_no_sbl_peaks() {
    let dir = TempDir::new().unwrap();
    for tx in 0..2 {
        let bytes = formats::encode_ddg1(&noise_grid(tx, 11 + tx as u64), 7);
        formats::write_atomic(&dir.path().join(layout::transfer_function(tx, 0)), &bytes).unwrap();
    }
    let o = dds(dir.path(), &["analyze", "--windows", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for tx in 0..2 {
        let path = dir.path().join(layout::sbl_peaks(tx, 0));
        let peaks = PeakFile::decode(&fs::read(&path).unwrap(), &path).unwrap();
        assert_eq!(peaks.seed, 7);
        assert!(peaks.peaks.is_empty(), "{:?}", peaks.peaks);
        let lsf = dir.path().join(layout::lsf_peaks(tx, 0));
        assert!(!PeakFile::decode(&fs::read(&lsf).unwrap(), &lsf)
            .unwrap()
            .peaks
            .is_empty());
    }
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn manifest_lists_outputs_and_tracks_staleness() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    let o = dds(out, &["run-all", "--windows", "2", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let m = manifest(out);
    assert_eq!(m.seed, 3);
    assert!(m.version.starts_with('v'));
    assert_eq!(m.stages.len(), 4);
    let mut listed = Vec::new();
    for rec in m.stages.values() {
        assert!(!rec.stale);
        for f in &rec.outputs {
            assert_eq!(
                hash_file(&out.join(&f.path)).as_deref(),
                Some(f.sha256.as_str()),
                "{}",
                f.path
            );
            listed.push(f.path.clone());
        }
    }
    let mut on_disk = Vec::new();
    for sub in ["", "simulate", "process", "analyze"] {
        for e in fs::read_dir(out.join(sub)).unwrap() {
            let e = e.unwrap();
            if e.file_type().unwrap().is_file() && e.file_name() != MANIFEST_FILE {
                let rel = Path::new(sub).join(e.file_name());
                on_disk.push(rel.to_str().unwrap().to_owned());
            }
        }
    }
    listed.sort();
    on_disk.sort();
    assert_eq!(listed, on_disk);

    // Swapping one burst makes `process` stale; rerunning it moves the
    // staleness downstream.
    fs::copy(out.join(layout::burst(1)), out.join(layout::burst(0))).unwrap();
    assert_eq!(dds(out, &["plan", "--seed", "3"]).status.code(), Some(0));
    let m = manifest(out);
    assert!(m.stages["process"].stale);
    assert!(!m.stages["analyze"].stale);
    assert_eq!(
        dds(out, &["process", "--windows", "2", "--seed", "3"]).status.code(),
        Some(0)
    );
    let m = manifest(out);
    assert!(!m.stages["process"].stale);
    assert!(m.stages["analyze"].stale);
    assert_eq!(
        dds(out, &["analyze", "--windows", "2", "--seed", "3"]).status.code(),
        Some(0)
    );
    assert!(manifest(out).stages.values().all(|r| !r.stale));
}

#[test]
fn outputs_carry_the_seed() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    let o = dds(out, &["run-all", "--windows", "2", "--seed", "42", "--peaks", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for rel in [
        layout::TRUTH.to_owned(),
        layout::snr(0),
        layout::dsd(1, 1),
        layout::waterfall(0),
    ] {
        let text = fs::read_to_string(out.join(&rel)).unwrap();
        assert!(text.starts_with("# seed 42\n"), "{rel}");
    }
    let cfo: serde_json::Value = serde_json::from_slice(&fs::read(out.join(layout::CFO)).unwrap()).unwrap();
    assert_eq!(cfo["seed"], 42);
    let path = out.join(layout::transfer_function(0, 1));
    let (h, seed) = formats::decode_ddg1(&fs::read(&path).unwrap(), &path).unwrap();
    assert_eq!((seed, h.snapshot_count(), h.tone_count()), (42, 32, 21));
    let path = out.join(layout::gamma(1, 0));
    let (g, seed) = formats::decode_ddg2(&fs::read(&path).unwrap(), &path).unwrap();
    assert_eq!((seed, g.values.shape()), (42, (84, 32)));
    let path = out.join(layout::lsf_peaks(0, 0));
    let peaks = PeakFile::decode(&fs::read(&path).unwrap(), &path).unwrap();
    assert_eq!(peaks.peaks.len(), 3);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["", "simulate", "process", "analyze"] {
        let mut entries: Vec<_> = fs::read_dir(dir.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_file() && p.file_name().unwrap() != MANIFEST_FILE {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(dds(a.path(), &["run-all", "--windows", "2"]).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_dds"))
        .args(["run-all", "--windows", "2", "--out-dir"])
        .arg(b.path())
        .env("DDS_THREADS", "5")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(files(a.path()), files(b.path()));
}
