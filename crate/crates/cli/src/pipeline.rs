//! The four pipeline stages and their on-disk layout.

use std::path::PathBuf;
use std::time::Instant;

use dds_core::channel::{scenario_paths, synthesize, Impairments, ScenarioConfig, ScenarioModel};
use dds_core::params::{validate_config, SounderConfig, ValidationReport};
use dds_core::rxproc::{align_los_delay, coherent_average, demultiplex, estimate_cfo, TransferFunctionGrid};
use dds_core::sbl::sbl_fit_window;
use dds_core::tfanalysis::{dsd, normalized, top_peaks_2d, window_at, LsfEstimator, PeakList};
use dds_core::waveform::{multitone_waveform, SampledSignal, TonePlan};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{load_run_config, load_scenario, RunConfig};
use crate::error::{CliError, Result};
use crate::formats::{self, csv, num, PeakFile};
use crate::manifest::{hash_file, sha256_hex, FileEntry, RunManifest, StageRecord};

/// Mixed into the seed of the standstill calibration record so its noise is
/// independent of the drive-by bursts.
const STANDSTILL_SEED_SALT: u64 = 0x5354_414e_4453_5449;

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub windows: Option<usize>,
    pub sbl_iters: Option<usize>,
    pub peaks: Option<usize>,
}

impl Options {
    pub fn new(out_dir: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            config: None,
            scenario: None,
            seed,
            out_dir: out_dir.into(),
            windows: None,
            sbl_iters: None,
            peaks: None,
        }
    }
}

/// Relative output paths.
pub mod layout {
    pub const PLAN: &str = "plan.txt";
    pub const STANDSTILL: &str = "simulate/standstill.dds";
    pub const TRUTH: &str = "simulate/truth.csv";
    pub const CFO: &str = "process/cfo.json";

    pub fn burst(w: usize) -> String {
        format!("simulate/burst_{w:03}.dds")
    }

    pub fn transfer_function(tx: usize, w: usize) -> String {
        format!("process/h_tx{tx}_w{w:03}.ddg")
    }

    pub fn snr(tx: usize) -> String {
        format!("process/snr_tx{tx}.csv")
    }

    pub fn lsf(tx: usize, w: usize) -> String {
        format!("analyze/lsf_tx{tx}_w{w:03}.ddg")
    }

    pub fn dsd(tx: usize, w: usize) -> String {
        format!("analyze/dsd_tx{tx}_w{w:03}.csv")
    }

    pub fn lsf_peaks(tx: usize, w: usize) -> String {
        format!("analyze/lsf_peaks_tx{tx}_w{w:03}.json")
    }

    pub fn gamma(tx: usize, w: usize) -> String {
        format!("analyze/gamma_tx{tx}_w{w:03}.ddg")
    }

    pub fn sbl_peaks(tx: usize, w: usize) -> String {
        format!("analyze/sbl_peaks_tx{tx}_w{w:03}.json")
    }

    pub fn waterfall(tx: usize) -> String {
        format!("analyze/dsd_waterfall_tx{tx}.csv")
    }
}

/// Configs after command-line overrides.
pub fn load_configs(opts: &Options) -> Result<(RunConfig, ScenarioConfig)> {
    let mut run = load_run_config(opts.config.as_deref())?;
    if let Some(w) = opts.windows {
        run.capture.windows = w;
    }
    if let Some(i) = opts.sbl_iters {
        run.sbl.iterations = i;
    }
    if let Some(p) = opts.peaks {
        run.sbl.peaks = p;
    }
    let scenario = load_scenario(opts.scenario.as_deref())?;
    Ok((run, scenario))
}

/// Tracks the files a stage reads and writes.
struct Stage<'a> {
    name: &'static str,
    opts: &'a Options,
    started: Instant,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

impl<'a> Stage<'a> {
    fn begin(name: &'static str, opts: &'a Options) -> Self {
        Self {
            name,
            opts,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.opts.out_dir.join(rel)
    }

    fn read(&mut self, rel: &str, producer: &'static str) -> Result<Vec<u8>> {
        let bytes = formats::read_file(&self.path(rel), producer)?;
        self.inputs.push(FileEntry {
            path: rel.into(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        formats::write_atomic(&self.path(rel), bytes)?;
        self.outputs.push(FileEntry {
            path: rel.into(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let out_dir = &self.opts.out_dir;
        let mut manifest = RunManifest::load_or_new(out_dir, self.opts.seed)?;
        manifest.configs = [&self.opts.config, &self.opts.scenario]
            .into_iter()
            .flatten()
            .map(|p| FileEntry {
                path: p.display().to_string(),
                sha256: hash_file(p).unwrap_or_default(),
            })
            .collect();
        manifest.record(
            self.name,
            StageRecord {
                inputs: self.inputs,
                outputs: self.outputs,
                wall_clock_s: self.started.elapsed().as_secs_f64(),
                stale: false,
            },
        );
        manifest.refresh_staleness(out_dir);
        manifest.save(out_dir)
    }
}

fn require_valid(cfg: &SounderConfig) -> Result<ValidationReport> {
    let report = validate_config(cfg)?;
    if !report.passed() {
        return Err(CliError::Validation(report.to_string()));
    }
    Ok(report)
}

pub fn cmd_plan(opts: &Options) -> Result<ValidationReport> {
    let (run, _) = load_configs(opts)?;
    let report = validate_config(&run.sounder)?;
    let mut stage = Stage::begin("plan", opts);
    let text = format!("# dds plan report, seed {}\n{report}", opts.seed);
    stage.write(layout::PLAN, text.as_bytes())?;
    stage.finish()?;
    if !report.passed() {
        return Err(CliError::Validation(report.to_string()));
    }
    Ok(report)
}

fn tone_plans(run: &RunConfig) -> Result<Vec<TonePlan>> {
    let cfg = &run.sounder;
    if run.capture.zc_roots.len() != cfg.tx_count {
        return Err(dds_core::Error::InvalidConfig {
            field: "capture.zc_roots".into(),
            reason: format!("{} roots for {} transmitters", run.capture.zc_roots.len(), cfg.tx_count),
        }
        .into());
    }
    run.capture
        .zc_roots
        .iter()
        .enumerate()
        .map(|(tx, &root)| Ok(TonePlan::new(cfg, tx, root)?))
        .collect()
}

fn tx_signals(run: &RunConfig, plans: &[TonePlan]) -> Result<Vec<SampledSignal>> {
    plans.iter().map(|p| Ok(multitone_waveform(&run.sounder, p)?)).collect()
}

/// First snapshot block of each evaluation window, spread evenly over the scenario.
pub fn window_starts(run: &RunConfig, sc: &ScenarioConfig) -> Result<Vec<usize>> {
    let m = run.lsf.window_length;
    let windows = run.capture.windows;
    let total = (sc.duration / run.sounder.snapshot_period() * (1.0 + 1e-12)).floor() as usize;
    if windows == 0 || m == 0 || total < m {
        return Err(dds_core::Error::InvalidConfig {
            field: "capture.windows".into(),
            reason: format!("{windows} windows of {m} snapshots do not fit {total} snapshots"),
        }
        .into());
    }
    if windows == 1 {
        return Ok(vec![0]);
    }
    Ok((0..windows).map(|w| (total - m) * w / (windows - 1)).collect())
}

pub fn cmd_simulate(opts: &Options) -> Result<()> {
    let (run, sc) = load_configs(opts)?;
    let cfg = &run.sounder;
    require_valid(cfg)?;
    sc.validate(cfg)?;
    let plans = tone_plans(&run)?;
    let tx = tx_signals(&run, &plans)?;
    let starts = window_starts(&run, &sc)?;
    let block = cfg.samples_per_snapshot()?;
    let m = run.lsf.window_length;
    let imp = Impairments {
        cfo: sc.cfo,
        noise_power: sc.noise_power(),
    };
    let mut stage = Stage::begin("simulate", opts);

    let still = sc.at_standstill();
    let rx = synthesize(
        &tx,
        &ScenarioModel::new(&still, cfg),
        cfg,
        0,
        run.capture.standstill_snapshots * block,
        imp,
        opts.seed ^ STANDSTILL_SEED_SALT,
    )?;
    stage.write(layout::STANDSTILL, &formats::encode_dds1(&rx))?;

    let model = ScenarioModel::new(&sc, cfg);
    let mut truth = Vec::new();
    for (w, &start) in starts.iter().enumerate() {
        let rx = synthesize(&tx, &model, cfg, start, m * block, imp, opts.seed)?;
        stage.write(&layout::burst(w), &formats::encode_dds1(&rx))?;
        for q in 0..m {
            let t = (start + q) as f64 * cfg.snapshot_period() + cfg.snapshot_period() / 2.0;
            for tx_index in 0..cfg.tx_count {
                for p in scenario_paths(&sc, cfg, t.min(sc.duration), tx_index)?.paths {
                    truth.push(vec![
                        w.to_string(),
                        num(t),
                        tx_index.to_string(),
                        p.kind.as_str().into(),
                        num(p.delay),
                        num(p.doppler),
                        num(p.gain.re),
                        num(p.gain.im),
                    ]);
                }
            }
        }
    }
    let columns = [
        "window",
        "time_s",
        "tx",
        "kind",
        "delay_s",
        "doppler_hz",
        "gain_re",
        "gain_im",
    ];
    stage.write(layout::TRUTH, &csv(opts.seed, &columns, truth))?;
    stage.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfoFile {
    pub seed: u64,
    pub cfo_hz: f64,
}

pub fn cmd_process(opts: &Options) -> Result<()> {
    let (run, sc) = load_configs(opts)?;
    let cfg = &run.sounder;
    require_valid(cfg)?;
    let plans = tone_plans(&run)?;
    let tx = tx_signals(&run, &plans)?;
    let mut stage = Stage::begin("process", opts);

    let still_bytes = stage.read(layout::STANDSTILL, "simulate")?;
    let still = formats::decode_dds1(&still_bytes, &stage.path(layout::STANDSTILL))?;
    let reference: Vec<_> = (0..tx[0].len())
        .map(|n| tx.iter().map(|s| s.samples[n]).sum())
        .collect();
    let reference = SampledSignal::new(reference, cfg.sample_rate, 0.0)?;
    let cfo = estimate_cfo(&still, &reference)?;
    let cfo_json = serde_json::to_string_pretty(&CfoFile {
        seed: opts.seed,
        cfo_hz: cfo,
    })
    .expect("serializes")
        + "\n";
    stage.write(layout::CFO, cfo_json.as_bytes())?;

    let mut snr_rows = vec![Vec::new(); cfg.tx_count];
    for w in 0..run.capture.windows {
        let rel = layout::burst(w);
        let bytes = stage.read(&rel, "simulate")?;
        let rx = formats::decode_dds1(&bytes, &stage.path(&rel))?;
        let grids: Vec<TransferFunctionGrid> = plans
            .par_iter()
            .map(|plan| {
                let avg = coherent_average(&rx, cfg, cfo, plan.tx_index)?;
                Ok(align_los_delay(&demultiplex(&avg, cfg, plan)?, &sc))
            })
            .collect::<Result<_>>()?;
        for h in &grids {
            stage.write(
                &layout::transfer_function(h.tx_index, w),
                &formats::encode_ddg1(h, opts.seed),
            )?;
            for (t, s) in h.snapshot_times.iter().zip(&h.snr_db) {
                snr_rows[h.tx_index].push(vec![num(*t), num(*s)]);
            }
        }
    }
    for (tx_index, rows) in snr_rows.into_iter().enumerate() {
        stage.write(&layout::snr(tx_index), &csv(opts.seed, &["time_s", "snr_db"], rows))?;
    }
    stage.finish()
}

struct WindowProducts {
    tx_index: usize,
    window: usize,
    lsf: dds_core::tfanalysis::DelayDopplerGrid<f64>,
    dsd: Vec<f64>,
    lsf_peaks: PeakList,
    gamma: dds_core::tfanalysis::DelayDopplerGrid<f64>,
    sbl_peaks: PeakList,
}

pub fn cmd_analyze(opts: &Options) -> Result<()> {
    let (run, _) = load_configs(opts)?;
    let cfg = &run.sounder;
    let m = run.lsf.window_length;
    let mut stage = Stage::begin("analyze", opts);
    let mut grids = Vec::new();
    for w in 0..run.capture.windows {
        for tx_index in 0..cfg.tx_count {
            let rel = layout::transfer_function(tx_index, w);
            let bytes = stage.read(&rel, "process")?;
            let (h, _) = formats::decode_ddg1(&bytes, &stage.path(&rel))?;
            grids.push((w, h));
        }
    }
    let estimator = LsfEstimator::new(&run.lsf)?;
    let threshold = 10f64.powf(run.export.sbl_threshold_db / 10.0);
    let products: Vec<WindowProducts> = grids
        .par_iter()
        .map(|(w, h)| {
            let win = window_at(h, 0, m, cfg)?;
            let lsf = normalized(&estimator.estimate(&win)?);
            let fit = sbl_fit_window(&win, &run.sbl)?;
            let mut sbl_peaks = fit.active_peaks.clone();
            sbl_peaks.entries.retain(|p| p.power > threshold * fit.noise_var);
            Ok(WindowProducts {
                tx_index: h.tx_index,
                window: *w,
                dsd: dsd(&lsf),
                lsf_peaks: top_peaks_2d(&lsf, run.sbl.peaks),
                lsf,
                gamma: fit.gamma,
                sbl_peaks,
            })
        })
        .collect::<Result<_>>()?;

    let mut waterfall = vec![Vec::new(); cfg.tx_count];
    for p in &products {
        let (tx_index, w) = (p.tx_index, p.window);
        let start = p.lsf.window_start_time;
        stage.write(&layout::lsf(tx_index, w), &formats::encode_ddg2(&p.lsf, opts.seed))?;
        let rows: Vec<Vec<String>> = p
            .lsf
            .doppler_axis
            .iter()
            .zip(&p.dsd)
            .map(|(f, v)| vec![num(*f), num(*v)])
            .collect();
        for r in &rows {
            waterfall[tx_index].push(vec![num(start), r[0].clone(), r[1].clone()]);
        }
        stage.write(
            &layout::dsd(tx_index, w),
            &csv(opts.seed, &["doppler_hz", "power"], rows),
        )?;
        let lsf_file = PeakFile::new(opts.seed, "lsf", tx_index, start, &p.lsf_peaks);
        stage.write(&layout::lsf_peaks(tx_index, w), &lsf_file.encode())?;
        stage.write(&layout::gamma(tx_index, w), &formats::encode_ddg2(&p.gamma, opts.seed))?;
        let sbl_file = PeakFile::new(opts.seed, "sbl", tx_index, start, &p.sbl_peaks);
        stage.write(&layout::sbl_peaks(tx_index, w), &sbl_file.encode())?;
    }
    for (tx_index, rows) in waterfall.into_iter().enumerate() {
        stage.write(
            &layout::waterfall(tx_index),
            &csv(opts.seed, &["window_start_s", "doppler_hz", "power"], rows),
        )?;
    }
    stage.finish()
}

pub fn cmd_run_all(opts: &Options) -> Result<()> {
    cmd_plan(opts)?;
    cmd_simulate(opts)?;
    cmd_process(opts)?;
    cmd_analyze(opts)
}
