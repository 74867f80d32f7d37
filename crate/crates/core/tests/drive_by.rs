//! Qualitative checks on the default drive-by: LOS Doppler trajectory,
//! beam-dependent SNR collapse and fading near the parked truck.

use dds_core::channel::{scenario_paths, synthesize, Impairments, ScenarioConfig, ScenarioModel};
use dds_core::params::SounderConfig;
use dds_core::rxproc::{coherent_average, demultiplex, TransferFunctionGrid};
use dds_core::tfanalysis::{dsd, window_at, LSFConfig, LsfEstimator};
use dds_core::waveform::{multitone_waveform, TonePlan};
use nalgebra::{DMatrix, DVector};

const M: usize = 32;

struct Pass {
    /// Per burst, per transmitter.
    grids: Vec<Vec<TransferFunctionGrid>>,
    /// Per burst, estimated LOS Doppler of each snapshot of transmitter 1.
    los_doppler: Vec<Vec<f64>>,
}

fn drive_by(sc: &ScenarioConfig, bursts: usize, until: f64) -> Pass {
    let cfg = SounderConfig::street_crossing();
    let plans = [TonePlan::new(&cfg, 0, 1).unwrap(), TonePlan::new(&cfg, 1, 2).unwrap()];
    let tx: Vec<_> = plans.iter().map(|p| multitone_waveform(&cfg, p).unwrap()).collect();
    let block = cfg.samples_per_snapshot().unwrap();
    let imp = Impairments {
        cfo: sc.cfo,
        noise_power: sc.noise_power(),
    };
    let model = ScenarioModel::new(sc, &cfg);
    let total = (until / cfg.snapshot_period()).floor() as usize;
    let mut pass = Pass {
        grids: Vec::new(),
        los_doppler: Vec::new(),
    };
    for b in 0..bursts {
        let start = (total - M) * b / (bursts - 1);
        let rx = synthesize(&tx, &model, &cfg, start, M * block, imp, 7).unwrap();
        let mut grids = Vec::new();
        for plan in &plans {
            let avg = coherent_average(&rx, &cfg, sc.cfo, plan.tx_index).unwrap();
            if plan.tx_index == 1 {
                pass.los_doppler.push(avg.offsets.iter().map(|f| f - sc.cfo).collect());
            }
            grids.push(demultiplex(&avg, &cfg, plan).unwrap());
        }
        pass.grids.push(grids);
    }
    pass
}

fn snr_series(pass: &Pass, tx: usize) -> (Vec<f64>, Vec<f64>) {
    let mut t = Vec::new();
    let mut y = Vec::new();
    for g in &pass.grids {
        t.extend(&g[tx].snapshot_times);
        y.extend(&g[tx].snr_db);
    }
    (t, y)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Residual variance after a least-squares quadratic fit.
fn detrended_variance(t: &[f64], y: &[f64]) -> f64 {
    let a = DMatrix::from_fn(t.len(), 3, |i, j| t[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let x = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
    (b - a * x).norm_squared() / t.len() as f64
}

/// Time of the first burst whose mean SNR is 10 dB below the first burst.
fn collapse_time(pass: &Pass, tx: usize) -> Option<f64> {
    let first = mean(&pass.grids[0][tx].snr_db);
    pass.grids
        .iter()
        .find(|g| mean(&g[tx].snr_db) < first - 10.0)
        .map(|g| g[tx].snapshot_times[0])
}

#[test]
fn default_pass() {
    let cfg = SounderConfig::street_crossing();
    let sc = ScenarioConfig::default();
    let pass = drive_by(&sc, 24, sc.duration);

    // LOS Doppler at the trigger, and its trajectory from the receiver side.
    let first = mean(&pass.los_doppler[0]);
    let burst_means: Vec<f64> = pass.los_doppler.iter().map(|d| mean(d)).collect();
    assert!(first > 2500.0, "{first}");
    // Snapshot estimates jitter by a few Hz while the true slope near the
    // trigger is tiny, so allow a small rise between bursts.
    assert!(burst_means.windows(2).all(|w| w[1] < w[0] + 20.0), "{burst_means:?}");
    assert!(*burst_means.last().unwrap() < 0.0);
    let truth: Vec<f64> = (0..=36)
        .map(|i| {
            scenario_paths(&sc, &cfg, i as f64 * 0.1, 0)
                .unwrap()
                .los()
                .unwrap()
                .doppler
        })
        .collect();
    assert!(truth.windows(2).all(|w| w[1] < w[0]));

    // The same trajectory from the Doppler marginal of each burst.
    let est = LsfEstimator::new(&LSFConfig {
        window_length: M,
        ..LSFConfig::default()
    })
    .unwrap();
    let peaks: Vec<f64> = pass
        .grids
        .iter()
        .map(|g| {
            let lsf = est.estimate(&window_at(&g[1], 0, M, &cfg).unwrap()).unwrap();
            let d = dsd(&lsf);
            let i = (0..d.len()).max_by(|a, b| d[*a].total_cmp(&d[*b])).unwrap();
            lsf.doppler_axis[i]
        })
        .collect();
    let step = 1.0 / (M as f64 * cfg.snapshot_period());
    assert!(peaks.windows(2).all(|w| w[1] <= w[0] + step), "{peaks:?}");
    assert!(*peaks.last().unwrap() < 0.0);

    let c0 = collapse_time(&pass, 0);
    let c1 = collapse_time(&pass, 1);
    let c0 = c0.expect("0 degree beam collapses");
    assert!(c1.is_none_or(|c1| c0 < c1), "{c0} vs {c1:?}");
}

#[test]
fn truck_fading_hits_the_flat_beam() {
    let sc = ScenarioConfig::default();
    let pass = drive_by(&sc, 12, 2.0);
    let (t0, y0) = snr_series(&pass, 0);
    let (t1, y1) = snr_series(&pass, 1);
    let (v0, v1) = (detrended_variance(&t0, &y0), detrended_variance(&t1, &y1));
    assert!(v0 > v1, "{v0} vs {v1}");
}
