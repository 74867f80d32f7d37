//! Sparse Bayesian learning over a delay-super-resolved dictionary.
//!
//! The dictionary is `A = F_M^H (x) F~_K` where `F~_K` is the first `K` rows
//! of a `U*K`-point DFT scaled by `1/sqrt(K)`, so every atom has unit norm.
//! Atom `q = n + U*K*m` is delay bin `n` (in units of `1 / (U*K*tone_spacing)`)
//! and raw Doppler bin `m`.
//!
//! A unitary DFT along time maps the data covariance `s2*I + A diag(gamma) A^H`
//! onto `M` independent `K x K` blocks, one per Doppler bin, so the exact
//! update only ever factors small matrices.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::Grid;
use crate::tfanalysis::{top_peaks_2d, DelayDopplerGrid, PeakList, TimeFrequencyWindow};

/// Smallest noise variance used inside the iteration, relative to the mean data power.
const NOISE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    pub k: usize,
    pub m: usize,
    pub u: usize,
    /// Hz; sets the physical delay axis.
    pub tone_spacing: f64,
    /// Seconds; sets the physical Doppler axis.
    pub snapshot_period: f64,
}

impl SparseModel {
    /// Model with axes in bin units.
    pub fn new(k: usize, m: usize, u: usize) -> Result<Self> {
        if k == 0 || m == 0 || u == 0 {
            return Err(Error::config(
                "model",
                format!("K = {k}, M = {m}, U = {u} must all be at least 1"),
            ));
        }
        Ok(Self {
            k,
            m,
            u,
            tone_spacing: 1.0 / k as f64,
            snapshot_period: 1.0 / m as f64,
        })
    }

    pub fn for_window(w: &TimeFrequencyWindow, u: usize) -> Result<Self> {
        Ok(Self {
            tone_spacing: w.tone_spacing,
            snapshot_period: w.snapshot_period,
            ..Self::new(w.tone_count(), w.snapshot_count(), u)?
        })
    }

    pub fn delay_bins(&self) -> usize {
        self.u * self.k
    }

    pub fn atom_count(&self) -> usize {
        self.delay_bins() * self.m
    }

    pub fn observation_len(&self) -> usize {
        self.k * self.m
    }

    /// `F~_K` applied to one delay profile of length `U*K`.
    fn partial_dft(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = x.to_vec();
        fft::forward(&mut buf);
        let scale = 1.0 / (self.k as f64).sqrt();
        buf.truncate(self.k);
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }

    /// `F~_K^H` applied to one tone vector of length `K`.
    fn partial_dft_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.delay_bins()];
        buf[..self.k].copy_from_slice(y);
        fft::inverse(&mut buf);
        let scale = 1.0 / (self.k as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }

    fn check_len(v: &[Complex64], n: usize) -> Result<()> {
        if v.len() != n {
            return Err(Error::Shape {
                expected: format!("{n} entries"),
                found: v.len().to_string(),
            });
        }
        Ok(())
    }

    /// `h = A s`.
    pub fn forward(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        Self::check_len(s, self.atom_count())?;
        let nd = self.delay_bins();
        let mut y = Grid::zeros(self.k, self.m);
        for m in 0..self.m {
            let col = self.partial_dft(&s[m * nd..(m + 1) * nd]);
            for k in 0..self.k {
                y[(k, m)] = col[k];
            }
        }
        for k in 0..self.k {
            fft::inverse_unitary(y.row_mut(k));
        }
        Ok(y.vectorize())
    }

    /// `A^H h`.
    pub fn adjoint(&self, h: &[Complex64]) -> Result<Vec<Complex64>> {
        Self::check_len(h, self.observation_len())?;
        let mut y = Grid::from_vectorized(self.k, self.m, h);
        for k in 0..self.k {
            fft::forward_unitary(y.row_mut(k));
        }
        let mut out = Vec::with_capacity(self.atom_count());
        for m in 0..self.m {
            out.extend(self.partial_dft_adjoint(&y.column(m)));
        }
        Ok(out)
    }

    /// Explicit atom `q`.
    pub fn column(&self, q: usize) -> Vec<Complex64> {
        let nd = self.delay_bins();
        let (n, m) = (q % nd, q / nd);
        let norm = 1.0 / ((self.k * self.m) as f64).sqrt();
        let mut out = Vec::with_capacity(self.observation_len());
        for l in 0..self.m {
            for k in 0..self.k {
                let phase = -2.0 * PI * (k * n) as f64 / nd as f64 + 2.0 * PI * (m * l) as f64 / self.m as f64;
                out.push(Complex64::from_polar(norm, phase));
            }
        }
        out
    }

    /// Columns of `F~_K` as a dense `K x U*K` matrix.
    fn delay_dictionary(&self) -> DMatrix<Complex64> {
        let nd = self.delay_bins();
        let scale = 1.0 / (self.k as f64).sqrt();
        DMatrix::from_fn(self.k, nd, |k, n| {
            Complex64::from_polar(scale, -2.0 * PI * (k * n) as f64 / nd as f64)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SBLConfig {
    /// Active-set size for the noise update.
    pub peaks: usize,
    pub iterations: usize,
    pub gamma_init: f64,
    pub noise_var_init: f64,
    /// Delay super-resolution factor.
    pub upsampling: usize,
}

impl Default for SBLConfig {
    fn default() -> Self {
        Self {
            peaks: 10,
            iterations: 10,
            gamma_init: 1.0,
            noise_var_init: 0.1,
            upsampling: 4,
        }
    }
}

impl SBLConfig {
    pub fn validate(&self) -> Result<()> {
        if self.peaks == 0 {
            return Err(Error::config("peaks", "must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        if self.upsampling == 0 {
            return Err(Error::config("upsampling", "must be at least 1"));
        }
        if !(self.gamma_init > 0.0 && self.noise_var_init > 0.0) {
            return Err(Error::config("gamma_init", "initial variances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SBLResult {
    /// Atom variances, `U*K` delay bins by centred Doppler bins.
    pub gamma: DelayDopplerGrid<f64>,
    pub noise_var: f64,
    pub active_peaks: PeakList,
    /// Raw atom indices of the final active set, strongest first.
    pub active_atoms: Vec<usize>,
    /// Least-squares amplitudes of the active atoms.
    pub active_amplitudes: Vec<Complex64>,
    /// Relative L1 change of `gamma` in the last iteration.
    pub converged_delta: f64,
    /// `||h - P_A h||` after each iteration.
    pub residual_norms: Vec<f64>,
}

impl SBLResult {
    /// `A_A x_A`, the data explained by the active set.
    pub fn reconstruct(&self, model: &SparseModel) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); model.observation_len()];
        for (&q, &x) in self.active_atoms.iter().zip(&self.active_amplitudes) {
            for (o, a) in out.iter_mut().zip(model.column(q)) {
                *o += a * x;
            }
        }
        out
    }
}

/// Same contract as [`top_peaks_2d`], on a variance grid.
pub fn peak_select_2d(gamma: &DelayDopplerGrid<f64>, p: usize) -> PeakList {
    top_peaks_2d(gamma, p)
}

fn raw_atom(model: &SparseModel, delay_bin: usize, centred_col: usize) -> usize {
    delay_bin + model.delay_bins() * fft::raw_index(centred_col, model.m)
}

fn gamma_grid(model: &SparseModel, gamma: &[f64], start_time: f64) -> DelayDopplerGrid<f64> {
    let raw = Grid::from_vectorized(model.delay_bins(), model.m, gamma);
    DelayDopplerGrid::from_raw(
        &raw,
        1.0 / (model.delay_bins() as f64 * model.tone_spacing),
        1.0 / (model.m as f64 * model.snapshot_period),
        start_time,
    )
}

/// Least-squares fit of `h` on the given atoms; returns amplitudes and residual energy.
fn project(model: &SparseModel, h: &[Complex64], atoms: &[usize]) -> Result<(Vec<Complex64>, f64)> {
    let energy: f64 = h.iter().map(|x| x.norm_sqr()).sum();
    if atoms.is_empty() {
        return Ok((Vec::new(), energy));
    }
    let n = model.observation_len();
    let a = DMatrix::from_fn(n, atoms.len(), |_, _| Complex64::new(0.0, 0.0));
    let mut a = a;
    for (j, &q) in atoms.iter().enumerate() {
        for (i, v) in model.column(q).into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    let b = DVector::from_column_slice(h);
    let qr = a.clone().qr();
    let rhs = qr.q().adjoint() * &b;
    let x = qr
        .r()
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Degenerate("active atoms are linearly dependent".into()))?;
    let residual = b - a * &x;
    Ok((x.iter().copied().collect(), residual.norm_squared()))
}

/// One SBL1 update of every atom variance, using the Doppler-domain block structure.
fn update_gamma(g: &DMatrix<Complex64>, h_doppler: &Grid<Complex64>, gamma: &mut [f64], noise_var: f64) -> Result<()> {
    let (k, nd) = g.shape();
    let m_count = h_doppler.cols();
    for m in 0..m_count {
        let block_gamma = &mut gamma[m * nd..(m + 1) * nd];
        let mut b = DMatrix::<Complex64>::identity(k, k) * Complex64::new(noise_var, 0.0);
        for (n, &gm) in block_gamma.iter().enumerate() {
            if gm > 0.0 {
                let col = g.column(n);
                b += (col * col.adjoint()) * Complex64::new(gm, 0.0);
            }
        }
        let chol = b
            .cholesky()
            .ok_or_else(|| Error::Degenerate("data covariance is not positive definite".into()))?;
        let y = DVector::from_iterator(k, (0..k).map(|r| h_doppler[(r, m)]));
        let w = chol.solve(&y);
        let bg = chol.solve(g);
        for (n, gm) in block_gamma.iter_mut().enumerate() {
            let col = g.column(n);
            let num = col.dotc(&w).norm_sqr();
            let den = col.dotc(&bg.column(n)).re;
            *gm = if den > 0.0 && num.is_finite() {
                *gm * num / den
            } else {
                0.0
            };
            debug_assert!(*gm >= 0.0);
        }
    }
    Ok(())
}

/// Fits atom variances to the vectorized window `h` (`h[k + K*l]`).
pub fn sbl_fit(h: &[Complex64], model: &SparseModel, cfg: &SBLConfig) -> Result<SBLResult> {
    sbl_fit_at(h, model, cfg, 0.0)
}

pub fn sbl_fit_window(w: &TimeFrequencyWindow, cfg: &SBLConfig) -> Result<SBLResult> {
    let model = SparseModel::for_window(w, cfg.upsampling)?;
    sbl_fit_at(&w.values.vectorize(), &model, cfg, w.start_time)
}

fn sbl_fit_at(h: &[Complex64], model: &SparseModel, cfg: &SBLConfig, start_time: f64) -> Result<SBLResult> {
    cfg.validate()?;
    SparseModel::check_len(h, model.observation_len())?;
    if h.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
        return Err(Error::Input("observation contains non-finite values".into()));
    }
    let n_obs = model.observation_len();
    if n_obs <= cfg.peaks.min(model.atom_count()) {
        return Err(Error::Degenerate(format!(
            "{n_obs} observations cannot support {} active atoms",
            cfg.peaks
        )));
    }
    let power = h.iter().map(|x| x.norm_sqr()).sum::<f64>() / n_obs as f64;
    if power == 0.0 {
        return Ok(SBLResult {
            gamma: gamma_grid(model, &vec![0.0; model.atom_count()], start_time),
            noise_var: 0.0,
            active_peaks: PeakList::default(),
            active_atoms: Vec::new(),
            active_amplitudes: Vec::new(),
            converged_delta: 0.0,
            residual_norms: vec![0.0; cfg.iterations],
        });
    }
    // Work on unit-power data so the initial values are scale free.
    let scale = power.sqrt();
    let hn: Vec<Complex64> = h.iter().map(|x| x / scale).collect();
    let mut h_doppler = Grid::from_vectorized(model.k, model.m, &hn);
    for k in 0..model.k {
        fft::forward_unitary(h_doppler.row_mut(k));
    }
    let g = model.delay_dictionary();

    let mut gamma = vec![cfg.gamma_init; model.atom_count()];
    let mut noise_var = cfg.noise_var_init;
    let mut residual_norms = Vec::with_capacity(cfg.iterations);
    let mut converged_delta = 0.0;
    let mut peaks = PeakList::default();
    let mut atoms = Vec::new();
    let mut amplitudes = Vec::new();
    for _ in 0..cfg.iterations {
        let before = gamma.clone();
        update_gamma(&g, &h_doppler, &mut gamma, noise_var)?;
        let old: f64 = before.iter().sum();
        let change: f64 = gamma.iter().zip(&before).map(|(a, b)| (a - b).abs()).sum();
        converged_delta = if old > 0.0 { change / old } else { 0.0 };

        peaks = peak_select_2d(&gamma_grid(model, &gamma, start_time), cfg.peaks);
        atoms = peaks
            .entries
            .iter()
            .map(|p| raw_atom(model, p.delay_bin, p.doppler_bin))
            .collect();
        let (x, residual) = project(model, &hn, &atoms)?;
        amplitudes = x;
        noise_var = (residual / (n_obs - atoms.len()) as f64).max(NOISE_FLOOR);
        residual_norms.push(residual.sqrt() * scale);
    }

    let power_scale = scale * scale;
    let gamma: Vec<f64> = gamma.iter().map(|g| g * power_scale).collect();
    for p in &mut peaks.entries {
        p.power *= power_scale;
    }
    Ok(SBLResult {
        gamma: gamma_grid(model, &gamma, start_time),
        noise_var: noise_var * power_scale,
        active_peaks: peaks,
        active_atoms: atoms,
        active_amplitudes: amplitudes.iter().map(|x| x * scale).collect(),
        converged_delta,
        residual_norms,
    })
}
