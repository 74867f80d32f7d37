//! Thin wrappers around `rustfft` with a per-thread planner cache.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

/// Unnormalized forward DFT, `X[k] = sum x[n] e^{-j2pi kn/N}`.
pub fn forward(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), true).process(buf);
    }
}

/// Unnormalized inverse DFT, `x[n] = sum X[k] e^{+j2pi kn/N}`.
pub fn inverse(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), false).process(buf);
    }
}

pub fn forward_unitary(buf: &mut [Complex64]) {
    forward(buf);
    scale(buf, 1.0 / (buf.len() as f64).sqrt());
}

pub fn inverse_unitary(buf: &mut [Complex64]) {
    inverse(buf);
    scale(buf, 1.0 / (buf.len() as f64).sqrt());
}

fn scale(buf: &mut [Complex64], s: f64) {
    buf.iter_mut().for_each(|x| *x *= s);
}

/// Signed frequency index of DFT bin `k` for length `n` (`k >= n/2` maps negative).
pub fn signed_bin(k: usize, n: usize) -> isize {
    if k < n.div_ceil(2) {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Column of a centered axis for raw DFT index `k`.
pub fn centered_column(k: usize, n: usize) -> usize {
    (k + n / 2) % n
}

/// Raw DFT index for centered column `c`.
pub fn raw_index(c: usize, n: usize) -> usize {
    (c + n - n / 2) % n
}

/// Signed index represented by centered column `c`, spanning `[-n/2, n - n/2)`.
pub fn centered_value(c: usize, n: usize) -> isize {
    c as isize - (n / 2) as isize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centering_round_trips() {
        for n in [1usize, 2, 5, 8, 21, 32] {
            for k in 0..n {
                let c = centered_column(k, n);
                assert_eq!(raw_index(c, n), k);
                let v = centered_value(c, n);
                assert_eq!(v.rem_euclid(n as isize) as usize, k);
            }
        }
    }

    #[test]
    fn unitary_pair_preserves_norm() {
        let mut x: Vec<Complex64> = (0..7).map(|i| Complex64::new(i as f64, -(i as f64) / 3.0)).collect();
        let orig = x.clone();
        let e0: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        forward_unitary(&mut x);
        let e1: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        assert!((e0 - e1).abs() < 1e-12 * e0);
        inverse_unitary(&mut x);
        for (a, b) in x.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
