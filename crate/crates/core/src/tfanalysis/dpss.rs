//! Discrete prolate spheroidal (Slepian) sequences.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tapers {
    /// Unit-norm sequences, most concentrated first.
    pub sequences: Vec<Vec<f64>>,
    /// Fraction of each taper's energy inside `[-W, W]`, `W = NW / length`.
    pub concentrations: Vec<f64>,
}

/// The `count` leading Slepian sequences of `length` samples and time-bandwidth product `nw`.
///
/// They are the top eigenvectors of the commuting tridiagonal matrix. Even
/// tapers are signed to have a positive sum, odd tapers a positive first half.
pub fn dpss_tapers(length: usize, nw: f64, count: usize) -> Result<Tapers> {
    if !(nw.is_finite() && nw > 0.0) {
        return Err(Error::config("nw", "time-bandwidth product must be positive"));
    }
    if count == 0 || count > length {
        return Err(Error::config(
            "taper_count",
            format!("{count} tapers requested for length {length}"),
        ));
    }
    let max = (2.0 * nw).floor() as usize;
    if count > max {
        return Err(Error::Concentration { count, nw, max });
    }
    let n = length;
    let w = nw / n as f64;
    let cos = (2.0 * PI * w).cos();
    let tri = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let x = (n as f64 - 1.0 - 2.0 * i as f64) / 2.0;
            x * x * cos
        } else if i.abs_diff(j) == 1 {
            let k = i.max(j) as f64;
            k * (n as f64 - k) / 2.0
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(tri);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut sequences = Vec::with_capacity(count);
    for (k, &idx) in order.iter().take(count).enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let sign = if k % 2 == 0 {
            v.iter().sum::<f64>()
        } else {
            v[..n / 2].iter().sum::<f64>()
        };
        if sign < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        sequences.push(v);
    }
    let concentrations = sequences.iter().map(|v| concentration(v, w)).collect();
    Ok(Tapers {
        sequences,
        concentrations,
    })
}

/// `v^T A v` with the band-limiting kernel `A[i, j] = sin(2 pi W (i - j)) / (pi (i - j))`.
fn concentration(v: &[f64], w: f64) -> f64 {
    let n = v.len();
    let kernel: Vec<f64> = (0..n)
        .map(|d| {
            if d == 0 {
                2.0 * w
            } else {
                (2.0 * PI * w * d as f64).sin() / (PI * d as f64)
            }
        })
        .collect();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += v[i] * v[j] * kernel[i.abs_diff(j)];
        }
    }
    acc
}
