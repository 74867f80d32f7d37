//! Two-dimensional peak picking on delay-Doppler grids.

use serde::{Deserialize, Serialize};

use super::DelayDopplerGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Seconds.
    pub delay: f64,
    /// Hz.
    pub doppler: f64,
    pub power: f64,
    pub delay_bin: usize,
    /// Column in the centred grid.
    pub doppler_bin: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakList {
    /// Descending by power.
    pub entries: Vec<Peak>,
}

impl PeakList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first(&self) -> Option<&Peak> {
        self.entries.first()
    }
}

/// The `p` largest strict local maxima over circular 8-neighbourhoods.
///
/// Equal powers are ordered by smaller delay, then smaller absolute Doppler.
/// Plateaus produce no peaks.
pub fn top_peaks_2d(grid: &DelayDopplerGrid<f64>, p: usize) -> PeakList {
    let g = &grid.values;
    let (rows, cols) = g.shape();
    let mut found = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = g[(r, c)];
            let mut is_peak = true;
            'scan: for dr in [rows - 1, 0, 1] {
                for dc in [cols - 1, 0, 1] {
                    let (nr, nc) = ((r + dr) % rows, (c + dc) % cols);
                    if (nr, nc) != (r, c) && g[(nr, nc)] >= v {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                found.push(Peak {
                    delay: grid.delay_axis[r],
                    doppler: grid.doppler_axis[c],
                    power: v,
                    delay_bin: r,
                    doppler_bin: c,
                });
            }
        }
    }
    found.sort_by(|a, b| {
        b.power
            .total_cmp(&a.power)
            .then(a.delay.total_cmp(&b.delay))
            .then(a.doppler.abs().total_cmp(&b.doppler.abs()))
    });
    found.truncate(p);
    PeakList { entries: found }
}
