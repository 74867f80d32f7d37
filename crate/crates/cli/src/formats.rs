//! Binary and text artifact formats. All binary fields are little-endian.
//!
//! DDS1 I/Q record, 32-byte header:
//!
//! | offset | type     | field                          |
//! |--------|----------|--------------------------------|
//! | 0      | [u8; 4]  | magic `DDS1`                   |
//! | 4      | u8       | version (1)                    |
//! | 5      | [u8; 3]  | reserved, zero                 |
//! | 8      | f64      | sample rate, S/s               |
//! | 16     | u64      | sample count `n`               |
//! | 24     | f64      | time of the first sample, s    |
//! | 32     | f64 x 2n | interleaved I, Q               |
//!
//! DDG1 transfer function grid:
//!
//! | offset | type       | field                              |
//! |--------|------------|------------------------------------|
//! | 0      | [u8; 4]    | magic `DDG1`                       |
//! | 4      | u8         | version (1)                        |
//! | 5      | [u8; 3]    | reserved, zero                     |
//! | 8      | u64        | seed                               |
//! | 16     | u32        | snapshots `Q`                      |
//! | 20     | u32        | tones `K`                          |
//! | 24     | u32        | transmitter index                  |
//! | 28     | u32        | reserved, zero                     |
//! | 32     | f64        | centre time of snapshot 0, s       |
//! | 40     | f64        | snapshot spacing, s                |
//! | 48     | f64 x K    | tone frequencies, Hz               |
//! | ...    | f64 x 2QK  | `H[q][k]` as re, im; row-major     |
//!
//! DDG2 real delay-Doppler grid:
//!
//! | offset | type       | field                              |
//! |--------|------------|------------------------------------|
//! | 0      | [u8; 4]    | magic `DDG2`                       |
//! | 4      | u8         | version (1)                        |
//! | 5      | [u8; 3]    | reserved, zero                     |
//! | 8      | u64        | seed                               |
//! | 16     | u32        | delay bins `R`                     |
//! | 20     | u32        | Doppler bins `C`                   |
//! | 24     | f64        | window start time, s               |
//! | 32     | f64 x R    | delay axis, s                      |
//! | ...    | f64 x C    | Doppler axis, Hz                   |
//! | ...    | f64 x RC   | values, row-major                  |

use std::fs;
use std::io::Write;
use std::path::Path;

use dds_core::grid::Grid;
use dds_core::rxproc::TransferFunctionGrid;
use dds_core::tfanalysis::{DelayDopplerGrid, PeakList};
use dds_core::waveform::SampledSignal;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const VERSION: u8 = 1;

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_file(path: &Path, stage: &'static str) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingInput {
                path: path.to_path_buf(),
                stage,
            }
        } else {
            CliError::io(path, e)
        }
    })
}

fn header(magic: &[u8; 4]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(magic);
    b.push(VERSION);
    b.extend_from_slice(&[0; 3]);
    b
}

fn put_f64s(b: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        b.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn open(bytes: &'a [u8], path: &'a Path, magic: &[u8; 4]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != magic {
            return Err(CliError::format(
                path,
                format!("expected magic {}", String::from_utf8_lossy(magic)),
            ));
        }
        if bytes[4] != VERSION {
            return Err(CliError::format(path, format!("unsupported version {}", bytes[4])));
        }
        Ok(Self { bytes, pos: 8, path })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::format(self.path, "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| CliError::format(self.path, "size overflow"))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(CliError::format(
                self.path,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub fn encode_dds1(sig: &SampledSignal) -> Vec<u8> {
    let mut b = header(b"DDS1");
    b.reserve(24 + 16 * sig.len());
    b.extend_from_slice(&sig.sample_rate.to_le_bytes());
    b.extend_from_slice(&(sig.len() as u64).to_le_bytes());
    b.extend_from_slice(&sig.t0.to_le_bytes());
    put_f64s(&mut b, sig.samples.iter().flat_map(|s| [s.re, s.im]));
    b
}

pub fn decode_dds1(bytes: &[u8], path: &Path) -> Result<SampledSignal> {
    let mut r = Reader::open(bytes, path, b"DDS1")?;
    let sample_rate = r.f64()?;
    let n = r.u64()? as usize;
    let t0 = r.f64()?;
    let iq = r.f64s(
        n.checked_mul(2)
            .ok_or_else(|| CliError::format(path, "size overflow"))?,
    )?;
    r.finish()?;
    let samples = iq.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    SampledSignal::new(samples, sample_rate, t0).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn encode_ddg1(h: &TransferFunctionGrid, seed: u64) -> Vec<u8> {
    let (q, k) = h.values.shape();
    let mut b = header(b"DDG1");
    b.extend_from_slice(&seed.to_le_bytes());
    b.extend_from_slice(&(q as u32).to_le_bytes());
    b.extend_from_slice(&(k as u32).to_le_bytes());
    b.extend_from_slice(&(h.tx_index as u32).to_le_bytes());
    b.extend_from_slice(&0u32.to_le_bytes());
    let t0 = h.snapshot_times.first().copied().unwrap_or(0.0);
    let dt = match h.snapshot_times.as_slice() {
        [a, b, ..] => b - a,
        _ => 0.0,
    };
    put_f64s(&mut b, [t0, dt]);
    put_f64s(&mut b, h.tone_frequencies.iter().copied());
    put_f64s(&mut b, h.values.iter().flat_map(|x| [x.re, x.im]));
    b
}

/// Decodes a DDG1 grid. Noise and SNR series are not stored and come back empty.
pub fn decode_ddg1(bytes: &[u8], path: &Path) -> Result<(TransferFunctionGrid, u64)> {
    let mut r = Reader::open(bytes, path, b"DDG1")?;
    let seed = r.u64()?;
    let q = r.u32()? as usize;
    let k = r.u32()? as usize;
    let tx_index = r.u32()? as usize;
    r.u32()?;
    let t0 = r.f64()?;
    let dt = r.f64()?;
    let tone_frequencies = r.f64s(k)?;
    let raw = r.f64s(2 * q * k)?;
    r.finish()?;
    let values = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    Ok((
        TransferFunctionGrid {
            tx_index,
            values: Grid::from_vec(q, k, values),
            snapshot_times: (0..q).map(|i| t0 + i as f64 * dt).collect(),
            tone_frequencies,
            noise_power: Vec::new(),
            snr_db: Vec::new(),
        },
        seed,
    ))
}

pub fn encode_ddg2(g: &DelayDopplerGrid<f64>, seed: u64) -> Vec<u8> {
    let (rows, cols) = g.values.shape();
    let mut b = header(b"DDG2");
    b.extend_from_slice(&seed.to_le_bytes());
    b.extend_from_slice(&(rows as u32).to_le_bytes());
    b.extend_from_slice(&(cols as u32).to_le_bytes());
    put_f64s(&mut b, [g.window_start_time]);
    put_f64s(&mut b, g.delay_axis.iter().copied());
    put_f64s(&mut b, g.doppler_axis.iter().copied());
    put_f64s(&mut b, g.values.iter().copied());
    b
}

pub fn decode_ddg2(bytes: &[u8], path: &Path) -> Result<(DelayDopplerGrid<f64>, u64)> {
    let mut r = Reader::open(bytes, path, b"DDG2")?;
    let seed = r.u64()?;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let window_start_time = r.f64()?;
    let delay_axis = r.f64s(rows)?;
    let doppler_axis = r.f64s(cols)?;
    let values = r.f64s(rows * cols)?;
    r.finish()?;
    Ok((
        DelayDopplerGrid {
            values: Grid::from_vec(rows, cols, values),
            delay_axis,
            doppler_axis,
            window_start_time,
        },
        seed,
    ))
}

/// CSV with a `# seed N` first line, a header row, then `rows`.
pub fn csv(seed: u64, columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut s = format!("# seed {seed}\n{}\n", columns.join(","));
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

/// Shortest round-tripping decimal form.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFile {
    pub seed: u64,
    pub source: String,
    pub tx_index: usize,
    pub window_start_s: f64,
    pub peaks: Vec<PeakRecord>,
}

impl PeakFile {
    pub fn new(seed: u64, source: &str, tx_index: usize, window_start_s: f64, list: &PeakList) -> Self {
        Self {
            seed,
            source: source.into(),
            tx_index,
            window_start_s,
            peaks: list
                .entries
                .iter()
                .map(|p| PeakRecord {
                    delay_s: p.delay,
                    doppler_hz: p.doppler,
                    power: p.power,
                })
                .collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(self).expect("peak file serializes");
        s.push('\n');
        s.into_bytes()
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| CliError::format(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dds1_round_trip_and_header_size() {
        let sig = SampledSignal::new(vec![Complex64::new(1.5, -2.0), Complex64::new(0.0, 3.25)], 125e6, 0.5).unwrap();
        let bytes = encode_dds1(&sig);
        assert_eq!(bytes.len(), 32 + 32);
        assert_eq!(&bytes[..4], b"DDS1");
        let back = decode_dds1(&bytes, Path::new("x")).unwrap();
        assert_eq!(back, sig);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let sig = SampledSignal::new(vec![Complex64::new(1.0, 0.0); 4], 1.0, 0.0).unwrap();
        let bytes = encode_dds1(&sig);
        assert!(decode_dds1(&bytes[..bytes.len() - 3], Path::new("x")).is_err());
        assert!(decode_ddg1(&bytes, Path::new("x")).is_err());
    }

    #[test]
    fn ddg1_round_trip() {
        let h = TransferFunctionGrid {
            tx_index: 1,
            values: Grid::from_fn(3, 2, |q, k| Complex64::new(q as f64, -(k as f64))),
            snapshot_times: vec![0.25, 0.5, 0.75],
            tone_frequencies: vec![-1e6, 1e6],
            noise_power: vec![],
            snr_db: vec![],
        };
        let (back, seed) = decode_ddg1(&encode_ddg1(&h, 42), Path::new("x")).unwrap();
        assert_eq!(seed, 42);
        assert_eq!(back, h);
    }

    #[test]
    fn ddg2_round_trip() {
        let g = DelayDopplerGrid::from_raw(&Grid::from_fn(2, 4, |r, c| (r * 4 + c) as f64), 1e-8, 50.0, 1.25);
        let (back, seed) = decode_ddg2(&encode_ddg2(&g, 9), Path::new("x")).unwrap();
        assert_eq!(seed, 9);
        assert_eq!(back, g);
    }
}
