//! Channel sounding for drive-by vehicle-to-infrastructure links at 60 GHz.
//!
//! The crate covers the sounder parameter arithmetic, multitone waveform
//! generation, a geometric drive-by channel simulator, the receive chain that
//! turns a record into per-transmitter transfer functions, delay-Doppler
//! analysis with a multitaper local scattering function, and a sparse Bayesian
//! fit with super-resolution in delay.

pub mod channel;
pub mod error;
pub mod fft;
pub mod grid;
pub mod params;
pub mod rxproc;
pub mod sbl;
pub mod tfanalysis;
pub mod waveform;

pub use error::{Error, Result};
pub use grid::Grid;
