//! Optimal non-coherent detection for ambient backscatter links.
//!
//! A tag signals one bit per symbol by reflecting (or not) an ambient RF
//! signal that the reader also receives directly. Neither the channels nor
//! the RF waveform are known at the reader, so the detectors here work
//! from the exact unconditional densities of the received energy
//! `z = ‖y‖²` under both hypotheses.
//!
//! Layout:
//! - [`special_fn`]: the integral `I_L(z; a, b)` plus E_n, K_n, γ/Γ.
//! - [`channel`]: system parameters and Rayleigh product-channel synthesis.
//! - [`likelihood`]: log-densities of channel gains and of `y`.
//! - [`detectors`]: the four test statistics and their constant thresholds.
//! - [`lut`]: uniform-grid lookup tables with a file cache.
//! - [`harness`]: Monte Carlo BER estimation, sweeps, config and CSV.

pub mod channel;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod likelihood;
pub mod lut;
pub mod quadrature;
pub mod special_fn;

pub use error::{Error, Result};
