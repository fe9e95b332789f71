//! Sparse FMCW radar range estimation from coarsely quantized, dithered
//! compressive measurements.
//!
//! The acquisition chain is a partial Fourier operator over the range
//! profile ([`signal_model`]), followed by a dithered uniform mid-rise
//! quantizer ([`quantization`]). Range profiles are recovered with projected
//! back projection or quantized iterative hard thresholding ([`recovery`]).
//! [`evaluation`] runs seeded Monte Carlo grids over sparsity, bit depth and
//! bit-rate; [`ambiguity`] builds scenes that undithered 1-bit sensing cannot
//! tell apart; [`cli_io`] holds configuration, CSV output and capture files.

pub mod ambiguity;
pub mod cli_io;
pub mod error;
pub mod evaluation;
pub mod quantization;
pub mod recovery;
pub mod seed;
pub mod signal_model;

pub use error::{Error, Result};
pub use quantization::{BitDepth, Dither, QuantizerConfig, Sensor};
pub use recovery::{Algorithm, Decoder, RecoveryConfig, RecoveryResult, StopReason};
pub use signal_model::{Complex, PartialFourier, RadarParams, RangeProfile, SamplingPlan};
