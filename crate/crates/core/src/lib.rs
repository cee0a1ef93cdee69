//! Spectral-envelope shaped diffusion noise for DDPM neural vocoders.
//!
//! The crate is organised bottom-up:
//!
//! - [`stft`]: windowed STFT / iSTFT pair with exact perfect reconstruction and
//!   the FFT-path time-varying filter `G⁺ M G`.
//! - [`dense`]: explicit-matrix versions of the same operators, used as test
//!   oracles at tiny sizes.
//! - [`mel`]: HTK mel filterbank, log-mel analysis and pseudoinversion back to
//!   linear power.
//! - [`envelope`]: cepstral envelope estimation, minimum-phase synthesis and the
//!   per-utterance [`FilterSpec`](envelope::FilterSpec).
//! - [`prior`]: standard, diagonal and envelope-shaped noise priors with
//!   sampling, whitening and losses.
//! - [`diffusion`]: noise schedules, the forward process, the training loss and
//!   the ancestral sampler.
//! - [`io`]: WAV, `SGMEL1` tensor files, CSV export and run configuration.
//! - [`bench`]: timing harness for the filter's `O(K·N log N)` scaling.

// `!(x > 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod dense;
pub mod diffusion;
pub mod envelope;
mod error;
pub mod io;
pub mod mel;
pub mod prior;
pub mod stft;

pub use error::{Error, Result};
