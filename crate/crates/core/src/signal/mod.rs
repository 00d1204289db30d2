//! Streaming DSP primitives: frames, FIR filters with history, delay lines
//! and deterministic signal generators.

mod delay;
mod fir;
mod frame;
mod generator;
mod io;

pub use delay::DelayLine;
pub use fir::{convolve, FirFilter, TapLine};
pub(crate) use fir::dot;
pub use frame::{SampleFrame, DEFAULT_SAMPLE_RATE};
pub use generator::{db_to_amplitude, Harmonic, RelativeTone, SignalGen, SignalSpec, ToneSpec};
pub use io::{read_f32_le, write_f32_le, write_wav};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("frame must contain at least one sample")]
    EmptyFrame,
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("sample rate mismatch: expected {expected} Hz, found {found} Hz")]
    RateMismatch { expected: u32, found: u32 },
    #[error("{freq} Hz is at or above the Nyquist frequency {nyquist} Hz")]
    Aliasing { freq: f64, nyquist: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
