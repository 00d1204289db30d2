//! Acoustic evaluation: C-weighted SPL, Welch spectra, third-octave band
//! reduction and harmonic distortion.
//!
//! Calibration throughout: digital RMS 1.0 is 94 dB SPL.

mod bands;
mod harmonics;
mod psd;
mod report;
mod spl;
mod weighting;

pub use bands::{
    band_levels, third_octave_bands, third_octave_reduction, third_octave_reduction_in, BandLevel,
    BandReduction, ThirdOctaveBand, ThirdOctaveReport,
};
pub use harmonics::{harmonic_ratio, HarmonicLevel, HarmonicReport};
pub use psd::{welch_psd, PsdConfig, SpectrumEstimate};
pub use report::{write_band_csv, write_spectrum_csv};
pub use spl::{level_db, noise_reduction_db, spl_dbc, RollingSpl, SplReading, REFERENCE_DB, SPL_FLOOR_DB};
pub use weighting::CWeighting;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metrics configuration error: {0}")]
    Config(String),
    #[error("stream too short: need {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("off/on streams differ: {off} vs {on} samples")]
    LengthMismatch { off: usize, on: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
