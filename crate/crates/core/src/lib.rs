//! Core of the hush active noise mitigation simulator.
//!
//! * [`signal`]: frames, streaming FIR filters, generators.
//! * [`adaptive`]: FxLMS family controllers with an output-power constraint,
//!   and secondary-path identification.
//! * [`plant`]: the virtual acoustic environment the controllers act on.
//! * [`metrics`]: SPL, spectra, third-octave reports and distortion.

pub mod adaptive;
pub mod metrics;
pub mod plant;
pub mod signal;
