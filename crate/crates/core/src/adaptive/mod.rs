//! Adaptive noise-control algorithms.
//!
//! The controllers minimise the error power subject to an RMS limit `rho`
//! on the control output. The limit is enforced through a penalty factor
//! recomputed once per frame from the estimated disturbance power and the
//! secondary-path gain, and fed into a leaky FxLMS update. With an
//! unbounded `rho` the penalty vanishes and the update is plain FxLMS.

mod calibration;
mod controller;
mod penalty;
mod update;

pub use calibration::{
    estimate_secondary_path, identification_step, misalignment_db, CalibrationResult,
    PathIdentifier, SecondaryPathProbe,
};
pub use controller::{
    Algorithm, Controller, ControllerParams, ControllerSnapshot, Mode, StepMode,
};
pub use penalty::{penalty_factor, penalty_factor_from_energy};
pub use update::{fxlms_update, mov_fxlms_update};

use serde::Serialize;
use thiserror::Error;

use crate::signal::dot;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fault {
    NonFiniteWeights,
    /// The output left the actuator's sane range within a frame.
    OutputOverflow,
    Diverged { error_power: f64, off_power: f64 },
}

impl std::fmt::Display for Fault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Fault::NonFiniteWeights => write!(f, "non-finite control weights"),
            Fault::OutputOverflow => write!(f, "control output overflow"),
            Fault::Diverged {
                error_power,
                off_power,
            } => write!(
                f,
                "error power {error_power:.3e} exceeds the trip level (off-state {off_power:.3e})"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("secondary path has not been calibrated")]
    NotCalibrated,
    #[error("controller is in {actual:?} mode, operation needs {expected:?}")]
    ModeMismatch { expected: Mode, actual: Mode },
    #[error("parameters can only change at a frame boundary")]
    MidFrame,
    #[error("controller fault: {0}")]
    Faulted(Fault),
    #[error("calibration failed: {0}")]
    Calibration(String),
}

/// Power gain of a secondary-path estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondaryPathGain {
    pub value: f64,
    /// Set when the estimate is numerically zero and the floor was applied.
    pub degenerate: bool,
}

pub const GAIN_FLOOR: f64 = 1e-12;

/// `sum(shat_i^2)`, floored at [`GAIN_FLOOR`].
pub fn secondary_path_gain(shat: &[f64]) -> SecondaryPathGain {
    let g: f64 = shat.iter().map(|v| v * v).sum();
    if g > GAIN_FLOOR {
        SecondaryPathGain {
            value: g,
            degenerate: false,
        }
    } else {
        SecondaryPathGain {
            value: GAIN_FLOOR,
            degenerate: true,
        }
    }
}

/// Internal-model disturbance estimate `e + shat . y_hist`, `y_hist` newest first.
pub fn estimate_disturbance(e: f64, y_hist: &[f64], shat: &[f64]) -> f64 {
    e + dot(shat, y_hist)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_examples() {
        assert_eq!(secondary_path_gain(&[1.0]).value, 1.0);
        let g = secondary_path_gain(&[0.6, 0.8]);
        assert!((g.value - 1.0).abs() < 1e-15 && !g.degenerate);
        let z = secondary_path_gain(&[0.0; 4]);
        assert_eq!(z.value, GAIN_FLOOR);
        assert!(z.degenerate);
    }

    #[test]
    fn disturbance_estimate_examples() {
        assert_eq!(estimate_disturbance(0.7, &[0.0, 0.0], &[0.5, 0.5]), 0.7);
        assert_eq!(estimate_disturbance(0.7, &[1.0, 2.0], &[0.0, 0.0]), 0.7);
        assert_eq!(estimate_disturbance(0.5, &[1.0, 2.0], &[0.5, 0.25]), 1.5);
    }
}
