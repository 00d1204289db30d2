use serde::{Deserialize, Serialize};

use super::PlantError;
use crate::signal::{DelayLine, FirFilter};

fn unit_gain() -> f64 {
    1.0
}

fn unit_fir() -> Vec<f64> {
    vec![1.0]
}

/// Acoustic or electro-acoustic transfer path: `gain * delay(fir)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathModel {
    #[serde(default)]
    pub delay: usize,
    #[serde(default = "unit_gain")]
    pub gain: f64,
    #[serde(default = "unit_fir")]
    pub fir: Vec<f64>,
}

impl PathModel {
    pub fn pure(delay: usize, gain: f64) -> Self {
        Self {
            delay,
            gain,
            fir: unit_fir(),
        }
    }

    pub fn silent() -> Self {
        Self::pure(0, 0.0)
    }

    /// Composite impulse response.
    pub fn impulse_response(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.delay];
        h.extend(self.fir.iter().map(|c| self.gain * c));
        h
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if self.fir.is_empty() || !self.gain.is_finite() || self.fir.iter().any(|c| !c.is_finite()) {
            return Err(PlantError::Config(format!("invalid path {self:?}")));
        }
        Ok(())
    }
}

/// Streaming realization of a [`PathModel`].
#[derive(Debug, Clone)]
pub(crate) enum PathRuntime {
    Silent,
    Tap { delay: DelayLine, gain: f64 },
    Fir(FirFilter),
}

impl PathRuntime {
    pub(crate) fn new(model: &PathModel) -> Result<Self, PlantError> {
        model.validate()?;
        if model.gain == 0.0 || model.fir.iter().all(|&c| c == 0.0) {
            return Ok(PathRuntime::Silent);
        }
        if model.fir.len() == 1 {
            return Ok(PathRuntime::Tap {
                delay: DelayLine::new(model.delay),
                gain: model.gain * model.fir[0],
            });
        }
        FirFilter::new(model.impulse_response())
            .map(PathRuntime::Fir)
            .map_err(|e| PlantError::Config(e.to_string()))
    }

    #[inline]
    pub(crate) fn push(&mut self, x: f64) -> f64 {
        match self {
            PathRuntime::Silent => 0.0,
            PathRuntime::Tap { delay, gain } => *gain * delay.push(x),
            PathRuntime::Fir(f) => f.push(x),
        }
    }
}
