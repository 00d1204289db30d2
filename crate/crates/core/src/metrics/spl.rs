use serde::Serialize;

use super::{CWeighting, MetricsError};
use crate::signal::SampleFrame;

/// Digital RMS 1.0 corresponds to 94 dB SPL (1 Pa).
pub const REFERENCE_DB: f64 = 94.0;
pub const SPL_FLOOR_DB: f64 = -120.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplReading {
    pub db: f64,
    /// Input was silent and the floor value was returned.
    pub floored: bool,
}

/// Level of a mean-square value, in dB SPL under the standard calibration.
pub fn level_db(mean_square: f64) -> SplReading {
    let db = 10.0 * mean_square.log10() + REFERENCE_DB;
    if db.is_finite() && db > SPL_FLOOR_DB {
        SplReading { db, floored: false }
    } else {
        SplReading {
            db: SPL_FLOOR_DB,
            floored: true,
        }
    }
}

/// C-weighted sound pressure level of at least one second of signal.
pub fn spl_dbc(stream: &SampleFrame) -> Result<SplReading, MetricsError> {
    let need = stream.sample_rate() as usize;
    if stream.frame_len() < need {
        return Err(MetricsError::TooShort {
            need,
            got: stream.frame_len(),
        });
    }
    let mut c = CWeighting::new(stream.sample_rate());
    let ms = stream
        .samples()
        .iter()
        .map(|&x| {
            let y = c.push(x);
            y * y
        })
        .sum::<f64>()
        / stream.frame_len() as f64;
    Ok(level_db(ms))
}

/// Broadband reduction `spl_dbc(off) - spl_dbc(on)`.
pub fn noise_reduction_db(off: &SampleFrame, on: &SampleFrame) -> Result<f64, MetricsError> {
    Ok(spl_dbc(off)?.db - spl_dbc(on)?.db)
}

/// Streaming C-weighted level over a sliding window.
#[derive(Debug, Clone)]
pub struct RollingSpl {
    weighting: CWeighting,
    window: Vec<f64>,
    pos: usize,
    filled: bool,
    sum: f64,
}

impl RollingSpl {
    pub fn new(sample_rate: u32, window_len: usize) -> Self {
        Self {
            weighting: CWeighting::new(sample_rate),
            window: vec![0.0; window_len.max(1)],
            pos: 0,
            filled: false,
            sum: 0.0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        let y = self.weighting.push(x);
        let sq = y * y;
        self.sum += sq - self.window[self.pos];
        self.window[self.pos] = sq;
        self.pos += 1;
        if self.pos == self.window.len() {
            self.pos = 0;
            self.filled = true;
            // re-sum once per window to cancel drift
            self.sum = self.window.iter().sum();
        }
    }

    pub fn mean_square(&self) -> f64 {
        let n = if self.filled { self.window.len() } else { self.pos.max(1) };
        self.sum.max(0.0) / n as f64
    }

    pub fn level(&self) -> SplReading {
        level_db(self.mean_square())
    }
}
