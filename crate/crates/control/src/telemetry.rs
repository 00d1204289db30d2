use serde::{Deserialize, Serialize};

use crate::state::UnitState;

/// Periodic status of one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryFrame {
    /// Simulated seconds since scenario start.
    pub t: f64,
    pub mode: UnitState,
    pub alpha: f64,
    /// Mean y^2 over the last completed frame.
    pub output_power: f64,
    pub spl_error_dbc: f64,
    pub spl_monitor_dbc: Vec<f64>,
    /// Rolling C-weighted level of the disturbance estimate minus that of
    /// the error signal.
    pub reduction_db: f64,
    pub converged: bool,
    /// Outbound frames dropped so far because the queue was full.
    #[serde(default)]
    pub dropped: u64,
}

impl TelemetryFrame {
    pub fn idle(t: f64) -> Self {
        Self {
            t,
            mode: UnitState::Idle,
            alpha: 0.0,
            output_power: 0.0,
            spl_error_dbc: hush_core::metrics::SPL_FLOOR_DB,
            spl_monitor_dbc: Vec::new(),
            reduction_db: 0.0,
            converged: false,
            dropped: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.t, self.alpha, self.output_power, self.spl_error_dbc, self.reduction_db]
            .iter()
            .chain(&self.spl_monitor_dbc)
            .all(|v| v.is_finite())
    }
}
