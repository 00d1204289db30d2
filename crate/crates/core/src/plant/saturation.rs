use serde::{Deserialize, Serialize};

/// Amplifier/actuator output nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SaturationModel {
    #[default]
    None,
    HardClip {
        limit: f64,
    },
    TanhSoft {
        limit: f64,
    },
}

impl SaturationModel {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            SaturationModel::None => x,
            SaturationModel::HardClip { limit } => x.clamp(-limit, limit),
            SaturationModel::TanhSoft { limit } => limit * (x / limit).tanh(),
        }
    }

    pub fn limit(&self) -> Option<f64> {
        match *self {
            SaturationModel::None => None,
            SaturationModel::HardClip { limit } | SaturationModel::TanhSoft { limit } => Some(limit),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.limit().map_or(true, |l| l > 0.0 && l.is_finite())
    }
}

/// Free-function form of [`SaturationModel::apply`].
pub fn saturate(model: &SaturationModel, x: f64) -> f64 {
    model.apply(x)
}
