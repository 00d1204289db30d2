//! Virtual acoustic plant: noise sources, transfer paths, actuator
//! saturation and microphones, plus a free-field model for global power.

pub mod free_field;
mod geometry;
mod path;
mod saturation;
mod topology;

pub use free_field::{global_power_reduction, simulated_global_reduction, Monopole};
pub use geometry::{
    distance, free_field_path, geometry_to_paths, Position, DEFAULT_MIN_DISTANCE,
    DEFAULT_SPEED_OF_SOUND,
};
pub use path::PathModel;
pub use saturation::{saturate, SaturationModel};
pub use topology::{
    MicSample, PathsSpec, Plant, PlantFrames, PlantSpec, SourceSpec, UnitProbe, UnitSiteSpec,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("plant configuration error: {0}")]
    Config(String),
    #[error("numeric fault in plant: {0}")]
    Numeric(String),
}

/// A field point with its level, for grid exports.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FieldPoint {
    pub position: Position,
    pub spl_db: f64,
}
