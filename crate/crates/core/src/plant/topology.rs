use serde::{Deserialize, Serialize};

use super::geometry::{
    geometry_to_paths, Position, DEFAULT_MIN_DISTANCE, DEFAULT_SPEED_OF_SOUND,
};
use super::path::PathRuntime;
use super::{PathModel, PlantError, SaturationModel};
use crate::adaptive::SecondaryPathProbe;
use crate::signal::{SampleFrame, SignalGen, SignalSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub signal: SignalSpec,
    #[serde(default)]
    pub position: Option<Position>,
}

/// One noise-control unit site: its loudspeaker, its error microphone and
/// the amplifier saturation in front of the loudspeaker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSiteSpec {
    #[serde(default)]
    pub speaker: Option<Position>,
    #[serde(default)]
    pub error_mic: Option<Position>,
    #[serde(default)]
    pub saturation: SaturationModel,
}

fn default_speed_of_sound() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

fn default_min_distance() -> f64 {
    DEFAULT_MIN_DISTANCE
}

/// How transfer paths are obtained. Explicit matrices are indexed
/// `[emitter][microphone]`, microphones ordered as the units' error
/// microphones followed by the monitor microphones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathsSpec {
    Geometry {
        #[serde(default = "default_speed_of_sound")]
        speed_of_sound: f64,
        #[serde(default = "default_min_distance")]
        r_min: f64,
    },
    Explicit {
        primary: Vec<Vec<PathModel>>,
        secondary: Vec<Vec<PathModel>>,
    },
}

impl Default for PathsSpec {
    fn default() -> Self {
        PathsSpec::Geometry {
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            r_min: DEFAULT_MIN_DISTANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub sources: Vec<SourceSpec>,
    pub units: Vec<UnitSiteSpec>,
    #[serde(default)]
    pub monitor_mics: Vec<Position>,
    #[serde(default)]
    pub paths: PathsSpec,
}

impl PlantSpec {
    pub fn n_mics(&self) -> usize {
        self.units.len() + self.monitor_mics.len()
    }

    /// Resolves the primary and secondary path matrices.
    pub fn resolve_paths(
        &self,
        sample_rate: u32,
    ) -> Result<(Vec<Vec<PathModel>>, Vec<Vec<PathModel>>), PlantError> {
        match &self.paths {
            PathsSpec::Explicit { primary, secondary } => {
                check_matrix("primary", primary, self.sources.len(), self.n_mics())?;
                check_matrix("secondary", secondary, self.units.len(), self.n_mics())?;
                Ok((primary.clone(), secondary.clone()))
            }
            PathsSpec::Geometry {
                speed_of_sound,
                r_min,
            } => {
                if !(*speed_of_sound > 0.0) || !(*r_min > 0.0) {
                    return Err(PlantError::Config(
                        "speed of sound and r_min must be positive".into(),
                    ));
                }
                let need = |p: Option<Position>, what: String| {
                    p.ok_or_else(|| PlantError::Config(format!("{what} has no position")))
                };
                let src = self
                    .sources
                    .iter()
                    .enumerate()
                    .map(|(i, s)| need(s.position, format!("source {i}")))
                    .collect::<Result<Vec<_>, _>>()?;
                let spk = self
                    .units
                    .iter()
                    .enumerate()
                    .map(|(i, u)| need(u.speaker, format!("unit {i} speaker")))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut mics = self
                    .units
                    .iter()
                    .enumerate()
                    .map(|(i, u)| need(u.error_mic, format!("unit {i} error mic")))
                    .collect::<Result<Vec<_>, _>>()?;
                mics.extend_from_slice(&self.monitor_mics);
                Ok((
                    geometry_to_paths(&src, &mics, sample_rate, *speed_of_sound, *r_min),
                    geometry_to_paths(&spk, &mics, sample_rate, *speed_of_sound, *r_min),
                ))
            }
        }
    }
}

fn check_matrix(
    name: &str,
    m: &[Vec<PathModel>],
    rows: usize,
    cols: usize,
) -> Result<(), PlantError> {
    if m.len() != rows {
        return Err(PlantError::Config(format!(
            "{name} path matrix has {} rows, expected {rows}",
            m.len()
        )));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            return Err(PlantError::Config(format!(
                "{name} path row {i} has {} entries, expected {cols} microphones",
                row.len()
            )));
        }
        for p in row {
            p.validate()?;
        }
    }
    Ok(())
}

/// Microphone signals for one tick.
#[derive(Debug, Clone, Copy)]
pub struct MicSample<'a> {
    /// Error microphones then monitor microphones, with control applied.
    pub total: &'a [f64],
    /// Same microphones with every unit output forced to zero.
    pub disturbance: &'a [f64],
}

/// Frame-level plant output.
#[derive(Debug, Clone)]
pub struct PlantFrames {
    pub error: Vec<SampleFrame>,
    pub monitor: Vec<SampleFrame>,
    pub error_disturbance: Vec<SampleFrame>,
    pub monitor_disturbance: Vec<SampleFrame>,
}

/// The virtual acoustic environment. Linear paths from every emitter to every
/// microphone, with a saturation stage in front of each unit's loudspeaker.
///
/// Each tick has two phases: [`begin_tick`](Self::begin_tick) draws the
/// source samples (readable as feedforward references) and
/// [`finish_tick`](Self::finish_tick) applies the unit drives and produces
/// the microphone samples.
#[derive(Debug, Clone)]
pub struct Plant {
    sample_rate: u32,
    sources: Vec<SignalGen>,
    source_now: Vec<f64>,
    saturation: Vec<SaturationModel>,
    // [mic][emitter]
    primary: Vec<Vec<PathRuntime>>,
    secondary: Vec<Vec<PathRuntime>>,
    secondary_models: Vec<Vec<PathModel>>,
    n_units: usize,
    total: Vec<f64>,
    disturbance: Vec<f64>,
    applied: Vec<f64>,
    tick_open: bool,
    ticks: u64,
}

impl Plant {
    pub fn from_spec(spec: &PlantSpec, sample_rate: u32) -> Result<Self, PlantError> {
        let (primary, secondary) = spec.resolve_paths(sample_rate)?;
        Self::from_paths(
            spec.sources.iter().map(|s| s.signal.clone()).collect(),
            primary,
            secondary,
            spec.units.iter().map(|u| u.saturation).collect(),
            sample_rate,
        )
    }

    /// `primary[source][mic]`, `secondary[unit][mic]`; the first
    /// `secondary.len()` microphones are the units' error microphones.
    pub fn from_paths(
        sources: Vec<SignalSpec>,
        primary: Vec<Vec<PathModel>>,
        secondary: Vec<Vec<PathModel>>,
        saturation: Vec<SaturationModel>,
        sample_rate: u32,
    ) -> Result<Self, PlantError> {
        let n_units = secondary.len();
        if saturation.len() != n_units {
            return Err(PlantError::Config(format!(
                "{} saturation models for {n_units} units",
                saturation.len()
            )));
        }
        if let Some(s) = saturation.iter().find(|s| !s.is_valid()) {
            return Err(PlantError::Config(format!("invalid saturation {s:?}")));
        }
        let n_mics = primary
            .first()
            .or(secondary.first())
            .map_or(n_units, |r| r.len());
        if n_mics < n_units {
            return Err(PlantError::Config("every unit needs an error microphone".into()));
        }
        check_matrix("primary", &primary, sources.len(), n_mics)?;
        check_matrix("secondary", &secondary, n_units, n_mics)?;
        let transpose = |m: &[Vec<PathModel>]| -> Result<Vec<Vec<PathRuntime>>, PlantError> {
            (0..n_mics)
                .map(|mic| m.iter().map(|row| PathRuntime::new(&row[mic])).collect())
                .collect()
        };
        let gens = sources
            .into_iter()
            .map(|s| SignalGen::new(s, sample_rate))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PlantError::Config(e.to_string()))?;
        Ok(Self {
            sample_rate,
            source_now: vec![0.0; gens.len()],
            sources: gens,
            saturation,
            primary: transpose(&primary)?,
            secondary: transpose(&secondary)?,
            secondary_models: secondary,
            n_units,
            total: vec![0.0; n_mics],
            disturbance: vec![0.0; n_mics],
            applied: vec![0.0; n_units],
            tick_open: false,
            ticks: 0,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_monitors(&self) -> usize {
        self.total.len() - self.n_units
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn saturation(&self, unit: usize) -> SaturationModel {
        self.saturation[unit]
    }

    /// Impulse response from a unit's drive input to one microphone.
    pub fn secondary_response(&self, unit: usize, mic: usize) -> Vec<f64> {
        self.secondary_models[unit][mic].impulse_response()
    }

    /// Starts a tick and returns the current source samples.
    pub fn begin_tick(&mut self) -> &[f64] {
        if !self.tick_open {
            for (v, g) in self.source_now.iter_mut().zip(self.sources.iter_mut()) {
                *v = g.next_sample();
            }
            self.tick_open = true;
        }
        &self.source_now
    }

    /// Applies the unit drives (before saturation) and completes the tick.
    pub fn finish_tick(&mut self, drives: &[f64]) -> Result<MicSample<'_>, PlantError> {
        if drives.len() != self.n_units {
            return Err(PlantError::Config(format!(
                "{} drives for {} units",
                drives.len(),
                self.n_units
            )));
        }
        self.begin_tick();
        for ((a, &d), s) in self.applied.iter_mut().zip(drives).zip(&self.saturation) {
            *a = s.apply(d);
        }
        for mic in 0..self.total.len() {
            let d: f64 = self.primary[mic]
                .iter_mut()
                .zip(&self.source_now)
                .map(|(p, &x)| p.push(x))
                .sum();
            let c: f64 = self.secondary[mic]
                .iter_mut()
                .zip(&self.applied)
                .map(|(p, &u)| p.push(u))
                .sum();
            self.disturbance[mic] = d;
            self.total[mic] = d + c;
        }
        self.tick_open = false;
        self.ticks += 1;
        Ok(MicSample {
            total: &self.total,
            disturbance: &self.disturbance,
        })
    }

    /// Drive values after saturation for the latest tick.
    pub fn applied_drives(&self) -> &[f64] {
        &self.applied
    }

    /// Open-loop frame processing: one drive frame per unit.
    pub fn step_frame(&mut self, drives: &[SampleFrame]) -> Result<PlantFrames, PlantError> {
        if drives.len() != self.n_units {
            return Err(PlantError::Config(format!(
                "{} drive frames for {} units",
                drives.len(),
                self.n_units
            )));
        }
        let len = drives.first().map_or(0, |f| f.frame_len());
        if len == 0 || drives.iter().any(|f| f.frame_len() != len) {
            return Err(PlantError::Config("drive frames must be aligned".into()));
        }
        let n_mics = self.total.len();
        let mut tot = vec![Vec::with_capacity(len); n_mics];
        let mut dist = vec![Vec::with_capacity(len); n_mics];
        let mut buf = vec![0.0; self.n_units];
        for n in 0..len {
            for (b, f) in buf.iter_mut().zip(drives) {
                *b = f.samples()[n];
            }
            let s = self.finish_tick(&buf)?;
            for m in 0..n_mics {
                tot[m].push(s.total[m]);
                dist[m].push(s.disturbance[m]);
            }
        }
        let rate = self.sample_rate;
        let frames = |v: Vec<Vec<f64>>| -> Result<Vec<SampleFrame>, PlantError> {
            v.into_iter()
                .map(|s| SampleFrame::new(s, rate).map_err(|e| PlantError::Numeric(e.to_string())))
                .collect()
        };
        let mut tot = frames(tot)?;
        let mut dist = frames(dist)?;
        let monitor = tot.split_off(self.n_units);
        let monitor_disturbance = dist.split_off(self.n_units);
        Ok(PlantFrames {
            error: tot,
            monitor,
            error_disturbance: dist,
            monitor_disturbance,
        })
    }

    /// Probe for identifying one unit's secondary path in place, with the
    /// other units silent and the noise sources running.
    pub fn probe(&mut self, unit: usize) -> UnitProbe<'_> {
        UnitProbe {
            drives: vec![0.0; self.n_units],
            plant: self,
            unit,
        }
    }
}

pub struct UnitProbe<'a> {
    plant: &'a mut Plant,
    unit: usize,
    drives: Vec<f64>,
}

impl SecondaryPathProbe for UnitProbe<'_> {
    fn probe(&mut self, drive: f64) -> f64 {
        self.drives[self.unit] = drive;
        let unit = self.unit;
        self.plant
            .finish_tick(&self.drives)
            .map(|s| s.total[unit])
            .unwrap_or(f64::NAN)
    }

    fn true_response(&self) -> Option<Vec<f64>> {
        Some(self.plant.secondary_response(self.unit, self.unit))
    }
}
