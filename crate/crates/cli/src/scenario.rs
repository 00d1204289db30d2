use std::path::Path;
use std::sync::OnceLock;

use hush_core::adaptive::{ControllerParams, Mode};
use hush_core::plant::PlantSpec;
use hush_core::signal::{SignalSpec, DEFAULT_SAMPLE_RATE};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// The JSON schema every scenario is validated against before it is used.
pub const SCENARIO_SCHEMA: &str = include_str!("../schema/scenario.schema.json");

fn default_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}

fn default_mode() -> Mode {
    Mode::Feedback
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    /// Free-form provenance notes for constants chosen by hand.
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default = "default_rate")]
    pub sample_rate: u32,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub plant: PlantSpec,
    pub units: Vec<UnitConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitConfig {
    #[serde(default)]
    pub id: Option<String>,
    pub controller: ControllerParams,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Source whose signal feeds the feedforward reference input.
    #[serde(default)]
    pub reference_source: usize,
    #[serde(default)]
    pub calibration: CalibrationSpec,
}

fn default_model_order() -> usize {
    32
}
fn default_cal_duration() -> f64 {
    4.0
}
fn default_training_amplitude() -> f64 {
    0.3
}
fn default_step_factor() -> f64 {
    0.01
}

/// How a unit obtains its secondary-path estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum CalibrationSpec {
    /// Copy the simulated path (idealized, instant).
    #[default]
    Exact,
    /// LMS identification with white training noise while the noise
    /// sources keep running.
    Identify {
        #[serde(default = "default_model_order")]
        model_order: usize,
        #[serde(default = "default_cal_duration")]
        duration_s: f64,
        #[serde(default = "default_training_amplitude")]
        training_amplitude: f64,
        #[serde(default = "default_step_factor")]
        step_factor: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicsConfig {
    pub fundamental_hz: f64,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
}

fn default_k_max() -> u32 {
    10
}
fn default_window() -> f64 {
    10.0
}
fn default_segment() -> usize {
    4096
}
fn default_band_range() -> [f64; 2] {
    [31.5, 200.0]
}
fn default_telemetry_hz() -> f64 {
    10.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Trailing part of the run used for steady-state figures.
    #[serde(default = "default_window")]
    pub analysis_window_s: f64,
    #[serde(default = "default_segment")]
    pub psd_segment: usize,
    /// Nominal centre frequencies of the first and last reported band.
    #[serde(default = "default_band_range")]
    pub band_range_hz: [f64; 2],
    #[serde(default)]
    pub harmonics: Option<HarmonicsConfig>,
    #[serde(default = "default_telemetry_hz")]
    pub telemetry_hz: f64,
    #[serde(default = "default_true")]
    pub write_signals: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            analysis_window_s: default_window(),
            psd_segment: default_segment(),
            band_range_hz: default_band_range(),
            harmonics: None,
            telemetry_hz: default_telemetry_hz(),
            write_signals: true,
        }
    }
}

impl ScenarioConfig {
    pub fn unit_id(&self, k: usize) -> String {
        self.units[k].id.clone().unwrap_or_else(|| (k + 1).to_string())
    }

    pub fn total_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    /// Checks the constraints the schema cannot express.
    pub fn check(&self) -> Result<(), CliError> {
        let mut errs = Vec::new();
        if self.units.len() != self.plant.units.len() {
            errs.push(format!(
                "/units: {} controllers for {} unit sites in /plant/units",
                self.units.len(),
                self.plant.units.len()
            ));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        for (i, s) in self.plant.sources.iter().enumerate() {
            let mut freqs = Vec::new();
            match &s.signal {
                SignalSpec::Tone { freq_hz, .. } => freqs.push(*freq_hz),
                SignalSpec::MultiTone { tones } => freqs.extend(tones.iter().map(|t| t.freq_hz)),
                SignalSpec::Genset {
                    fundamental_hz,
                    components,
                    ..
                } => {
                    freqs.push(*fundamental_hz);
                    freqs.extend(components.iter().map(|c| c.freq_hz));
                }
                SignalSpec::WhiteNoise { .. } => {}
            }
            if freqs.iter().any(|f| *f >= nyquist) {
                errs.push(format!("/plant/sources/{i}/signal: component at or above {nyquist} Hz"));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for (k, u) in self.units.iter().enumerate() {
            if let Err(e) = u.controller.validate() {
                errs.push(format!("/units/{k}/controller: {e}"));
            }
            if u.reference_source >= self.plant.sources.len() {
                errs.push(format!("/units/{k}/reference_source: no source {}", u.reference_source));
            }
            if !ids.insert(self.unit_id(k)) {
                errs.push(format!("/units/{k}/id: duplicate unit id {}", self.unit_id(k)));
            }
        }
        if let Err(e) = self.plant.resolve_paths(self.sample_rate) {
            errs.push(format!("/plant: {e}"));
        }
        let m = &self.metrics;
        if !m.psd_segment.is_power_of_two() {
            errs.push("/metrics/psd_segment: must be a power of two".into());
        }
        if m.analysis_window_s > self.duration_s {
            errs.push("/metrics/analysis_window_s: longer than duration_s".into());
        }
        if m.band_range_hz[0] > m.band_range_hz[1] {
            errs.push("/metrics/band_range_hz: empty range".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::InvalidScenario(errs))
        }
    }
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCENARIO_SCHEMA).expect("bundled schema is valid JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Schema violations as `pointer: message` lines.
pub fn schema_errors(doc: &Value) -> Vec<String> {
    validator()
        .iter_errors(doc)
        .map(|e| {
            let p = e.instance_path.to_string();
            format!("{}: {e}", if p.is_empty() { "/" } else { &p })
        })
        .collect()
}

/// Parses, schema-validates and checks a scenario document.
pub fn parse_scenario(bytes: &[u8]) -> Result<ScenarioConfig, CliError> {
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| CliError::InvalidScenario(vec![format!("/: {e}")]))?;
    let errs = schema_errors(&doc);
    if !errs.is_empty() {
        return Err(CliError::InvalidScenario(errs));
    }
    let cfg: ScenarioConfig =
        serde_json::from_value(doc).map_err(|e| CliError::InvalidScenario(vec![format!("/: {e}")]))?;
    cfg.check()?;
    Ok(cfg)
}

/// Reads a scenario file, returning the parsed config and the raw bytes.
pub fn load_scenario(path: &Path) -> Result<(ScenarioConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(path)?;
    let cfg = parse_scenario(&bytes)?;
    Ok((cfg, bytes))
}
