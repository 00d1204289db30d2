//! Headless scenario execution and run artifacts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use hush_control::{Command, Envelope, ModeRequest, UnitState};
use hush_core::adaptive::{Algorithm, Mode};
use hush_core::metrics::{
    harmonic_ratio, noise_reduction_db, spl_dbc, third_octave_bands, third_octave_reduction_in, welch_psd,
    write_band_csv, write_spectrum_csv, PsdConfig, ThirdOctaveReport,
};
use hush_core::signal::{write_f32_le, write_wav, SampleFrame};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::engine::{Recorder, Simulation, UnitMessage};
use crate::error::CliError;
use crate::scenario::{CalibrationSpec, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRow {
    pub nominal_hz: f64,
    pub off_db: f64,
    pub on_db: f64,
    pub reduction_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MicSummary {
    pub name: String,
    pub kind: &'static str,
    pub spl_off_dbc: f64,
    pub spl_on_dbc: f64,
    pub broadband_reduction_db: f64,
    /// Arithmetic mean of the valid bands in the configured range.
    pub band_mean_reduction_db: Option<f64>,
    pub bands: Vec<BandRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSummary {
    pub rho: f64,
    /// Mean y^2 over the last quarter of the run divided by rho^2.
    pub power_ratio: f64,
    pub compliant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSummary {
    pub mean: f64,
    pub max: f64,
    pub last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicSummary {
    pub fundamental_hz: f64,
    /// Power of the strongest harmonic relative to the residual fundamental.
    pub max_harmonic_db: Option<f64>,
    pub harmonics_above_minus_20_db: usize,
    /// Reduction in the third-octave band holding the fundamental.
    pub fundamental_band_reduction_db: Option<f64>,
    pub ratios_db: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub method: &'static str,
    pub misalignment_db: Option<f64>,
    pub training_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitSummary {
    pub id: String,
    pub mode: Mode,
    pub algorithm: Algorithm,
    pub final_state: UnitState,
    pub fault: Option<String>,
    pub calibration: Option<CalibrationSummary>,
    /// Mean y^2 over the last quarter of the run.
    pub output_power: f64,
    pub constraint: Option<ConstraintSummary>,
    pub alpha: AlphaSummary,
    /// Mean e^2 at the unit's error microphone over the analysis window.
    pub residual_power: f64,
    pub harmonics: Option<HarmonicSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub config_sha256: String,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub analysis_window_s: f64,
    pub calibration_s: f64,
    pub units: Vec<UnitSummary>,
    pub mics: Vec<MicSummary>,
    pub faulted: bool,
}

impl RunSummary {
    pub fn mic(&self, name: &str) -> Option<&MicSummary> {
        self.mics.iter().find(|m| m.name == name)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// In-memory result of [`simulate`].
pub struct RunData {
    pub summary: RunSummary,
    pub recorder: Recorder,
    /// Telemetry, acks and events as envelope lines.
    pub log: Vec<String>,
    pub reports: Vec<(String, ThirdOctaveReport)>,
    pub analysis_start: usize,
}

struct LogWriter {
    seq: u64,
    lines: Vec<String>,
}

impl LogWriter {
    fn push(&mut self, topic: String, payload: serde_json::Value) {
        self.seq += 1;
        self.lines.push(Envelope::new(topic, self.seq, payload).to_line());
    }

    fn messages(&mut self, msgs: Vec<UnitMessage>) {
        for m in msgs {
            let ch = if m.ack { "ack" } else { "event" };
            self.push(format!("unit/{}/{ch}", m.unit), m.payload);
        }
    }
}

/// Calibrates every unit in turn, runs the scenario and computes the
/// summary. No files are touched.
pub fn simulate(cfg: &ScenarioConfig, config_bytes: &[u8]) -> Result<RunData, CliError> {
    let mut sim = Simulation::new(cfg)?;
    let fs = cfg.sample_rate as usize;
    let mut log = LogWriter {
        seq: 0,
        lines: Vec::new(),
    };

    for k in 0..cfg.units.len() {
        sim.submit_local(k, Command::Calibrate);
        sim.tick(None)?;
        while sim.unit(k).machine.state() == UnitState::Calibrating {
            sim.tick(None)?;
        }
        log.messages(sim.drain_messages());
        if sim.unit(k).machine.state() == UnitState::Fault {
            return Err(CliError::Fault(format!("unit {} calibration failed", sim.unit(k).id)));
        }
    }
    let calibration_ticks = sim.ticks();
    for (k, u) in cfg.units.iter().enumerate() {
        let mode = match u.mode {
            Mode::Feedforward => ModeRequest::Feedforward,
            Mode::Feedback => ModeRequest::Feedback,
        };
        sim.submit_local(k, Command::SetMode { mode });
    }

    let n = cfg.total_samples();
    let period = ((fs as f64 / cfg.metrics.telemetry_hz).round() as usize).max(1);
    let mut rec = Recorder::new(cfg.units.len(), sim.n_monitors(), n);
    for i in 0..n {
        sim.tick(Some(&mut rec))?;
        if (i + 1) % period == 0 {
            log.messages(sim.drain_messages());
            for k in 0..cfg.units.len() {
                let frame = sim.telemetry(k);
                let topic = format!("unit/{}/telemetry", sim.unit(k).id);
                log.push(topic, serde_json::to_value(frame).map_err(CliError::sim)?);
            }
        }
    }
    log.messages(sim.drain_messages());

    let window = ((cfg.metrics.analysis_window_s * fs as f64).round() as usize).min(n);
    let start = n - window;
    let psd = PsdConfig {
        segment_len: cfg.metrics.psd_segment,
        ..PsdConfig::default()
    };
    let frame = |v: &[f64]| SampleFrame::new(v.to_vec(), cfg.sample_rate).map_err(CliError::sim);
    let [lo, hi] = cfg.metrics.band_range_hz;
    let bands = third_octave_bands(lo, hi);
    let band_of = |f: f64| bands.iter().find(|b| f >= b.lower_hz && f < b.upper_hz).map(|b| b.nominal_hz);

    let mut mics = Vec::new();
    let mut reports = Vec::new();
    let mut mic = |name: String, kind, off: &[f64], on: &[f64]| -> Result<(), CliError> {
        let (off, on) = (frame(&off[start..])?, frame(&on[start..])?);
        let report = third_octave_reduction_in(&off, &on, psd, lo, hi).map_err(CliError::sim)?;
        let level = |x: &SampleFrame| spl_dbc(x).map(|r| r.db).map_err(CliError::sim);
        mics.push(MicSummary {
            name: name.clone(),
            kind,
            spl_off_dbc: level(&off)?,
            spl_on_dbc: level(&on)?,
            broadband_reduction_db: noise_reduction_db(&off, &on).map_err(CliError::sim)?,
            band_mean_reduction_db: report.mean_reduction(lo, hi),
            bands: report
                .bands
                .iter()
                .filter(|b| b.valid)
                .map(|b| BandRow {
                    nominal_hz: b.nominal_hz,
                    off_db: b.off_db,
                    on_db: b.on_db,
                    reduction_db: b.reduction_db,
                })
                .collect(),
        });
        reports.push((name, report));
        Ok(())
    };
    for k in 0..cfg.units.len() {
        mic(format!("unit{}_error", sim.unit(k).id), "error", &rec.error_off[k], &rec.error[k])?;
    }
    for m in 0..sim.n_monitors() {
        mic(format!("monitor{}", m + 1), "monitor", &rec.monitor_off[m], &rec.monitor[m])?;
    }

    let tail = n - n / 4;
    let mut units = Vec::new();
    for (k, u) in cfg.units.iter().enumerate() {
        let rt = sim.unit(k);
        let y = &rec.output[k][tail..];
        let output_power = y.iter().map(|v| v * v).sum::<f64>() / y.len().max(1) as f64;
        let a = &rec.alpha[k][tail..];
        let alpha = AlphaSummary {
            mean: a.iter().sum::<f64>() / a.len().max(1) as f64,
            max: a.iter().fold(0.0, |m: f64, &v| m.max(v)),
            last: a.last().copied().unwrap_or(0.0),
        };
        let e = &rec.error[k][start..];
        let residual_power = e.iter().map(|v| v * v).sum::<f64>() / e.len().max(1) as f64;
        let harmonics = match &cfg.metrics.harmonics {
            Some(h) => {
                let r = harmonic_ratio(&frame(e)?, h.fundamental_hz, h.k_max, psd).map_err(CliError::sim)?;
                let band = band_of(h.fundamental_hz)
                    .and_then(|nominal| reports[k].1.band(nominal))
                    .filter(|b| b.valid)
                    .map(|b| b.reduction_db);
                Some(HarmonicSummary {
                    fundamental_hz: h.fundamental_hz,
                    max_harmonic_db: r.max_ratio_db(),
                    harmonics_above_minus_20_db: r.count_above(-20.0),
                    fundamental_band_reduction_db: band,
                    ratios_db: r.harmonics.iter().map(|h| (h.order, h.ratio_db)).collect(),
                })
            }
            None => None,
        };
        units.push(UnitSummary {
            id: rt.id.clone(),
            mode: u.mode,
            algorithm: u.controller.algorithm,
            final_state: rt.machine.state(),
            fault: rt.last_fault.as_ref().map(|f| f.to_string()),
            calibration: rt.last_calibration.as_ref().map(|c| CalibrationSummary {
                method: match u.calibration {
                    CalibrationSpec::Exact => "exact",
                    CalibrationSpec::Identify { .. } => "identify",
                },
                misalignment_db: c.misalignment_db,
                training_samples: c.training_samples,
            }),
            output_power,
            constraint: u.controller.rho.map(|rho| {
                let ratio = output_power / (rho * rho);
                ConstraintSummary {
                    rho,
                    power_ratio: ratio,
                    compliant: ratio <= 1.1,
                }
            }),
            alpha,
            residual_power,
            harmonics,
        });
    }
    let faulted = units.iter().any(|u| u.fault.is_some());
    Ok(RunData {
        summary: RunSummary {
            scenario: cfg.name.clone(),
            config_sha256: sha256_hex(config_bytes),
            sample_rate: cfg.sample_rate,
            duration_s: cfg.duration_s,
            analysis_window_s: window as f64 / fs as f64,
            calibration_s: calibration_ticks as f64 / fs as f64,
            units,
            mics,
            faulted,
        },
        recorder: rec,
        log: log.lines,
        reports,
        analysis_start: start,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)?;
    Ok(())
}

/// Writes every artifact of a finished run into `out`.
pub fn write_artifacts(cfg: &ScenarioConfig, config_bytes: &[u8], data: &RunData, out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), config_bytes)?;
    write_text(&out.join("config.sha256"), &format!("{}  config.json\n", data.summary.config_sha256))?;

    let mut summary = serde_json::to_string_pretty(&data.summary).map_err(CliError::sim)?;
    summary.push('\n');
    write_text(&out.join("summary.json"), &summary)?;

    let mut log = BufWriter::new(fs::File::create(out.join("telemetry.ndjson"))?);
    for l in &data.log {
        writeln!(log, "{l}")?;
    }
    log.flush()?;

    let metrics = out.join("metrics");
    fs::create_dir_all(&metrics)?;
    let psd = PsdConfig {
        segment_len: cfg.metrics.psd_segment,
        ..PsdConfig::default()
    };
    let rec = &data.recorder;
    let start = data.analysis_start;
    let mut streams: Vec<(String, &[f64], &[f64])> = Vec::new();
    for (k, u) in data.summary.units.iter().enumerate() {
        streams.push((format!("unit{}_error", u.id), &rec.error_off[k], &rec.error[k]));
    }
    for m in 0..rec.monitor.len() {
        streams.push((format!("monitor{}", m + 1), &rec.monitor_off[m], &rec.monitor[m]));
    }
    for ((name, report), (_, off, on)) in data.reports.iter().zip(&streams) {
        write_band_csv(report, fs::File::create(metrics.join(format!("bands_{name}.csv")))?).map_err(CliError::sim)?;
        for (tag, x) in [("off", off), ("on", on)] {
            let f = SampleFrame::new(x[start..].to_vec(), cfg.sample_rate).map_err(CliError::sim)?;
            let s = welch_psd(&f, psd).map_err(CliError::sim)?;
            let path = metrics.join(format!("spectrum_{name}_{tag}.csv"));
            write_spectrum_csv(&s, fs::File::create(path)?).map_err(CliError::sim)?;
        }
    }

    if cfg.metrics.write_signals {
        let signals = out.join("signals");
        fs::create_dir_all(&signals)?;
        let mut all: Vec<(String, &[f64])> = Vec::new();
        for (name, off, on) in &streams {
            all.push((format!("{name}_off"), off));
            all.push((format!("{name}_on"), on));
        }
        for (k, u) in data.summary.units.iter().enumerate() {
            all.push((format!("unit{}_output", u.id), &rec.output[k]));
        }
        for (name, x) in all {
            let f = SampleFrame::new(x.to_vec(), cfg.sample_rate).map_err(CliError::sim)?;
            write_wav(&signals.join(format!("{name}.wav")), &f).map_err(CliError::sim)?;
            write_f32_le(&signals.join(format!("{name}.f32")), &f).map_err(CliError::sim)?;
        }
    }

    if data.summary.faulted {
        let faults: Vec<_> = data
            .summary
            .units
            .iter()
            .filter_map(|u| u.fault.as_ref().map(|f| serde_json::json!({"unit": u.id, "fault": f})))
            .collect();
        let mut text = serde_json::to_string_pretty(&faults).map_err(CliError::sim)?;
        text.push('\n');
        write_text(&out.join("fault_report.json"), &text)?;
    }
    Ok(())
}

/// `hush run`: simulate, write artifacts, and report a controller fault as
/// an error after the artifacts are on disk.
pub fn run(cfg: &ScenarioConfig, config_bytes: &[u8], out: &Path) -> Result<RunSummary, CliError> {
    let data = simulate(cfg, config_bytes)?;
    write_artifacts(cfg, config_bytes, &data, out)?;
    if data.summary.faulted {
        let which: Vec<String> = data
            .summary
            .units
            .iter()
            .filter_map(|u| u.fault.as_ref().map(|f| format!("unit {}: {f}", u.id)))
            .collect();
        return Err(CliError::Fault(which.join("; ")));
    }
    Ok(data.summary)
}
