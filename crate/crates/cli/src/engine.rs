//! Sample-synchronous simulation of the plant and every unit.
//!
//! Each unit owns a controller and a state machine. Commands are queued per
//! unit and applied only when that unit's controller sits on a frame
//! boundary, so a frame always runs under one parameter set.

use std::collections::VecDeque;

use hush_control::{Command, Effect, InboundCommand, Rejection, TelemetryFrame, UnitState, UnitStateMachine};
use hush_core::adaptive::{
    identification_step, CalibrationResult, ControlError, Controller, Fault, PathIdentifier,
};
use hush_core::metrics::RollingSpl;
use hush_core::plant::Plant;
use hush_core::signal::{FirFilter, SignalGen, SignalSpec};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::scenario::{CalibrationSpec, ScenarioConfig};

/// Something a unit wants published.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitMessage {
    pub unit: String,
    pub ack: bool,
    pub payload: Value,
}

#[derive(Debug, Clone)]
struct Pending {
    command: Command,
    client: u64,
    seq: u64,
}

enum Identification {
    Exact,
    Lms { identifier: PathIdentifier, training: SignalGen },
    Unavailable(String),
}

struct CalibrationRun {
    method: Identification,
    remaining: usize,
    u: f64,
}

pub struct UnitRuntime {
    pub id: String,
    pub machine: UnitStateMachine,
    pub controller: Controller,
    pub reference_source: usize,
    pub calibration_spec: CalibrationSpec,
    pub last_calibration: Option<CalibrationResult>,
    pub last_fault: Option<Fault>,
    calibration: Option<CalibrationRun>,
    calibrations_started: u64,
    pending: VecDeque<Pending>,
    spl_error: RollingSpl,
    spl_off: RollingSpl,
    reductions: VecDeque<f64>,
    running_since: Option<u64>,
}

impl UnitRuntime {
    pub fn is_running(&self) -> bool {
        self.machine.state().is_running()
    }

    /// True when a queued command could be applied right now.
    pub fn at_boundary(&self) -> bool {
        !self.is_running() || self.controller.at_frame_boundary()
    }

    pub fn pending_commands(&self) -> usize {
        self.pending.len()
    }
}

/// Per-tick signals, captured only when a recorder is attached.
#[derive(Debug, Default, Clone)]
pub struct Recorder {
    /// Per unit error microphone, total pressure.
    pub error: Vec<Vec<f64>>,
    /// Per unit error microphone, pressure from the noise sources alone.
    pub error_off: Vec<Vec<f64>>,
    pub output: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub monitor: Vec<Vec<f64>>,
    pub monitor_off: Vec<Vec<f64>>,
}

impl Recorder {
    pub fn new(units: usize, monitors: usize, capacity: usize) -> Self {
        let v = |n| (0..n).map(|_| Vec::with_capacity(capacity)).collect();
        Self {
            error: v(units),
            error_off: v(units),
            output: v(units),
            alpha: v(units),
            monitor: v(monitors),
            monitor_off: v(monitors),
        }
    }
}

pub struct Simulation {
    sample_rate: u32,
    seed: u64,
    plant: Plant,
    units: Vec<UnitRuntime>,
    monitor_spl: Vec<RollingSpl>,
    sources: Vec<f64>,
    drives: Vec<f64>,
    ticks: u64,
    messages: Vec<UnitMessage>,
}

const CONVERGED_SPREAD_DB: f64 = 0.5;

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, CliError> {
        let fs = cfg.sample_rate;
        let plant = Plant::from_spec(&cfg.plant, fs).map_err(CliError::sim)?;
        let window = fs as usize;
        let units = cfg
            .units
            .iter()
            .enumerate()
            .map(|(k, u)| {
                Ok(UnitRuntime {
                    id: cfg.unit_id(k),
                    machine: UnitStateMachine::new(u.controller.clone()),
                    controller: Controller::new(u.controller.clone(), u.mode).map_err(CliError::sim)?,
                    reference_source: u.reference_source,
                    calibration_spec: u.calibration.clone(),
                    last_calibration: None,
                    last_fault: None,
                    calibration: None,
                    calibrations_started: 0,
                    pending: VecDeque::new(),
                    spl_error: RollingSpl::new(fs, window),
                    spl_off: RollingSpl::new(fs, window),
                    reductions: VecDeque::new(),
                    running_since: None,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(Self {
            sample_rate: fs,
            seed: cfg.seed,
            monitor_spl: (0..plant.n_monitors()).map(|_| RollingSpl::new(fs, window)).collect(),
            sources: vec![0.0; plant.n_sources()],
            drives: vec![0.0; units.len()],
            plant,
            units,
            ticks: 0,
            messages: Vec::new(),
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn time_s(&self) -> f64 {
        self.ticks as f64 / self.sample_rate as f64
    }

    pub fn units(&self) -> &[UnitRuntime] {
        &self.units
    }

    pub fn unit(&self, k: usize) -> &UnitRuntime {
        &self.units[k]
    }

    pub fn n_monitors(&self) -> usize {
        self.monitor_spl.len()
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    /// Acks and events produced since the last call.
    pub fn drain_messages(&mut self) -> Vec<UnitMessage> {
        std::mem::take(&mut self.messages)
    }

    fn reject(&mut self, unit: &str, cmd: Value, client: u64, seq: u64, r: Rejection, state: Option<UnitState>) {
        self.messages.push(UnitMessage {
            unit: unit.to_string(),
            ack: true,
            payload: json!({
                "ok": false,
                "error": r.reason(),
                "cmd": cmd,
                "client": client,
                "ref_seq": seq,
                "state": state,
            }),
        });
    }

    /// Queues a network command. Malformed commands and unknown units are
    /// answered immediately.
    pub fn submit(&mut self, c: InboundCommand) {
        let name = c.payload.get("cmd").cloned().unwrap_or(Value::Null);
        let Some(k) = self.unit_index(&c.unit) else {
            return self.reject(&c.unit, name, c.client, c.seq, Rejection::UnknownUnit, None);
        };
        match Command::from_payload(&c.payload) {
            Ok(command) => self.units[k].pending.push_back(Pending {
                command,
                client: c.client,
                seq: c.seq,
            }),
            Err(r) => {
                let state = Some(self.units[k].machine.state());
                let id = self.units[k].id.clone();
                self.reject(&id, name, c.client, c.seq, r, state);
            }
        }
    }

    /// Queues a command issued by the harness itself.
    pub fn submit_local(&mut self, k: usize, command: Command) {
        self.units[k].pending.push_back(Pending {
            command,
            client: 0,
            seq: 0,
        });
    }

    /// Applies queued commands for units sitting on a frame boundary.
    pub fn apply_ready(&mut self) {
        for k in 0..self.units.len() {
            while self.units[k].at_boundary() {
                let Some(p) = self.units[k].pending.pop_front() else {
                    break;
                };
                self.apply(k, p);
            }
        }
    }

    fn apply(&mut self, k: usize, p: Pending) {
        let now = self.ticks;
        let seed = self.seed;
        let truth = self.plant.secondary_response(k, k);
        let u = &mut self.units[k];
        let outcome = u.machine.apply(&p.command);
        if let Ok(effect) = &outcome {
            match effect {
                Effect::None => {}
                Effect::StartCalibration => {
                    u.calibrations_started += 1;
                    u.calibration = Some(start_calibration(&u.calibration_spec, truth, self.sample_rate, seed, k, u.calibrations_started));
                }
                Effect::AbortCalibration => u.calibration = None,
                Effect::Start(mode) => {
                    // Safe: an idle controller is always on a frame boundary.
                    let _ = u.controller.set_mode(*mode);
                    u.running_since = Some(now);
                    u.reductions.clear();
                }
                Effect::Stop => u.running_since = None,
                Effect::SetParams(params) => {
                    if let Err(e) = u.controller.set_params(params.clone()) {
                        log::error!("unit {}: accepted parameters not applied: {e}", u.id);
                    }
                }
                Effect::Reset => {
                    u.controller.clear_fault();
                    u.calibration = None;
                    u.running_since = None;
                }
            }
        }
        let mut payload = json!({
            "ok": outcome.is_ok(),
            "cmd": p.command.name(),
            "client": p.client,
            "ref_seq": p.seq,
            "state": u.machine.state(),
            "calibrated": u.machine.is_calibrated(),
            "params": u.machine.params(),
        });
        if let Err(r) = outcome {
            payload["error"] = json!(r.reason());
        }
        let id = u.id.clone();
        self.messages.push(UnitMessage {
            unit: id,
            ack: true,
            payload,
        });
    }

    fn event(&mut self, k: usize, payload: Value) {
        let unit = self.units[k].id.clone();
        self.messages.push(UnitMessage {
            unit,
            ack: false,
            payload,
        });
    }

    fn finish_calibration(&mut self, k: usize) {
        let truth = self.plant.secondary_response(k, k);
        let u = &mut self.units[k];
        let Some(run) = u.calibration.take() else {
            return;
        };
        let result = match run.method {
            Identification::Lms { identifier, .. } => identifier.finish(),
            Identification::Unavailable(reason) => Err(ControlError::Calibration(reason)),
            Identification::Exact => FirFilter::new(truth).map_err(|e| ControlError::Calibration(e.to_string())).map(|shat| {
                CalibrationResult {
                    shat,
                    misalignment_db: None,
                    training_samples: 0,
                    residual_power: 0.0,
                }
            }),
        };
        let payload = match result {
            Ok(r) if !hush_core::adaptive::secondary_path_gain(r.shat.coeffs()).degenerate => {
                u.controller.set_secondary_path(r.shat.clone());
                u.machine.calibration_finished(true);
                let p = json!({
                    "event": "calibrated",
                    "state": u.machine.state(),
                    "misalignment_db": r.misalignment_db,
                    "training_samples": r.training_samples,
                });
                u.last_calibration = Some(r);
                p
            }
            Ok(_) => {
                u.machine.calibration_finished(false);
                json!({"event": "calibration_failed", "state": u.machine.state(), "reason": "degenerate estimate"})
            }
            Err(e) => {
                u.machine.calibration_finished(false);
                json!({"event": "calibration_failed", "state": u.machine.state(), "reason": e.to_string()})
            }
        };
        self.event(k, payload);
    }

    /// Advances the simulation by one sample.
    pub fn tick(&mut self, mut rec: Option<&mut Recorder>) -> Result<(), CliError> {
        self.apply_ready();
        for k in 0..self.units.len() {
            if self.units[k].calibration.as_ref().is_some_and(|c| c.remaining == 0) {
                self.finish_calibration(k);
            }
        }

        self.sources.copy_from_slice(self.plant.begin_tick());
        for (k, u) in self.units.iter_mut().enumerate() {
            self.drives[k] = match u.machine.state() {
                UnitState::RunningFf | UnitState::RunningFb => {
                    u.controller.output(self.sources[u.reference_source]).map_err(CliError::sim)?;
                    u.controller.drive()
                }
                UnitState::Calibrating => match u.calibration.as_mut() {
                    Some(c) => {
                        c.u = match &mut c.method {
                            Identification::Lms { training, .. } => training.next_sample(),
                            _ => 0.0,
                        };
                        c.u
                    }
                    None => 0.0,
                },
                UnitState::Idle | UnitState::Fault => 0.0,
            };
        }
        let mic = self.plant.finish_tick(&self.drives).map_err(CliError::sim)?;
        let n_units = self.units.len();
        let mut faults = Vec::new();
        for (k, u) in self.units.iter_mut().enumerate() {
            let e = mic.total[k];
            match u.machine.state() {
                UnitState::RunningFf | UnitState::RunningFb => {
                    match u.controller.adapt(e) {
                        Ok(()) => {}
                        Err(ControlError::Faulted(f)) => faults.push((k, f)),
                        Err(other) => return Err(CliError::sim(other)),
                    }
                }
                UnitState::Calibrating => {
                    if let Some(c) = u.calibration.as_mut() {
                        if let Identification::Lms { identifier, .. } = &mut c.method {
                            identifier.push(c.u, e);
                        }
                        c.remaining = c.remaining.saturating_sub(1);
                    }
                }
                _ => {}
            }
            u.spl_error.push(e);
            // The simulator knows the uncontrolled pressure exactly; the
            // controller's own estimate also contains the other units' output.
            u.spl_off.push(mic.disturbance[k]);
            if let Some(r) = rec.as_deref_mut() {
                r.error[k].push(e);
                r.error_off[k].push(mic.disturbance[k]);
                r.output[k].push(if u.is_running() { u.controller.last_output() } else { 0.0 });
                r.alpha[k].push(if u.is_running() { u.controller.alpha() } else { 0.0 });
            }
        }
        for (m, spl) in self.monitor_spl.iter_mut().enumerate() {
            spl.push(mic.total[n_units + m]);
        }
        if let Some(r) = rec {
            for m in 0..self.monitor_spl.len() {
                r.monitor[m].push(mic.total[n_units + m]);
                r.monitor_off[m].push(mic.disturbance[n_units + m]);
            }
        }
        for (k, f) in faults {
            let u = &mut self.units[k];
            u.machine.fault();
            u.controller.clear_fault();
            u.running_since = None;
            u.last_fault = Some(f.clone());
            let payload = json!({"event": "fault", "state": u.machine.state(), "reason": f.to_string()});
            self.event(k, payload);
        }
        self.ticks += 1;
        Ok(())
    }

    pub fn run_ticks(&mut self, n: usize, mut rec: Option<&mut Recorder>) -> Result<(), CliError> {
        for _ in 0..n {
            self.tick(rec.as_deref_mut())?;
        }
        Ok(())
    }

    /// Snapshot of one unit for publication. Also feeds the convergence
    /// detector, so call it once per telemetry period.
    pub fn telemetry(&mut self, k: usize) -> TelemetryFrame {
        let t = self.time_s();
        let ticks = self.ticks;
        let fs = self.sample_rate as u64;
        let monitors: Vec<f64> = self.monitor_spl.iter().map(|s| s.level().db).collect();
        let u = &mut self.units[k];
        let running = u.is_running();
        let snap = u.controller.snapshot();
        let e_db = u.spl_error.level().db;
        let reduction = if running { u.spl_off.level().db - e_db } else { 0.0 };
        u.reductions.push_back(reduction);
        while u.reductions.len() > 10 {
            u.reductions.pop_front();
        }
        let settled = u.running_since.is_some_and(|s| ticks.saturating_sub(s) >= 2 * fs);
        let spread = u.reductions.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - u.reductions.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        TelemetryFrame {
            t,
            mode: u.machine.state(),
            alpha: if running { snap.alpha } else { 0.0 },
            output_power: if running { snap.output_power } else { 0.0 },
            spl_error_dbc: e_db,
            spl_monitor_dbc: monitors,
            reduction_db: reduction,
            converged: running && settled && u.reductions.len() == 10 && spread < CONVERGED_SPREAD_DB,
            dropped: 0,
        }
    }
}

fn start_calibration(
    spec: &CalibrationSpec,
    truth: Vec<f64>,
    fs: u32,
    seed: u64,
    unit: usize,
    attempt: u64,
) -> CalibrationRun {
    match *spec {
        CalibrationSpec::Exact => CalibrationRun {
            method: Identification::Exact,
            remaining: 0,
            u: 0.0,
        },
        CalibrationSpec::Identify {
            model_order,
            duration_s,
            training_amplitude,
            step_factor,
        } => {
            let power = training_amplitude * training_amplitude / 3.0;
            let mu = identification_step(step_factor, model_order, power);
            let training_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(1 + unit as u64)
                .wrapping_add(attempt << 32);
            let method = match (
                PathIdentifier::new(model_order, mu, Some(truth)),
                SignalGen::new(SignalSpec::white_noise(training_amplitude, training_seed), fs),
            ) {
                (Ok(identifier), Ok(training)) => Identification::Lms { identifier, training },
                (Err(e), _) => Identification::Unavailable(e.to_string()),
                (_, Err(e)) => Identification::Unavailable(e.to_string()),
            };
            CalibrationRun {
                method,
                remaining: (duration_s * fs as f64).round().max(1.0) as usize,
                u: 0.0,
            }
        }
    }
}
