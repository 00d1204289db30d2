use serde::{Deserialize, Serialize};

use super::penalty::penalty_factor_from_energy;
use super::update::{fxlms_update, mov_fxlms_update};
use super::{secondary_path_gain, ControlError, Fault, SecondaryPathGain};
use crate::signal::{dot, FirFilter, SampleFrame, TapLine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Reference taken from a dedicated reference signal.
    Feedforward,
    /// Reference synthesized from the error signal through the internal model.
    Feedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Fxlms,
    MovFxlms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// `mu / (eps + L * P)`, with `P` the mean filtered-reference power of
    /// the previous frame (never below half the current window energy).
    /// The divisor is held for a frame: a per-sample window energy ripples
    /// at twice a tonal frequency and biases the constrained fixed point.
    Normalized,
    /// `mu` as given.
    Literal,
}

fn default_algorithm() -> Algorithm {
    Algorithm::MovFxlms
}
fn default_filter_len() -> usize {
    128
}
fn default_frame_len() -> usize {
    64
}
fn default_step() -> StepMode {
    StepMode::Normalized
}
fn default_regularization() -> f64 {
    1e-6
}
fn default_trip_ratio() -> f64 {
    10.0
}

/// Tunable controller parameters. `rho: None` means unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerParams {
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    pub mu: f64,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_filter_len")]
    pub filter_len: usize,
    #[serde(default = "default_frame_len")]
    pub frame_len: usize,
    #[serde(default = "default_step")]
    pub step: StepMode,
    #[serde(default = "default_regularization")]
    pub regularization: f64,
    #[serde(default = "default_trip_ratio")]
    pub trip_ratio: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            algorithm: default_algorithm(),
            mu: 0.01,
            rho: None,
            filter_len: default_filter_len(),
            frame_len: default_frame_len(),
            step: default_step(),
            regularization: default_regularization(),
            trip_ratio: default_trip_ratio(),
        }
    }
}

impl ControllerParams {
    pub fn rho_limit(&self) -> f64 {
        self.rho.unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::Config(m.to_string()));
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return bad("mu must be finite and non-negative");
        }
        if let Some(r) = self.rho {
            if !(r > 0.0) {
                return bad("rho must be positive");
            }
        }
        if self.filter_len == 0 {
            return bad("filter_len must be at least 1");
        }
        if self.frame_len == 0 {
            return bad("frame_len must be at least 1");
        }
        if !(self.regularization >= 0.0) {
            return bad("regularization must be non-negative");
        }
        if !(self.trip_ratio > 1.0) {
            return bad("trip_ratio must exceed 1");
        }
        Ok(())
    }

    /// Stable digest of the parameters, used to check that a frame was
    /// processed under a single parameter set.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.algorithm.hash(&mut h);
        self.mu.to_bits().hash(&mut h);
        self.rho.map(f64::to_bits).hash(&mut h);
        self.filter_len.hash(&mut h);
        self.frame_len.hash(&mut h);
        self.step.hash(&mut h);
        self.regularization.to_bits().hash(&mut h);
        self.trip_ratio.to_bits().hash(&mut h);
        h.finish()
    }
}

/// Read-only view of the controller after a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerSnapshot {
    pub mode: Mode,
    pub alpha: f64,
    /// Mean of y^2 over the last completed frame.
    pub output_power: f64,
    pub gs: f64,
    pub weight_norm: f64,
    pub faulted: bool,
}

// Smoothing constants for the divergence trip-wire, in frames.
const ERROR_EMA_FRAMES: f64 = 16.0;
const OFF_EMA_FRAMES: f64 = 128.0;
const TRIP_POWER_FLOOR: f64 = 1e-9;
const TRIP_WARMUP_FRAMES: u64 = 4;
/// Outputs beyond this magnitude mute the controller on the spot.
pub const OUTPUT_LIMIT: f64 = 1e6;

/// One noise-control unit: FxLMS in feedforward or internal-model feedback
/// form, optionally with the time-varying output-power penalty.
///
/// The controller is sample-synchronous. For every sample call
/// [`output`](Self::output) to obtain `y(n)`, send [`drive`](Self::drive)
/// to the actuator, then feed the measured error to [`adapt`](Self::adapt).
/// The actuator is driven with inverted polarity, so the error microphone
/// observes `e = d - s*y`.
#[derive(Debug, Clone)]
pub struct Controller {
    params: ControllerParams,
    mode: Mode,
    w: Vec<f64>,
    shat: Option<FirFilter>,
    // x' = shat * x
    shat_x: FirFilter,
    // shat * y, for the disturbance estimate
    shat_y: FirFilter,
    gs: SecondaryPathGain,
    x_hist: TapLine,
    xf_hist: TapLine,
    y: f64,
    dhat: f64,
    alpha: f64,
    frame_pos: usize,
    frames: u64,
    dhat_energy: f64,
    e_energy: f64,
    y_energy: f64,
    xf_energy: f64,
    // L * mean |x'|^2 over the last complete frame
    step_norm: Option<f64>,
    output_power: f64,
    ema_error: f64,
    ema_off: f64,
    adapting: bool,
    // samples since the tap lines were cleared
    filled: usize,
    overflow: bool,
    fault: Option<Fault>,
}

impl Controller {
    pub fn new(params: ControllerParams, mode: Mode) -> Result<Self, ControlError> {
        params.validate()?;
        let l = params.filter_len;
        Ok(Self {
            params,
            mode,
            w: vec![0.0; l],
            shat: None,
            shat_x: FirFilter::zeros(1),
            shat_y: FirFilter::zeros(1),
            gs: SecondaryPathGain {
                value: 0.0,
                degenerate: true,
            },
            x_hist: TapLine::new(l),
            xf_hist: TapLine::new(l),
            y: 0.0,
            dhat: 0.0,
            alpha: 0.0,
            frame_pos: 0,
            frames: 0,
            xf_energy: 0.0,
            step_norm: None,
            dhat_energy: 0.0,
            e_energy: 0.0,
            y_energy: 0.0,
            output_power: 0.0,
            ema_error: 0.0,
            ema_off: 0.0,
            adapting: true,
            filled: 0,
            overflow: false,
            fault: None,
        })
    }

    pub fn with_secondary_path(
        params: ControllerParams,
        mode: Mode,
        shat: FirFilter,
    ) -> Result<Self, ControlError> {
        let mut c = Self::new(params, mode)?;
        c.set_secondary_path(shat);
        Ok(c)
    }

    /// Installs a secondary-path estimate and clears the signal histories.
    pub fn set_secondary_path(&mut self, shat: FirFilter) {
        self.gs = secondary_path_gain(shat.coeffs());
        let mut clean = shat;
        clean.reset();
        self.shat_x = clean.clone();
        self.shat_y = clean.clone();
        self.shat = Some(clean);
        self.reset_signals();
    }

    pub fn secondary_path(&self) -> Option<&FirFilter> {
        self.shat.as_ref()
    }

    pub fn is_calibrated(&self) -> bool {
        self.shat.is_some()
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gs(&self) -> SecondaryPathGain {
        self.gs
    }

    pub fn fault(&self) -> Option<&Fault> {
        self.fault.as_ref()
    }

    /// Most recent disturbance estimate `dhat(n) = e(n) + (shat*y)(n)`.
    pub fn disturbance_estimate(&self) -> f64 {
        self.dhat
    }

    /// Most recent control output `y(n)`.
    pub fn last_output(&self) -> f64 {
        self.y
    }

    /// Actuator signal for the most recent output.
    pub fn drive(&self) -> f64 {
        -self.y
    }

    pub fn at_frame_boundary(&self) -> bool {
        self.frame_pos == 0
    }

    /// Enables or freezes adaptation; a frozen controller still filters.
    pub fn set_adaptation(&mut self, on: bool) {
        self.adapting = on;
    }

    pub fn snapshot(&self) -> ControllerSnapshot {
        ControllerSnapshot {
            mode: self.mode,
            alpha: self.alpha,
            output_power: self.output_power,
            gs: self.gs.value,
            weight_norm: self.w.iter().map(|v| v * v).sum::<f64>().sqrt(),
            faulted: self.fault.is_some(),
        }
    }

    /// Applies new parameters. Only legal between frames.
    pub fn set_params(&mut self, params: ControllerParams) -> Result<(), ControlError> {
        if !self.at_frame_boundary() {
            return Err(ControlError::MidFrame);
        }
        params.validate()?;
        if params.filter_len != self.params.filter_len {
            self.w.resize(params.filter_len, 0.0);
            let keep = |old: &TapLine| {
                let mut t = TapLine::new(params.filter_len);
                for &v in old.window().iter().take(params.filter_len).rev() {
                    t.push(v);
                }
                t
            };
            self.x_hist = keep(&self.x_hist);
            self.xf_hist = keep(&self.xf_hist);
            let scale = params.filter_len as f64 / self.params.filter_len as f64;
            self.step_norm = self.step_norm.map(|n| n * scale);
        }
        if params.frame_len != self.params.frame_len {
            self.clear_frame_accumulators();
        }
        self.params = params;
        if self.params.algorithm == Algorithm::Fxlms {
            self.alpha = 0.0;
        }
        Ok(())
    }

    /// Switches between feedforward and feedback; weights restart from zero.
    pub fn set_mode(&mut self, mode: Mode) -> Result<(), ControlError> {
        if !self.at_frame_boundary() {
            return Err(ControlError::MidFrame);
        }
        self.mode = mode;
        self.reset_weights();
        Ok(())
    }

    pub fn reset_weights(&mut self) {
        self.w.iter_mut().for_each(|v| *v = 0.0);
        self.reset_signals();
    }

    /// Clears a fault, zeroing weights. The secondary-path estimate is kept.
    pub fn clear_fault(&mut self) {
        self.fault = None;
        self.reset_weights();
    }

    fn reset_signals(&mut self) {
        self.x_hist.clear();
        self.xf_hist.clear();
        self.shat_x.reset();
        self.shat_y.reset();
        self.y = 0.0;
        self.dhat = 0.0;
        self.alpha = 0.0;
        self.output_power = 0.0;
        self.ema_error = 0.0;
        self.ema_off = 0.0;
        self.frames = 0;
        self.filled = 0;
        self.overflow = false;
        self.step_norm = None;
        self.clear_frame_accumulators();
    }

    fn clear_frame_accumulators(&mut self) {
        self.frame_pos = 0;
        self.dhat_energy = 0.0;
        self.e_energy = 0.0;
        self.y_energy = 0.0;
        self.xf_energy = 0.0;
    }

    /// Computes `y(n)`. In feedforward mode `reference` is `x(n)`; in feedback
    /// mode it is ignored and the latest disturbance estimate is used.
    #[inline]
    pub fn output(&mut self, reference: f64) -> Result<f64, ControlError> {
        if self.shat.is_none() {
            return Err(ControlError::NotCalibrated);
        }
        let x = match self.mode {
            Mode::Feedforward => reference,
            Mode::Feedback => self.dhat,
        };
        self.x_hist.push(x);
        let xf = self.shat_x.push(x);
        self.xf_hist.push(xf);
        self.xf_energy += xf * xf;
        self.filled = self.filled.saturating_add(1);
        self.y = if self.fault.is_some() {
            0.0
        } else {
            dot(&self.w, self.x_hist.window())
        };
        if !(self.y.abs() <= OUTPUT_LIMIT) {
            self.overflow = true;
            self.y = 0.0;
        }
        Ok(self.y)
    }

    /// Consumes the error sample observed after the latest output and adapts.
    ///
    /// Returns an error on the sample where the controller trips into the
    /// fault state; afterwards it stays muted and frozen until cleared.
    #[inline]
    pub fn adapt(&mut self, e: f64) -> Result<(), ControlError> {
        self.dhat = e + self.shat_y.push(self.y);
        self.dhat_energy += self.dhat * self.dhat;
        self.e_energy += e * e;
        self.y_energy += self.y * self.y;

        // A normalized step over a half-empty tap line is huge, so wait for
        // the filtered reference to fill once.
        let warm = self.params.step == StepMode::Literal || self.filled >= self.params.filter_len;
        let mut tripped = std::mem::take(&mut self.overflow).then_some(Fault::OutputOverflow);
        if self.adapting && warm && self.fault.is_none() && tripped.is_none() {
            let mu = match self.params.step {
                StepMode::Literal => self.params.mu,
                StepMode::Normalized => {
                    let window = self.xf_hist.energy();
                    let norm = self.step_norm.map_or(window, |n| n.max(0.5 * window));
                    self.params.mu / (self.params.regularization + norm)
                }
            };
            match self.params.algorithm {
                Algorithm::Fxlms => fxlms_update(&mut self.w, mu, e, self.xf_hist.window()),
                Algorithm::MovFxlms => mov_fxlms_update(
                    &mut self.w,
                    mu,
                    e,
                    self.xf_hist.window(),
                    self.alpha,
                    self.y,
                    self.x_hist.window(),
                ),
            }
            if !self.w.iter().all(|v| v.is_finite()) {
                tripped = Some(Fault::NonFiniteWeights);
            }
        }

        self.frame_pos += 1;
        if self.frame_pos == self.params.frame_len {
            if let Some(f) = self.end_frame()? {
                tripped.get_or_insert(f);
            }
        }
        if let Some(f) = tripped {
            if self.fault.is_none() {
                self.fault = Some(f.clone());
                self.y = 0.0;
                return Err(ControlError::Faulted(f));
            }
        }
        Ok(())
    }

    fn end_frame(&mut self) -> Result<Option<Fault>, ControlError> {
        let m = self.params.frame_len as f64;
        self.output_power = self.y_energy / m;
        self.step_norm = Some(self.params.filter_len as f64 * self.xf_energy / m);
        self.alpha = match self.params.algorithm {
            Algorithm::Fxlms => 0.0,
            Algorithm::MovFxlms => penalty_factor_from_energy(
                self.dhat_energy,
                self.params.frame_len,
                self.gs.value,
                self.params.rho_limit(),
            )?,
        };
        let e_pow = self.e_energy / m;
        let off_pow = self.dhat_energy / m;
        if self.frames == 0 {
            self.ema_error = e_pow;
            self.ema_off = off_pow;
        } else {
            self.ema_error += (e_pow - self.ema_error) / ERROR_EMA_FRAMES;
            self.ema_off += (off_pow - self.ema_off) / OFF_EMA_FRAMES;
        }
        self.frames += 1;
        self.clear_frame_accumulators();

        let diverged = self.frames > TRIP_WARMUP_FRAMES
            && self.ema_error > self.params.trip_ratio * self.ema_off.max(TRIP_POWER_FLOOR);
        if diverged && self.fault.is_none() && self.adapting {
            return Ok(Some(Fault::Diverged {
                error_power: self.ema_error,
                off_power: self.ema_off,
            }));
        }
        Ok(None)
    }

    /// Runs one feedforward frame. `plant` receives the actuator drive for each
    /// sample and returns the error-microphone sample it produces.
    pub fn fxlms_step<P>(&mut self, x_frame: &SampleFrame, plant: P) -> Result<SampleFrame, ControlError>
    where
        P: FnMut(f64) -> f64,
    {
        if self.mode != Mode::Feedforward {
            return Err(ControlError::ModeMismatch {
                expected: Mode::Feedforward,
                actual: self.mode,
            });
        }
        self.run_frame(x_frame.samples(), x_frame.sample_rate(), plant)
    }

    /// Runs one internal-model feedback frame of `frame_len` samples.
    pub fn feedback_fxlms_step<P>(
        &mut self,
        frame_len: usize,
        sample_rate: u32,
        plant: P,
    ) -> Result<SampleFrame, ControlError>
    where
        P: FnMut(f64) -> f64,
    {
        if self.mode != Mode::Feedback {
            return Err(ControlError::ModeMismatch {
                expected: Mode::Feedback,
                actual: self.mode,
            });
        }
        self.run_frame(&vec![0.0; frame_len], sample_rate, plant)
    }

    fn run_frame<P>(&mut self, x: &[f64], rate: u32, mut plant: P) -> Result<SampleFrame, ControlError>
    where
        P: FnMut(f64) -> f64,
    {
        if let Some(f) = &self.fault {
            return Err(ControlError::Faulted(f.clone()));
        }
        let mut ys = Vec::with_capacity(x.len());
        for &xn in x {
            let y = self.output(xn)?;
            let e = plant(self.drive());
            self.adapt(e)?;
            ys.push(y);
        }
        SampleFrame::new(ys, rate).map_err(|e| ControlError::Config(e.to_string()))
    }
}
