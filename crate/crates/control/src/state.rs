use hush_core::adaptive::{ControllerParams, Mode};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnitState {
    Idle,
    Calibrating,
    #[serde(rename = "RunningFF")]
    RunningFf,
    #[serde(rename = "RunningFB")]
    RunningFb,
    Fault,
}

impl UnitState {
    pub fn is_running(self) -> bool {
        matches!(self, UnitState::RunningFf | UnitState::RunningFb)
    }

    pub fn running_mode(self) -> Option<Mode> {
        match self {
            UnitState::RunningFf => Some(Mode::Feedforward),
            UnitState::RunningFb => Some(Mode::Feedback),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeRequest {
    Idle,
    Feedforward,
    Feedback,
}

fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<f64>>, D::Error> {
    Option::<f64>::deserialize(d).map(Some)
}

/// Partial parameter update. `rho: null` removes the constraint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub rho: Option<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_len: Option<usize>,
}

impl ParamUpdate {
    pub fn apply_to(&self, p: &ControllerParams) -> ControllerParams {
        let mut n = p.clone();
        if let Some(mu) = self.mu {
            n.mu = mu;
        }
        if let Some(rho) = self.rho {
            n.rho = rho;
        }
        if let Some(l) = self.filter_len {
            n.filter_len = l;
        }
        if let Some(m) = self.frame_len {
            n.frame_len = m;
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    SetMode { mode: ModeRequest },
    SetParam { params: ParamUpdate },
    Calibrate,
    Reset,
    GetState,
}

impl Command {
    pub const NAMES: [&'static str; 5] = ["set_mode", "set_param", "calibrate", "reset", "get_state"];

    pub fn name(&self) -> &'static str {
        match self {
            Command::SetMode { .. } => "set_mode",
            Command::SetParam { .. } => "set_param",
            Command::Calibrate => "calibrate",
            Command::Reset => "reset",
            Command::GetState => "get_state",
        }
    }

    /// Parses a command payload, distinguishing unknown commands from
    /// malformed ones.
    pub fn from_payload(v: &Value) -> Result<Self, Rejection> {
        let name = v.get("cmd").and_then(Value::as_str).ok_or(Rejection::BadPayload)?;
        if !Self::NAMES.contains(&name) {
            return Err(Rejection::UnknownCmd);
        }
        serde_json::from_value(v.clone()).map_err(|_| Rejection::BadPayload)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    NotCalibrated,
    IllegalTransition,
    InvalidParam,
    UnknownCmd,
    BadPayload,
    Busy,
    UnknownUnit,
}

impl Rejection {
    pub fn reason(self) -> &'static str {
        match self {
            Rejection::NotCalibrated => "not-calibrated",
            Rejection::IllegalTransition => "illegal-transition",
            Rejection::InvalidParam => "invalid-param",
            Rejection::UnknownCmd => "unknown-cmd",
            Rejection::BadPayload => "bad-payload",
            Rejection::Busy => "busy",
            Rejection::UnknownUnit => "unknown-unit",
        }
    }
}

/// What the DSP loop must do after an accepted command.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    None,
    StartCalibration,
    AbortCalibration,
    Start(Mode),
    Stop,
    SetParams(ControllerParams),
    /// Back to Idle with the adaptive filter cleared.
    Reset,
}

/// Per-unit device state machine.
///
/// Legal transitions: Idle to Calibrating; Calibrating to Idle or Fault;
/// Idle to RunningFF/RunningFB once calibrated; Running to Idle; any state
/// to Fault; Fault back to Idle only through `reset`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitStateMachine {
    state: UnitState,
    calibrated: bool,
    params: ControllerParams,
}

impl UnitStateMachine {
    pub fn new(params: ControllerParams) -> Self {
        Self {
            state: UnitState::Idle,
            calibrated: false,
            params,
        }
    }

    /// Starts already holding a secondary-path estimate.
    pub fn calibrated(params: ControllerParams) -> Self {
        Self {
            calibrated: true,
            ..Self::new(params)
        }
    }

    pub fn state(&self) -> UnitState {
        self.state
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn apply(&mut self, cmd: &Command) -> Result<Effect, Rejection> {
        use UnitState::*;
        match (cmd, self.state) {
            (Command::GetState, _) => Ok(Effect::None),
            (Command::Calibrate, Idle) => {
                self.state = Calibrating;
                Ok(Effect::StartCalibration)
            }
            (Command::Calibrate, _) => Err(Rejection::IllegalTransition),
            (Command::SetMode { mode }, state) => match (mode, state) {
                (ModeRequest::Idle, RunningFf | RunningFb) => {
                    self.state = Idle;
                    Ok(Effect::Stop)
                }
                (ModeRequest::Idle, Idle) => Ok(Effect::None),
                (ModeRequest::Feedforward | ModeRequest::Feedback, Idle) => {
                    if !self.calibrated {
                        return Err(Rejection::NotCalibrated);
                    }
                    let (next, m) = match mode {
                        ModeRequest::Feedforward => (RunningFf, Mode::Feedforward),
                        _ => (RunningFb, Mode::Feedback),
                    };
                    self.state = next;
                    Ok(Effect::Start(m))
                }
                (ModeRequest::Feedforward, RunningFf) | (ModeRequest::Feedback, RunningFb) => {
                    Ok(Effect::None)
                }
                _ => Err(Rejection::IllegalTransition),
            },
            (Command::SetParam { .. }, Calibrating) => Err(Rejection::Busy),
            (Command::SetParam { params }, _) => {
                let next = params.apply_to(&self.params);
                next.validate().map_err(|_| Rejection::InvalidParam)?;
                self.params = next.clone();
                Ok(Effect::SetParams(next))
            }
            (Command::Reset, Calibrating) => {
                self.state = Idle;
                Ok(Effect::AbortCalibration)
            }
            (Command::Reset, _) => {
                self.state = Idle;
                Ok(Effect::Reset)
            }
        }
    }

    /// Outcome of a calibration started by `calibrate`.
    pub fn calibration_finished(&mut self, ok: bool) {
        if self.state != UnitState::Calibrating {
            return;
        }
        if ok {
            self.calibrated = true;
            self.state = UnitState::Idle;
        } else {
            self.calibrated = false;
            self.state = UnitState::Fault;
        }
    }

    pub fn fault(&mut self) {
        self.state = UnitState::Fault;
    }
}
