use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const INVALID_SCENARIO: i32 = 2;
    pub const CONTROLLER_FAULT: i32 = 3;
    pub const PORT_IN_USE: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// One diagnostic per violation, each prefixed with a JSON pointer.
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    InvalidScenario(Vec<String>),
    #[error("controller fault: {0}")]
    Fault(String),
    #[error("address in use: {0}")]
    PortInUse(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidScenario(_) => exit::INVALID_SCENARIO,
            CliError::Fault(_) => exit::CONTROLLER_FAULT,
            CliError::PortInUse(_) => exit::PORT_IN_USE,
            CliError::Simulation(_) | CliError::Io(_) => exit::FAILURE,
        }
    }

    pub(crate) fn sim(e: impl std::fmt::Display) -> Self {
        CliError::Simulation(e.to_string())
    }
}
