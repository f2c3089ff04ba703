use thiserror::Error;

use crate::dynamics::Diagnostic;
use crate::simulator::SimulationResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("plant structure violated: {}", join_diagnostics(.0))]
    Structure(Vec<Diagnostic>),

    #[error("unsupported orbit: {0}")]
    UnsupportedOrbit(String),

    #[error("improper compensator: {zeros} zeros but only {poles} poles")]
    ImproperCompensator { zeros: usize, poles: usize },

    #[error("unknown sensed output `{0}` (expected theta_s, p or r)")]
    Selector(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The state left the finite range. `partial` holds every sample recorded
    /// before the failing step.
    #[error("state diverged at t = {t} s")]
    Divergence {
        t: f64,
        partial: Box<SimulationResult>,
    },

    #[error("input error: {0}")]
    Input(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for numeric failures, 2 for
    /// usage and configuration problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::Divergence { .. } => 1,
            _ => 2,
        }
    }
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
