use std::path::Path;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub pass: bool,
    /// Distance to the threshold; nonnegative exactly when the check passes
    /// (NaN when the quantity could not be computed).
    pub margin: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `margin >= 0`.
    pub fn from_margin(id: impl Into<String>, margin: f64, detail: impl Into<String>) -> Self {
        Self { id: id.into(), pass: margin >= 0.0, margin, detail: detail.into() }
    }

    pub fn flag(id: impl Into<String>, pass: bool, margin: f64, detail: impl Into<String>) -> Self {
        Self { id: id.into(), pass, margin, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
}

impl From<&lamelab::Error> for Failure {
    fn from(e: &lamelab::Error) -> Self {
        let kind = match e {
            lamelab::Error::InvalidArgument(_) => "invalid_argument",
            lamelab::Error::GridMismatch(_) => "grid_mismatch",
            lamelab::Error::NumericOverflow(_) => "numeric_overflow",
            lamelab::Error::SolverFailure(_) => "solver_failure",
            lamelab::Error::IntegrationFailure { .. } => "integration_failure",
            lamelab::Error::NoConvergence { .. } => "no_convergence",
            lamelab::Error::InvariantViolation(_) => "invariant_violation",
            lamelab::Error::Io(_) => "io",
            lamelab::Error::Format(_) => "format",
        };
        Self { kind: kind.to_string(), message: e.to_string() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Error => 3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub checks_enabled: bool,
    pub config: serde_json::Value,
    pub wall_time_s: f64,
    pub status: Status,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub failure: Option<Failure>,
}

impl Manifest {
    pub fn status_of(checks: &[Check], failure: Option<&Failure>) -> Status {
        if failure.is_some() {
            Status::Error
        } else if checks.iter().all(|c| c.pass) {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")
    }
}
