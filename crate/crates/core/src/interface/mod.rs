//! Persistence formats, the wire protocol and the operator session that the
//! network service and the CLI drive.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod files;
pub mod session;
pub mod wire;

pub use files::{
    read_pose_trace, read_trajectory, write_pose_trace, write_trajectory, FileHeader, PoseRecord,
    POSE_FORMAT, TRAJECTORY_FORMAT,
};
pub use session::{
    ClientId, Mode, Outbound, Recipient, Session, SessionFile, SessionState, SESSION_FORMAT,
};
pub use wire::{Command, Envelope, ErrorCode, ExperimentKind, Telemetry, TipFrame, WireMessage};

/// Major version every loader in this crate understands.
pub const FORMAT_MAJOR: u32 = 1;
/// Version written into every file and message.
pub const FORMAT_VERSION: &str = "1.0";

/// Accepts `major.minor` strings whose major matches [`FORMAT_MAJOR`].
pub fn check_version(version: &str) -> Result<()> {
    let major = version
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok());
    match major {
        Some(FORMAT_MAJOR) => Ok(()),
        _ => Err(Error::Version {
            found: version.to_string(),
            expected: FORMAT_MAJOR,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    /// Telemetry frames per second, decimated from the tick rate.
    pub telemetry_rate: f64,
    /// Where the service persists clock and library; none disables it.
    pub state_file: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            telemetry_rate: 30.0,
            state_file: None,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.telemetry_rate > 0.0 && self.telemetry_rate.is_finite()) {
            return Err(Error::domain("telemetry rate must be positive"));
        }
        Ok(())
    }
}
