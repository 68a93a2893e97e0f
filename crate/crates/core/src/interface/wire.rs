//! Session wire protocol: versioned JSON text messages over a WebSocket.
//!
//! Every message is one object with a `v` version string and a `type` tag.
//! Clients send `command`; the service answers each with exactly one `ack`
//! or `error` carrying the same id, and broadcasts `telemetry`.

use nalgebra::Isometry3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{ChannelId, HandPose, CHANNEL_COUNT, KAPANDJI_TARGETS};

use super::{check_version, FORMAT_VERSION};

/// Position (m) and unit quaternion `[w, x, y, z]` in the palm frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TipFrame {
    pub position: [f64; 3],
    pub rotation: [f64; 4],
}

impl TipFrame {
    pub fn of(iso: &Isometry3<f64>) -> Self {
        let p = iso.translation.vector;
        let q = iso.rotation.quaternion();
        Self {
            position: [p.x, p.y, p.z],
            rotation: [q.w, q.i, q.j, q.k],
        }
    }

    /// index, middle, ring, little, thumb
    pub fn of_pose(pose: &HandPose) -> [Self; 5] {
        [
            Self::of(&pose.fingertips[0]),
            Self::of(&pose.fingertips[1]),
            Self::of(&pose.fingertips[2]),
            Self::of(&pose.fingertips[3]),
            Self::of(&pose.thumb_tip),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Finger,
    Bellow,
    Kapandji,
    Pullout,
    Library,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    ClaimOperator,
    ReleaseOperator,
    /// kg
    SetSetpoint {
        channel: ChannelId,
        mass: f64,
    },
    StartRecord {
        name: String,
    },
    StopRecord,
    Replay {
        name: String,
        scale: f64,
    },
    StopReplay,
    Recalibrate {
        channel: ChannelId,
    },
    RunExperiment {
        experiment: ExperimentKind,
    },
}

impl Command {
    /// Commands any connected client may send.
    pub fn is_observer_safe(&self) -> bool {
        matches!(self, Command::ClaimOperator | Command::ReleaseOperator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Another client holds the operator role.
    RoleConflict,
    /// The command needs the operator role.
    NotOperator,
    Malformed,
    UnsupportedVersion,
    Busy,
    UnknownEntry,
    Rejected,
}

impl ErrorCode {
    pub fn of(e: &Error) -> Self {
        match e {
            Error::ChannelBusy(_) => ErrorCode::Busy,
            Error::UnknownEntry(_) => ErrorCode::UnknownEntry,
            Error::Version { .. } => ErrorCode::UnsupportedVersion,
            Error::Channel { source, .. } => ErrorCode::of(source),
            _ => ErrorCode::Rejected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Telemetry {
    pub tick: u64,
    /// s
    pub t: f64,
    pub mode: super::Mode,
    pub clients: usize,
    pub operator: Option<u64>,
    /// kg
    pub masses: [f64; CHANNEL_COUNT],
    /// kg
    pub setpoints: [f64; CHANNEL_COUNT],
    /// gauge, Pa
    pub pressures: [f64; CHANNEL_COUNT],
    /// rad
    pub joints: [f64; CHANNEL_COUNT],
    /// index, middle, ring, little, thumb
    pub tips: [TipFrame; 5],
    /// m
    pub kapandji_targets: [[f64; 3]; KAPANDJI_TARGETS],
    /// Thumb tip within the contact tolerance of each target.
    pub kapandji_reached: [bool; KAPANDJI_TARGETS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireMessage {
    /// Sent once after connecting.
    Welcome {
        client: u64,
    },
    Telemetry(Box<Telemetry>),
    Command {
        id: u64,
        command: Command,
    },
    Ack {
        id: u64,
        detail: Option<String>,
    },
    Error {
        id: Option<u64>,
        code: ErrorCode,
        detail: String,
    },
}

/// A message with its protocol version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: String,
    #[serde(flatten)]
    pub message: WireMessage,
}

impl Envelope {
    pub fn new(message: WireMessage) -> Self {
        Self {
            v: FORMAT_VERSION.into(),
            message,
        }
    }

    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }

    /// Parses one message. On failure the error reply keeps the command id
    /// when it could be read.
    pub fn decode(text: &str) -> std::result::Result<Self, WireMessage> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| malformed(None, e.to_string()))?;
        let id = value.get("id").and_then(|v| v.as_u64());
        let v = value
            .get("v")
            .and_then(|v| v.as_str())
            .ok_or_else(|| malformed(id, "missing `v`".into()))?;
        check_version(v).map_err(|e| WireMessage::Error {
            id,
            code: ErrorCode::UnsupportedVersion,
            detail: e.to_string(),
        })?;
        serde_json::from_value(value).map_err(|e| malformed(id, e.to_string()))
    }
}

fn malformed(id: Option<u64>, detail: String) -> WireMessage {
    WireMessage::Error {
        id,
        code: ErrorCode::Malformed,
        detail,
    }
}

/// Builds the text of a command message.
pub fn command_text(id: u64, command: Command) -> String {
    Envelope::new(WireMessage::Command { id, command }).encode()
}

impl From<WireMessage> for Envelope {
    fn from(m: WireMessage) -> Self {
        Envelope::new(m)
    }
}

pub(crate) fn reply_for(id: u64, result: Result<Option<String>>) -> WireMessage {
    match result {
        Ok(detail) => WireMessage::Ack { id, detail },
        Err(e) => WireMessage::Error {
            id: Some(id),
            code: ErrorCode::of(&e),
            detail: e.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_round_trip() {
        let text = command_text(
            4,
            Command::SetSetpoint {
                channel: ChannelId::PalmBellow,
                mass: 1.5e-4,
            },
        );
        assert_eq!(
            text,
            r#"{"v":"1.0","type":"command","id":4,"command":{"op":"set_setpoint","channel":"palm_bellow","mass":0.00015}}"#
        );
        let env = Envelope::decode(&text).unwrap();
        assert!(matches!(env.message, WireMessage::Command { id: 4, .. }));
    }

    #[test]
    fn malformed_keeps_id() {
        let e = Envelope::decode(r#"{"v":"1.0","type":"command","id":9,"command":{"op":"fly"}}"#)
            .unwrap_err();
        assert!(matches!(
            e,
            WireMessage::Error {
                id: Some(9),
                code: ErrorCode::Malformed,
                ..
            }
        ));
        let e = Envelope::decode("not json").unwrap_err();
        assert!(matches!(e, WireMessage::Error { id: None, .. }));
        let e = Envelope::decode(
            r#"{"v":"3.0","type":"command","id":1,"command":{"op":"stop_record"}}"#,
        )
        .unwrap_err();
        assert!(matches!(
            e,
            WireMessage::Error {
                code: ErrorCode::UnsupportedVersion,
                ..
            }
        ));
    }
}
