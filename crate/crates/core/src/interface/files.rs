//! Line-delimited JSON files: one header object, then one record per line.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::control::{MassTrajectory, TrajectorySample};
use crate::error::{Error, Result};
use crate::hand::{ChannelId, CHANNEL_COUNT};
use crate::sim::Simulation;

use super::wire::TipFrame;
use super::{check_version, FORMAT_VERSION};

pub const TRAJECTORY_FORMAT: &str = "pneumahand.trajectory";
pub const POSE_FORMAT: &str = "pneumahand.pose";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileHeader {
    pub format: String,
    pub version: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub created_at: String,
    pub config_digest: String,
    pub seed: u64,
    /// Column order of every per-channel array in the file.
    pub channels: Vec<ChannelId>,
}

impl FileHeader {
    pub fn new(
        format: &str,
        name: impl Into<String>,
        config_digest: impl Into<String>,
        seed: u64,
    ) -> Self {
        Self {
            format: format.into(),
            version: FORMAT_VERSION.into(),
            name: name.into(),
            author: String::new(),
            created_at: String::new(),
            config_digest: config_digest.into(),
            seed,
            channels: ChannelId::ALL.to_vec(),
        }
    }

    fn check(&self, format: &str) -> Result<()> {
        if self.format != format {
            return Err(Error::format(format!(
                "expected format `{format}`, found `{}`",
                self.format
            )));
        }
        check_version(&self.version)?;
        if self.channels != ChannelId::ALL {
            return Err(Error::format(
                "channel columns must list all 16 channels in code order",
            ));
        }
        Ok(())
    }
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Reads a header and its records; errors carry `path` and the 1-based line.
fn read_lines<R: BufRead, T: DeserializeOwned>(
    reader: R,
    path: &Path,
    format: &str,
) -> Result<(FileHeader, Vec<T>)> {
    let mut header: Option<FileHeader> = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match &header {
            None => {
                let h: FileHeader =
                    serde_json::from_str(&line).map_err(|e| Error::from(e).at_line(path, n))?;
                h.check(format).map_err(|e| e.at_line(path, n))?;
                header = Some(h);
            }
            Some(_) => records
                .push(serde_json::from_str(&line).map_err(|e| Error::from(e).at_line(path, n))?),
        }
    }
    let header = header.ok_or_else(|| Error::format("missing header").at_line(path, 1))?;
    Ok((header, records))
}

pub fn write_trajectory<W: Write>(
    mut w: W,
    traj: &MassTrajectory,
    config_digest: &str,
    seed: u64,
) -> Result<()> {
    traj.validate()?;
    let mut h = FileHeader::new(TRAJECTORY_FORMAT, traj.name.clone(), config_digest, seed);
    h.author = traj.author.clone();
    h.created_at = traj.created_at.clone();
    write_line(&mut w, &h)?;
    for s in &traj.samples {
        write_line(&mut w, s)?;
    }
    Ok(())
}

/// Reads a trajectory file; a broken time ordering is a format error naming
/// the trajectory.
pub fn read_trajectory<R: BufRead>(reader: R, path: &Path) -> Result<(FileHeader, MassTrajectory)> {
    let (h, samples) = read_lines::<_, TrajectorySample>(reader, path, TRAJECTORY_FORMAT)?;
    let traj = MassTrajectory {
        name: h.name.clone(),
        author: h.author.clone(),
        created_at: h.created_at.clone(),
        samples,
    };
    traj.validate()?;
    Ok((h, traj))
}

/// One line of a pose/telemetry trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub tick: u64,
    pub t: f64,
    /// rad
    pub joints: [f64; CHANNEL_COUNT],
    /// kg
    pub masses: [f64; CHANNEL_COUNT],
    /// kg
    pub setpoints: [f64; CHANNEL_COUNT],
    /// gauge, Pa
    pub pressures: [f64; CHANNEL_COUNT],
    /// index, middle, ring, little, thumb
    pub tips: [TipFrame; 5],
}

impl PoseRecord {
    pub fn of(sim: &Simulation) -> Self {
        let atm = sim.config().plant.atmosphere.pressure;
        let pose = &sim.equilibrium().pose;
        Self {
            tick: sim.tick(),
            t: sim.time(),
            joints: pose.joints,
            masses: sim.masses(),
            setpoints: *sim.setpoints(),
            pressures: sim.pressures().map(|p| p - atm),
            tips: TipFrame::of_pose(pose),
        }
    }
}

pub fn write_pose_trace<W: Write>(
    mut w: W,
    header: &FileHeader,
    records: &[PoseRecord],
) -> Result<()> {
    write_line(&mut w, header)?;
    for r in records {
        write_line(&mut w, r)?;
    }
    Ok(())
}

pub fn read_pose_trace<R: BufRead>(
    reader: R,
    path: &Path,
) -> Result<(FileHeader, Vec<PoseRecord>)> {
    let (h, records) = read_lines::<_, PoseRecord>(reader, path, POSE_FORMAT)?;
    if records.windows(2).any(|w| w[1].tick <= w[0].tick) {
        return Err(Error::format(format!(
            "pose trace `{}` ticks are not increasing",
            h.name
        )));
    }
    Ok((h, records))
}
