//! Synergies: recorded air-mass setpoint trajectories and their replay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::CHANNEL_COUNT;

/// A sample is stored only when some channel moved by more than this, kg.
pub const CHANGE_THRESHOLD: f64 = 1e-7;

/// Slack when comparing scaled sample instants with tick times, s.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySample {
    /// s from the start of the trajectory
    pub t: f64,
    /// setpoint mass per channel, kg
    pub m: [f64; CHANNEL_COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassTrajectory {
    pub name: String,
    pub author: String,
    pub created_at: String,
    pub samples: Vec<TrajectorySample>,
}

impl MassTrajectory {
    pub fn new(name: impl Into<String>, samples: Vec<TrajectorySample>) -> Result<Self> {
        let t = Self {
            name: name.into(),
            author: String::new(),
            created_at: String::new(),
            samples,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_author(mut self, author: impl Into<String>, created_at: impl Into<String>) -> Self {
        self.author = author.into();
        self.created_at = created_at.into();
        self
    }

    /// A single held posture, starting from `from` and switching to `to` at `at` seconds.
    pub fn step(
        name: impl Into<String>,
        from: [f64; CHANNEL_COUNT],
        to: [f64; CHANNEL_COUNT],
        at: f64,
    ) -> Result<Self> {
        Self::new(
            name,
            vec![
                TrajectorySample { t: 0.0, m: from },
                TrajectorySample { t: at, m: to },
            ],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::domain(format!(
                "trajectory `{}` is empty",
                self.name
            )));
        }
        for (k, s) in self.samples.iter().enumerate() {
            if !s.t.is_finite() || s.t < 0.0 {
                return Err(Error::format(format!(
                    "trajectory `{}`: sample {k} has invalid time {}",
                    self.name, s.t
                )));
            }
            if k > 0 && !(s.t > self.samples[k - 1].t) {
                return Err(Error::format(format!(
                    "trajectory `{}`: timestamps not strictly increasing at sample {k}",
                    self.name
                )));
            }
            if let Some(c) = s.m.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
                return Err(Error::domain(format!(
                    "trajectory `{}`: sample {k} channel {c} has invalid mass {}",
                    self.name, s.m[c]
                )));
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn final_masses(&self) -> [f64; CHANNEL_COUNT] {
        self.samples.last().map_or([0.0; CHANNEL_COUNT], |s| s.m)
    }

    /// Zero-order hold at time `t` of the trajectory played at `time_scale`.
    pub fn setpoint_at(&self, t: f64, time_scale: f64) -> [f64; CHANNEL_COUNT] {
        let k = self
            .samples
            .partition_point(|s| s.t * time_scale <= t + TIME_SLACK);
        self.samples[k.saturating_sub(1)].m
    }
}

/// The setpoint stream of a replay: every sample at its scaled instant.
pub fn replay(traj: &MassTrajectory, time_scale: f64) -> Result<Vec<TrajectorySample>> {
    if !(time_scale > 0.0 && time_scale.is_finite()) {
        return Err(Error::domain(format!(
            "time scale must be positive, got {time_scale}"
        )));
    }
    traj.validate()?;
    Ok(traj
        .samples
        .iter()
        .map(|s| TrajectorySample {
            t: s.t * time_scale,
            m: s.m,
        })
        .collect())
}

/// Samples live setpoints with change compression.
#[derive(Debug, Clone, PartialEq)]
pub struct Recorder {
    name: String,
    samples: Vec<TrajectorySample>,
}

impl Recorder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            samples: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Offers the setpoints in force at `t` (s since the recording started).
    pub fn push(&mut self, t: f64, setpoints: &[f64; CHANNEL_COUNT]) {
        let changed = match self.samples.last() {
            None => true,
            Some(last) => {
                t > last.t
                    && last
                        .m
                        .iter()
                        .zip(setpoints)
                        .any(|(a, b)| (a - b).abs() > CHANGE_THRESHOLD)
            }
        };
        if changed {
            self.samples.push(TrajectorySample { t, m: *setpoints });
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn finish(self) -> Result<MassTrajectory> {
        MassTrajectory::new(self.name, self.samples)
    }
}

/// An in-progress replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub trajectory: MassTrajectory,
    pub time_scale: f64,
}

impl Replay {
    pub fn new(trajectory: MassTrajectory, time_scale: f64) -> Result<Self> {
        replay(&trajectory, time_scale)?;
        Ok(Self {
            trajectory,
            time_scale,
        })
    }

    pub fn setpoint_at(&self, elapsed: f64) -> [f64; CHANNEL_COUNT] {
        self.trajectory.setpoint_at(elapsed, self.time_scale)
    }

    pub fn finished(&self, elapsed: f64) -> bool {
        elapsed + TIME_SLACK >= self.trajectory.duration() * self.time_scale
    }
}
