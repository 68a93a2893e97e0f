//! Air-mass estimation from measured pressure and hysteresis bang-bang valve
//! switching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{ChannelId, CHANNEL_COUNT};
use crate::pneumatics::{chamber_inflow, FlowCoefficients, Valve, ValveBank, P_ATM};

/// Controller-side parameters. The flow coefficients mirror the plant's but
/// may differ from them to model estimation error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Hz
    pub tick_rate: f64,
    /// Width of the deadband around each setpoint, kg.
    pub hysteresis_band: [f64; CHANNEL_COUNT],
    pub flow: [FlowCoefficients; CHANNEL_COUNT],
    /// Supply pressure assumed by the estimator, Pa absolute.
    pub supply_pressure: f64,
    /// Pa absolute
    pub atmosphere: f64,
    pub recalibration: RecalibrationConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            tick_rate: 300.0,
            hysteresis_band: [2e-6; CHANNEL_COUNT],
            flow: [FlowCoefficients::default(); CHANNEL_COUNT],
            supply_pressure: P_ATM + 400e3,
            atmosphere: P_ATM,
            recalibration: RecalibrationConfig::default(),
        }
    }
}

impl ControllerConfig {
    pub fn tick(&self) -> f64 {
        1.0 / self.tick_rate
    }

    /// Checks the config against the valve hardware limit.
    pub fn validate(&self, max_switch_rate: f64) -> Result<()> {
        if !(self.tick_rate > 0.0 && self.tick_rate <= max_switch_rate) {
            return Err(Error::domain(format!(
                "tick rate {} Hz must be positive and at most the valve limit {max_switch_rate} Hz",
                self.tick_rate
            )));
        }
        for ch in ChannelId::ALL {
            let i = ch.index();
            if !(self.hysteresis_band[i] > 0.0 && self.hysteresis_band[i].is_finite()) {
                return Err(Error::domain("hysteresis band must be positive").on_channel(ch));
            }
            let f = &self.flow[i];
            if !(f.inflate >= 0.0 && f.vent >= 0.0 && f.inflate.is_finite() && f.vent.is_finite()) {
                return Err(
                    Error::domain("flow coefficients must be finite and non-negative")
                        .on_channel(ch),
                );
            }
        }
        if !(self.supply_pressure > self.atmosphere && self.atmosphere > 0.0) {
            return Err(Error::domain("supply must exceed a positive atmosphere"));
        }
        self.recalibration.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecalibrationConfig {
    /// Gauge pressure below which the channel counts as vented, Pa.
    pub threshold: f64,
    /// Averaging window of measured gauge pressure, s.
    pub hold: f64,
    /// Give up and report a fault after this long, s. The slowest default
    /// chamber (thumb proximal) needs about 6.3 s to vent from full supply.
    pub timeout: f64,
}

impl Default for RecalibrationConfig {
    fn default() -> Self {
        Self {
            threshold: 500.0,
            hold: 0.5,
            timeout: 10.0,
        }
    }
}

impl RecalibrationConfig {
    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.hold > 0.0 && self.timeout > self.hold) {
            return Err(Error::domain(
                "recalibration needs positive threshold and hold, and timeout > hold",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassEstimatorState {
    /// kg
    pub estimated_mass: [f64; CHANNEL_COUNT],
    /// Pa absolute
    pub last_measured_pressure: [f64; CHANNEL_COUNT],
    /// Accumulated open time of the inflate and vent valve, s.
    pub open_time: [[f64; 2]; CHANNEL_COUNT],
}

impl MassEstimatorState {
    pub fn new(masses: [f64; CHANNEL_COUNT], pressures: [f64; CHANNEL_COUNT]) -> Self {
        Self {
            estimated_mass: masses.map(|m| m.max(0.0)),
            last_measured_pressure: pressures,
            open_time: [[0.0; 2]; CHANNEL_COUNT],
        }
    }
}

/// Integrates the linear flow model over one step using measured pressures.
pub fn estimate_step(
    est: &MassEstimatorState,
    measured: &[f64; CHANNEL_COUNT],
    valves: &ValveBank,
    cfg: &ControllerConfig,
    dt: f64,
) -> MassEstimatorState {
    debug_assert!(dt > 0.0);
    let mut next = est.clone();
    for ch in ChannelId::ALL {
        let i = ch.index();
        next.last_measured_pressure[i] = measured[i];
        let inflate = valves.is_open(ch, Valve::Inflate);
        let vent = valves.is_open(ch, Valve::Vent);
        if !(inflate || vent) {
            continue;
        }
        let flow = chamber_inflow(
            measured[i],
            inflate,
            vent,
            &cfg.flow[i],
            cfg.supply_pressure,
            cfg.atmosphere,
        );
        next.estimated_mass[i] = (est.estimated_mass[i] + flow * dt).max(0.0);
        if inflate {
            next.open_time[i][0] += dt;
        }
        if vent {
            next.open_time[i][1] += dt;
        }
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValveCommand {
    Inflate,
    Vent,
    Hold,
}

impl ValveCommand {
    fn targets(self) -> (bool, bool) {
        match self {
            ValveCommand::Inflate => (true, false),
            ValveCommand::Vent => (false, true),
            ValveCommand::Hold => (false, false),
        }
    }
}

/// Bang-bang decision for one channel.
pub fn desired_command(estimate: f64, setpoint: f64, band: f64) -> ValveCommand {
    if estimate < setpoint - band / 2.0 {
        ValveCommand::Inflate
    } else if estimate > setpoint + band / 2.0 {
        ValveCommand::Vent
    } else {
        ValveCommand::Hold
    }
}

/// Applies a command to one channel's valve pair at `now`, subject to the
/// rate limit. Returns the state in force afterwards.
pub fn apply_command(
    valves: &mut ValveBank,
    ch: ChannelId,
    cmd: ValveCommand,
    now: f64,
) -> ValveCommand {
    let (inflate, vent) = cmd.targets();
    // close first so a deferred close never overlaps a fresh open
    let vent_now = valves.command(ch, Valve::Vent, vent, now);
    let inflate_now = valves.command(ch, Valve::Inflate, inflate, now);
    match (inflate_now, vent_now) {
        (true, false) => ValveCommand::Inflate,
        (false, true) => ValveCommand::Vent,
        (false, false) => ValveCommand::Hold,
        // both open can only persist while a close is deferred
        (true, true) => ValveCommand::Hold,
    }
}

/// One controller tick: decides and applies valve commands for every
/// channel. Returns the commands actually in force.
pub fn control_step(
    est: &MassEstimatorState,
    setpoint: &[f64; CHANNEL_COUNT],
    cfg: &ControllerConfig,
    valves: &mut ValveBank,
    now: f64,
) -> [ValveCommand; CHANNEL_COUNT] {
    ChannelId::ALL.map(|ch| {
        let i = ch.index();
        let cmd = desired_command(est.estimated_mass[i], setpoint[i], cfg.hysteresis_band[i]);
        apply_command(valves, ch, cmd, now)
    })
}
