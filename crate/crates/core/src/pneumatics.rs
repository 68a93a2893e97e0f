//! Ideal-gas chamber plant, binary valve bank, reservoirs and pressure sensing.
//!
//! Chambers are isothermal. Flow through an open valve is linear in the
//! pressure difference across it. Pressures are absolute unless a name says
//! `gauge`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{ChannelId, CHANNEL_COUNT};

/// Specific gas constant of dry air, J/(kg·K).
pub const R_AIR: f64 = 287.05;
/// Standard atmosphere, Pa absolute.
pub const P_ATM: f64 = 101_325.0;
/// Default chamber temperature, K.
pub const T_ROOM: f64 = 293.15;

/// Absolute pressure of `mass` kg of air in `volume` m³ at `temperature` K.
pub fn chamber_pressure(mass: f64, volume: f64, temperature: f64) -> Result<f64> {
    if !(volume > 0.0) {
        return Err(Error::domain(format!(
            "volume must be positive, got {volume}"
        )));
    }
    if !(temperature > 0.0) {
        return Err(Error::domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if !(mass >= 0.0) {
        return Err(Error::domain(format!(
            "mass must be non-negative, got {mass}"
        )));
    }
    Ok(mass * R_AIR * temperature / volume)
}

/// Mass that produces `pressure` (absolute) in `volume` at `temperature`.
pub fn mass_at_pressure(pressure: f64, volume: f64, temperature: f64) -> f64 {
    pressure * volume / (R_AIR * temperature)
}

/// The linear forward model: signed mass flow from upstream to downstream.
pub fn valve_mass_flow(upstream_p: f64, downstream_p: f64, flow_coefficient: f64) -> f64 {
    debug_assert!(flow_coefficient >= 0.0);
    flow_coefficient * (upstream_p - downstream_p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChamberState {
    pub mass: f64,
    pub volume: f64,
    pub temperature: f64,
    pub pressure: f64,
}

impl ChamberState {
    pub fn new(mass: f64, volume: f64, temperature: f64) -> Result<Self> {
        let pressure = chamber_pressure(mass, volume, temperature)?;
        Ok(Self {
            mass,
            volume,
            temperature,
            pressure,
        })
    }

    /// Chamber in equilibrium with the atmosphere.
    pub fn vented(volume: f64, temperature: f64, atmosphere: f64) -> Result<Self> {
        Self::new(
            mass_at_pressure(atmosphere, volume, temperature),
            volume,
            temperature,
        )
    }

    /// Imposes a new volume on a sealed chamber. Mass is untouched.
    pub fn with_volume(&self, volume: f64) -> Result<Self> {
        Self::new(self.mass, volume, self.temperature)
    }

    pub fn gauge_pressure(&self, atmosphere: f64) -> f64 {
        self.pressure - atmosphere
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valve {
    Inflate,
    Vent,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ValveState {
    pub open: bool,
    /// Simulation time of the last state change, if any.
    pub last_switch: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelValves {
    pub inflate: ValveState,
    pub vent: ValveState,
}

impl ChannelValves {
    pub fn get(&self, valve: Valve) -> &ValveState {
        match valve {
            Valve::Inflate => &self.inflate,
            Valve::Vent => &self.vent,
        }
    }

    fn get_mut(&mut self, valve: Valve) -> &mut ValveState {
        match valve {
            Valve::Inflate => &mut self.inflate,
            Valve::Vent => &mut self.vent,
        }
    }
}

/// Slack on the switching interval to absorb tick-time rounding.
const SWITCH_SLACK: f64 = 1e-9;

/// Inflate/vent valve pair for every channel, with a per-valve switching
/// rate limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValveBank {
    pub channels: [ChannelValves; CHANNEL_COUNT],
    pub max_switch_rate: f64,
}

impl ValveBank {
    pub fn new(max_switch_rate: f64) -> Self {
        Self {
            channels: [ChannelValves::default(); CHANNEL_COUNT],
            max_switch_rate,
        }
    }

    pub fn min_switch_interval(&self) -> f64 {
        1.0 / self.max_switch_rate
    }

    pub fn is_open(&self, channel: ChannelId, valve: Valve) -> bool {
        self.channels[channel.index()].get(valve).open
    }

    /// Whether `valve` may change state at time `now`.
    pub fn can_switch(&self, channel: ChannelId, valve: Valve, now: f64) -> bool {
        match self.channels[channel.index()].get(valve).last_switch {
            None => true,
            Some(t) => now - t >= self.min_switch_interval() - SWITCH_SLACK,
        }
    }

    /// Requests a valve state. Returns the state actually in force afterwards:
    /// a change that would exceed the rate limit is deferred.
    pub fn command(&mut self, channel: ChannelId, valve: Valve, open: bool, now: f64) -> bool {
        let allowed = self.can_switch(channel, valve, now);
        let state = self.channels[channel.index()].get_mut(valve);
        if state.open != open && allowed {
            state.open = open;
            state.last_switch = Some(now);
        }
        state.open
    }

    pub fn close_all(&mut self, now: f64) {
        for ch in ChannelId::ALL {
            self.command(ch, Valve::Inflate, false, now);
            self.command(ch, Valve::Vent, false, now);
        }
    }
}

/// Pressure sensor with zero-mean Gaussian error; `accuracy_fraction` of full
/// scale is taken as the 3σ bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressureSensorModel {
    pub full_scale: f64,
    pub accuracy_fraction: f64,
    pub noise_seed: u64,
}

impl Default for PressureSensorModel {
    fn default() -> Self {
        Self {
            full_scale: 250e3,
            accuracy_fraction: 0.014,
            noise_seed: 0,
        }
    }
}

impl PressureSensorModel {
    pub fn sigma(&self) -> f64 {
        self.accuracy_fraction * self.full_scale / 3.0
    }

    pub fn noiseless(&self) -> Self {
        Self {
            accuracy_fraction: 0.0,
            ..*self
        }
    }
}

/// Stateless per-(seed, tick, channel) RNG.
pub(crate) fn keyed_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut z = seed;
    for word in [a, b] {
        z = splitmix64(z ^ word.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    ChaCha8Rng::seed_from_u64(z)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One sensor reading. Deterministic in `(sensor.noise_seed, tick, channel)`.
pub fn read_pressure(
    true_p: f64,
    sensor: &PressureSensorModel,
    tick: u64,
    channel: ChannelId,
) -> f64 {
    if sensor.accuracy_fraction == 0.0 {
        return true_p;
    }
    let mut rng = keyed_rng(sensor.noise_seed, tick, channel.code() as u64);
    let z: f64 = StandardNormal.sample(&mut rng);
    true_p + sensor.sigma() * z
}

/// Constant-pressure source or sink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reservoir {
    pub pressure: f64,
}

impl Reservoir {
    pub fn supply(gauge: f64) -> Self {
        Self {
            pressure: P_ATM + gauge,
        }
    }

    pub fn atmosphere() -> Self {
        Self { pressure: P_ATM }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowCoefficients {
    /// kg/(s·Pa) through the inflate valve.
    pub inflate: f64,
    /// kg/(s·Pa) through the vent valve.
    pub vent: f64,
}

impl Default for FlowCoefficients {
    fn default() -> Self {
        Self {
            inflate: 5e-10,
            vent: 5e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub temperature: f64,
    pub supply: Reservoir,
    pub atmosphere: Reservoir,
    pub flow: [FlowCoefficients; CHANNEL_COUNT],
    /// Per-valve switching limit, Hz.
    pub max_switch_rate: f64,
    /// Euler substeps per controller tick.
    pub substeps: u32,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            temperature: T_ROOM,
            supply: Reservoir::supply(400e3),
            atmosphere: Reservoir::atmosphere(),
            flow: [FlowCoefficients::default(); CHANNEL_COUNT],
            max_switch_rate: 300.0,
            substeps: 4,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::domain("plant temperature must be positive"));
        }
        if !(self.atmosphere.pressure > 0.0 && self.supply.pressure > self.atmosphere.pressure) {
            return Err(Error::domain("supply must exceed a positive atmosphere"));
        }
        for (ch, f) in ChannelId::ALL.iter().zip(&self.flow) {
            if !(f.inflate >= 0.0 && f.vent >= 0.0 && f.inflate.is_finite() && f.vent.is_finite()) {
                return Err(
                    Error::domain("flow coefficients must be finite and non-negative")
                        .on_channel(*ch),
                );
            }
        }
        if !(self.max_switch_rate > 0.0 && self.max_switch_rate.is_finite()) {
            return Err(Error::domain("valve switch rate must be positive"));
        }
        if self.substeps == 0 {
            return Err(Error::domain("at least one plant substep per tick"));
        }
        Ok(())
    }
}

/// Net mass flow into one chamber for the given valve states.
pub fn chamber_inflow(
    pressure: f64,
    inflate_open: bool,
    vent_open: bool,
    coefficients: &FlowCoefficients,
    supply: f64,
    atmosphere: f64,
) -> f64 {
    let mut flow = 0.0;
    if inflate_open {
        flow += valve_mass_flow(supply, pressure, coefficients.inflate);
    }
    if vent_open {
        flow -= valve_mass_flow(pressure, atmosphere, coefficients.vent);
    }
    flow
}

/// Advances every chamber by one explicit Euler step of length `dt`.
///
/// Masses are clamped at zero and pressures are recomputed in the supplied
/// volumes. A chamber with both valves closed keeps its mass bit-exactly.
pub fn step_plant(
    chambers: &[ChamberState; CHANNEL_COUNT],
    valves: &ValveBank,
    volumes: &[f64; CHANNEL_COUNT],
    cfg: &PlantConfig,
    dt: f64,
) -> Result<[ChamberState; CHANNEL_COUNT]> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    let mut next = *chambers;
    for ch in ChannelId::ALL {
        let i = ch.index();
        let c = &chambers[i];
        let v = &valves.channels[i];
        let mass = if v.inflate.open || v.vent.open {
            let flow = chamber_inflow(
                c.pressure,
                v.inflate.open,
                v.vent.open,
                &cfg.flow[i],
                cfg.supply.pressure,
                cfg.atmosphere.pressure,
            );
            (c.mass + flow * dt).max(0.0)
        } else {
            c.mass
        };
        next[i] =
            ChamberState::new(mass, volumes[i], c.temperature).map_err(|e| e.on_channel(ch))?;
    }
    Ok(next)
}
