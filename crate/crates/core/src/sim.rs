//! Closed-loop simulation: plant, pressure sensors, mass estimator, valve
//! controller and quasi-static hand, advanced one controller tick at a time.

use serde::{Deserialize, Serialize};

use crate::control::{
    apply_command, desired_command, estimate_step, ControllerConfig, MassEstimatorState,
    MassTrajectory, Recalibration, RecalibrationStatus, Recorder, Replay, ValveCommand,
};
use crate::error::{Error, Result};
use crate::hand::{
    hand_equilibrium, rest_masses, ChannelId, ExternalLoad, HandEquilibrium, HandModel,
    CHANNEL_COUNT,
};
use crate::pneumatics::{
    mass_at_pressure, read_pressure, step_plant, ChamberState, PlantConfig, PressureSensorModel,
    Valve, ValveBank,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub plant: PlantConfig,
    pub sensor: PressureSensorModel,
    pub controller: ControllerConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.controller.validate(self.plant.max_switch_rate)?;
        let s = &self.sensor;
        if !(s.full_scale > 0.0 && s.accuracy_fraction >= 0.0 && s.accuracy_fraction.is_finite()) {
            return Err(Error::domain(
                "sensor full scale must be positive and accuracy non-negative",
            ));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sensor.noise_seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ControlEvent {
    Calibrated {
        channel: ChannelId,
        tick: u64,
        mass: f64,
    },
    Fault {
        channel: ChannelId,
        tick: u64,
        detail: String,
    },
    ReplayFinished {
        name: String,
        tick: u64,
    },
}

/// Persistent part of a simulation, enough to resume after a restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSnapshot {
    pub tick: u64,
    pub masses: [f64; CHANNEL_COUNT],
    pub estimated: [f64; CHANNEL_COUNT],
    pub setpoints: [f64; CHANNEL_COUNT],
}

#[derive(Debug, Clone)]
struct ActiveReplay {
    replay: Replay,
    start_tick: u64,
}

#[derive(Debug, Clone)]
struct ActiveRecording {
    recorder: Recorder,
    start_tick: u64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    model: HandModel,
    cfg: SimConfig,
    tick: u64,
    chambers: [ChamberState; CHANNEL_COUNT],
    valves: ValveBank,
    estimator: MassEstimatorState,
    setpoints: [f64; CHANNEL_COUNT],
    measured: [f64; CHANNEL_COUNT],
    commands: [ValveCommand; CHANNEL_COUNT],
    loads: ExternalLoad,
    equilibrium: HandEquilibrium,
    recalibrating: [Option<Recalibration>; CHANNEL_COUNT],
    recording: Option<ActiveRecording>,
    replay: Option<ActiveReplay>,
}

impl Simulation {
    /// Starts from the vented hand at rest with all valves closed.
    pub fn new(model: HandModel, cfg: SimConfig) -> Result<Self> {
        let masses = rest_masses(&model);
        Self::from_masses(model, cfg, 0, masses, masses, masses)
    }

    pub fn restore(model: HandModel, cfg: SimConfig, snapshot: &SimSnapshot) -> Result<Self> {
        Self::from_masses(
            model,
            cfg,
            snapshot.tick,
            snapshot.masses,
            snapshot.estimated,
            snapshot.setpoints,
        )
    }

    fn from_masses(
        model: HandModel,
        cfg: SimConfig,
        tick: u64,
        masses: [f64; CHANNEL_COUNT],
        estimated: [f64; CHANNEL_COUNT],
        setpoints: [f64; CHANNEL_COUNT],
    ) -> Result<Self> {
        model.validate()?;
        cfg.validate()?;
        for (ch, v) in ChannelId::ALL
            .iter()
            .zip(setpoints.iter().chain(&estimated))
        {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::domain(format!("invalid mass {v}")).on_channel(*ch));
            }
        }
        let loads = ExternalLoad::default();
        let equilibrium = hand_equilibrium(&model, &masses, &loads)?;
        let mut chambers = [ChamberState::new(0.0, 1.0, model.temperature)?; CHANNEL_COUNT];
        for ch in ChannelId::ALL {
            let i = ch.index();
            chambers[i] = ChamberState::new(masses[i], equilibrium.volumes[i], model.temperature)
                .map_err(|e| e.on_channel(ch))?;
        }
        let valves = ValveBank::new(cfg.plant.max_switch_rate);
        let pressures = chambers.map(|c| c.pressure);
        Ok(Self {
            estimator: MassEstimatorState::new(estimated, pressures),
            model,
            cfg,
            tick,
            chambers,
            valves,
            setpoints,
            measured: pressures,
            commands: [ValveCommand::Hold; CHANNEL_COUNT],
            loads,
            equilibrium,
            recalibrating: Default::default(),
            recording: None,
            replay: None,
        })
    }

    pub fn model(&self) -> &HandModel {
        &self.model
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn tick_rate(&self) -> f64 {
        self.cfg.controller.tick_rate
    }

    /// Simulation clock, s.
    pub fn time(&self) -> f64 {
        self.tick as f64 / self.tick_rate()
    }

    pub fn masses(&self) -> [f64; CHANNEL_COUNT] {
        self.chambers.map(|c| c.mass)
    }

    pub fn pressures(&self) -> [f64; CHANNEL_COUNT] {
        self.chambers.map(|c| c.pressure)
    }

    pub fn estimator(&self) -> &MassEstimatorState {
        &self.estimator
    }

    pub fn setpoints(&self) -> &[f64; CHANNEL_COUNT] {
        &self.setpoints
    }

    /// Latest sensor readings, Pa absolute.
    pub fn measured_pressures(&self) -> &[f64; CHANNEL_COUNT] {
        &self.measured
    }

    pub fn commands(&self) -> &[ValveCommand; CHANNEL_COUNT] {
        &self.commands
    }

    pub fn valves(&self) -> &ValveBank {
        &self.valves
    }

    pub fn equilibrium(&self) -> &HandEquilibrium {
        &self.equilibrium
    }

    pub fn loads(&self) -> &ExternalLoad {
        &self.loads
    }

    pub fn is_recording(&self) -> bool {
        self.recording.is_some()
    }

    pub fn is_replaying(&self) -> bool {
        self.replay.is_some()
    }

    pub fn is_recalibrating(&self, channel: ChannelId) -> bool {
        self.recalibrating[channel.index()].is_some()
    }

    pub fn snapshot(&self) -> SimSnapshot {
        SimSnapshot {
            tick: self.tick,
            masses: self.masses(),
            estimated: self.estimator.estimated_mass,
            setpoints: self.setpoints,
        }
    }

    pub fn set_setpoint(&mut self, channel: ChannelId, mass: f64) -> Result<()> {
        if self.replay.is_some() {
            return Err(Error::ChannelBusy(channel));
        }
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(
                Error::domain(format!("setpoint must be a non-negative mass, got {mass}"))
                    .on_channel(channel),
            );
        }
        self.setpoints[channel.index()] = mass;
        Ok(())
    }

    pub fn set_setpoints(&mut self, masses: &[f64; CHANNEL_COUNT]) -> Result<()> {
        for ch in ChannelId::ALL {
            self.set_setpoint(ch, masses[ch.index()])?;
        }
        Ok(())
    }

    pub fn set_load(&mut self, loads: ExternalLoad) -> Result<()> {
        if loads.torques.iter().any(|t| !t.is_finite())
            || loads
                .tip_constraints
                .iter()
                .flatten()
                .any(|c| !(c.x.is_finite() && c.y.is_finite()))
        {
            return Err(Error::domain("external load must be finite"));
        }
        self.loads = loads;
        self.equilibrium = hand_equilibrium(&self.model, &self.masses(), &self.loads)?;
        self.sync_volumes()?;
        Ok(())
    }

    pub fn start_record(&mut self, name: impl Into<String>) -> Result<()> {
        if self.recording.is_some() {
            return Err(Error::domain("already recording"));
        }
        if self.replay.is_some() {
            return Err(Error::domain("cannot record during a replay"));
        }
        self.recording = Some(ActiveRecording {
            recorder: Recorder::new(name),
            start_tick: self.tick,
        });
        Ok(())
    }

    pub fn stop_record(&mut self) -> Result<MassTrajectory> {
        let rec = self
            .recording
            .take()
            .ok_or_else(|| Error::domain("not recording"))?;
        rec.recorder.finish()
    }

    pub fn replay(&mut self, trajectory: MassTrajectory, time_scale: f64) -> Result<()> {
        if self.recording.is_some() {
            return Err(Error::domain("cannot replay while recording"));
        }
        if let Some(ch) = ChannelId::ALL
            .into_iter()
            .find(|c| self.is_recalibrating(*c))
        {
            return Err(Error::ChannelBusy(ch));
        }
        self.replay = Some(ActiveReplay {
            replay: Replay::new(trajectory, time_scale)?,
            start_tick: self.tick,
        });
        Ok(())
    }

    pub fn stop_replay(&mut self) -> bool {
        self.replay.take().is_some()
    }

    /// Starts venting `channel`; it is reset when the procedure completes.
    pub fn recalibrate(&mut self, channel: ChannelId) -> Result<()> {
        if self.replay.is_some() || self.is_recalibrating(channel) {
            return Err(Error::ChannelBusy(channel));
        }
        let c = &self.cfg.controller;
        self.recalibrating[channel.index()] = Some(Recalibration::start(
            self.time(),
            &c.recalibration,
            c.tick_rate,
        ));
        Ok(())
    }

    /// Runs ticks until the recalibration of `channel` ends.
    pub fn recalibrate_blocking(&mut self, channel: ChannelId) -> Result<ControlEvent> {
        self.recalibrate(channel)?;
        loop {
            for e in self.step()? {
                match &e {
                    ControlEvent::Calibrated { channel: c, .. } if *c == channel => return Ok(e),
                    ControlEvent::Fault {
                        channel: c, detail, ..
                    } if *c == channel => {
                        return Err(Error::HardwareFault {
                            channel,
                            detail: detail.clone(),
                        })
                    }
                    _ => {}
                }
            }
        }
    }

    fn sync_volumes(&mut self) -> Result<()> {
        for ch in ChannelId::ALL {
            let i = ch.index();
            self.chambers[i] = self.chambers[i]
                .with_volume(self.equilibrium.volumes[i])
                .map_err(|e| e.on_channel(ch))?;
        }
        Ok(())
    }

    /// Advances one controller tick.
    pub fn step(&mut self) -> Result<Vec<ControlEvent>> {
        let mut events = Vec::new();
        let rate = self.tick_rate();
        let now = self.time();
        let dt = 1.0 / rate;

        for ch in ChannelId::ALL {
            let i = ch.index();
            self.measured[i] =
                read_pressure(self.chambers[i].pressure, &self.cfg.sensor, self.tick, ch);
        }

        if let Some(active) = &self.replay {
            let elapsed = (self.tick - active.start_tick) as f64 / rate;
            self.setpoints = active.replay.setpoint_at(elapsed);
            if active.replay.finished(elapsed) {
                events.push(ControlEvent::ReplayFinished {
                    name: active.replay.trajectory.name.clone(),
                    tick: self.tick,
                });
                self.replay = None;
            }
        }
        if let Some(rec) = &mut self.recording {
            rec.recorder
                .push((self.tick - rec.start_tick) as f64 / rate, &self.setpoints);
        }

        let ctrl = &self.cfg.controller;
        for ch in ChannelId::ALL {
            let i = ch.index();
            let cmd = if self.recalibrating[i].is_some() {
                ValveCommand::Vent
            } else {
                desired_command(
                    self.estimator.estimated_mass[i],
                    self.setpoints[i],
                    ctrl.hysteresis_band[i],
                )
            };
            self.commands[i] = apply_command(&mut self.valves, ch, cmd, now);
        }
        self.estimator = estimate_step(&self.estimator, &self.measured, &self.valves, ctrl, dt);

        for ch in ChannelId::ALL {
            let i = ch.index();
            let Some(recal) = &mut self.recalibrating[i] else {
                continue;
            };
            let gauge = self.measured[i] - ctrl.atmosphere;
            match recal.observe(now, gauge, &ctrl.recalibration) {
                RecalibrationStatus::Venting => {}
                RecalibrationStatus::Vented => {
                    let mass = mass_at_pressure(
                        ctrl.atmosphere,
                        self.equilibrium.volumes[i],
                        self.model.temperature,
                    );
                    self.estimator.estimated_mass[i] = mass;
                    self.recalibrating[i] = None;
                    self.commands[i] = apply_command(&mut self.valves, ch, ValveCommand::Hold, now);
                    events.push(ControlEvent::Calibrated {
                        channel: ch,
                        tick: self.tick,
                        mass,
                    });
                }
                RecalibrationStatus::TimedOut => {
                    self.recalibrating[i] = None;
                    self.commands[i] = apply_command(&mut self.valves, ch, ValveCommand::Hold, now);
                    events.push(ControlEvent::Fault {
                        channel: ch,
                        tick: self.tick,
                        detail: format!(
                            "gauge pressure still {:.0} Pa after {} s of venting",
                            gauge, ctrl.recalibration.timeout
                        ),
                    });
                }
            }
        }

        let substeps = self.cfg.plant.substeps;
        let h = dt / substeps as f64;
        let volumes = self.equilibrium.volumes;
        for _ in 0..substeps {
            self.chambers = step_plant(&self.chambers, &self.valves, &volumes, &self.cfg.plant, h)?;
        }
        self.equilibrium = hand_equilibrium(&self.model, &self.masses(), &self.loads)?;
        self.equilibrium.pose.timestamp = (self.tick + 1) as f64 / rate;
        self.sync_volumes()?;
        self.tick += 1;
        Ok(events)
    }

    pub fn run_ticks(&mut self, n: u64) -> Result<Vec<ControlEvent>> {
        let mut events = Vec::new();
        for _ in 0..n {
            events.extend(self.step()?);
        }
        Ok(events)
    }

    /// Runs for `seconds` of simulated time.
    pub fn run_for(&mut self, seconds: f64) -> Result<Vec<ControlEvent>> {
        let n = (seconds * self.tick_rate()).round().max(0.0) as u64;
        self.run_ticks(n)
    }

    /// Whether any valve of `channel` is open.
    pub fn channel_active(&self, channel: ChannelId) -> bool {
        self.valves.is_open(channel, Valve::Inflate) || self.valves.is_open(channel, Valve::Vent)
    }
}

/// Replays `trajectory` from rest through the closed loop and settles for
/// `settle` seconds after its end. Returns the final equilibrium.
pub fn replay_to_rest(
    model: &HandModel,
    cfg: &SimConfig,
    trajectory: &MassTrajectory,
    time_scale: f64,
    settle: f64,
) -> Result<HandEquilibrium> {
    let mut sim = Simulation::new(model.clone(), cfg.clone())?;
    sim.replay(trajectory.clone(), time_scale)?;
    sim.run_for(trajectory.duration() * time_scale + settle)?;
    Ok(sim.equilibrium().clone())
}
