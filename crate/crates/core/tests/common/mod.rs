//! Checks shared by the property suites and the acceptance runner.
#![allow(dead_code)]

use pneumahand::control::ValveCommand;
use pneumahand::hand::{
    joint_equilibrium, joint_residual, mass_for_joint, masses_for_joints, ChannelId, ExternalLoad,
    HandModel, CHANNEL_COUNT,
};
use pneumahand::pneumatics::{Valve, R_AIR};
use pneumahand::sim::{ControlEvent, SimConfig, Simulation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BELLOWS: [ChannelId; 7] = [
    ChannelId::ThumbProximal,
    ChannelId::ThumbMiddle,
    ChannelId::ThumbDistal,
    ChannelId::PalmBellow,
    ChannelId::AbductionIndexMiddle,
    ChannelId::AbductionMiddleRing,
    ChannelId::AbductionRingLittle,
];

/// Grid points of the brute-force residual scan.
pub const ORACLE_GRID: usize = 50_000;

/// Root of the residual located by scanning a uniform grid: the grid point
/// of smallest |residual|, refined by linear interpolation when the sign
/// changes next to it.
pub fn brute_force_joint(model: &HandModel, ch: ChannelId, mass: f64, load: f64) -> f64 {
    let limit = model.joint_limit(ch);
    let q = |k: usize| limit * k as f64 / ORACLE_GRID as f64;
    let r: Vec<f64> = (0..=ORACLE_GRID)
        .map(|k| joint_residual(model, ch, mass, load, q(k)))
        .collect();
    let best = (0..=ORACLE_GRID)
        .min_by(|a, b| r[*a].abs().total_cmp(&r[*b].abs()))
        .unwrap();
    for (a, b) in [
        (best.saturating_sub(1), best),
        (best, (best + 1).min(ORACLE_GRID)),
    ] {
        if a != b && r[a].signum() != r[b].signum() {
            return q(a) + (q(b) - q(a)) * r[a] / (r[a] - r[b]);
        }
    }
    q(best)
}

/// Largest |Δθ| between the solver and the grid oracle over `samples`
/// random (mass, load) pairs per bellow.
pub fn equilibrium_oracle_error(model: &HandModel, samples: usize, seed: u64) -> (f64, ChannelId) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0, BELLOWS[0]);
    for ch in BELLOWS {
        let (m_lo, m_hi) = (
            mass_for_joint(model, ch, 0.0),
            mass_for_joint(model, ch, model.joint_limit(ch)),
        );
        for _ in 0..samples {
            let mass = rng.random_range(0.8 * m_lo..1.2 * m_hi);
            let load = rng.random_range(-0.3..0.6);
            let solved = joint_equilibrium(model, ch, mass, load).unwrap().joint;
            let oracle = brute_force_joint(model, ch, mass, load);
            let d = (solved - oracle).abs();
            if d > worst.0 {
                worst = (d, ch);
            }
        }
    }
    worst
}

/// Valve transition times per (channel, valve) collected over a trace.
#[derive(Default)]
pub struct SwitchLog {
    last: Vec<Option<(bool, f64)>>,
    /// Shortest observed interval between two transitions of one valve, s.
    pub min_interval: f64,
    pub transitions: usize,
}

impl SwitchLog {
    pub fn new() -> Self {
        Self {
            last: vec![None; 2 * CHANNEL_COUNT],
            min_interval: f64::INFINITY,
            transitions: 0,
        }
    }

    pub fn observe(&mut self, sim: &Simulation) {
        for ch in ChannelId::ALL {
            for (j, v) in [Valve::Inflate, Valve::Vent].into_iter().enumerate() {
                let slot = &mut self.last[2 * ch.index() + j];
                let open = sim.valves().is_open(ch, v);
                let state = sim.valves().channels[ch.index()].get(v);
                match slot {
                    None => *slot = Some((open, state.last_switch.unwrap_or(f64::NEG_INFINITY))),
                    Some((was, t)) if *was != open => {
                        let at = state
                            .last_switch
                            .expect("a switched valve records its time");
                        self.min_interval = self.min_interval.min(at - *t);
                        self.transitions += 1;
                        *slot = Some((open, at));
                    }
                    _ => {}
                }
            }
        }
    }

    /// Switching frequency bound of the trace, Hz.
    pub fn max_rate(&self) -> f64 {
        1.0 / self.min_interval
    }
}

pub struct TrackingResult {
    /// Largest |true mass − setpoint| after the channel's estimate first
    /// entered its deadband, kg.
    pub max_error: f64,
    /// Hysteresis band + the largest single-tick mass change, kg.
    pub bound: f64,
    pub switches: SwitchLog,
}

/// Noiseless sensing and matched coefficients; three random setpoint steps
/// on every channel, 3 s each.
pub fn closed_loop_tracking(seed: u64) -> TrackingResult {
    let model = HandModel::default();
    let mut cfg = SimConfig::default();
    cfg.sensor = cfg.sensor.noiseless();
    let mut sim = Simulation::new(model.clone(), cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = cfg.controller.tick();
    let quantum = (0..CHANNEL_COUNT)
        .map(|i| {
            cfg.plant.flow[i].inflate.max(cfg.plant.flow[i].vent) * cfg.plant.supply.pressure * dt
        })
        .fold(0.0, f64::max);
    let band = cfg
        .controller
        .hysteresis_band
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let mut switches = SwitchLog::new();
    let mut max_error: f64 = 0.0;
    for _ in 0..3 {
        let joints: [f64; CHANNEL_COUNT] = std::array::from_fn(|i| {
            rng.random_range(0.0..0.9) * model.joint_limit(ChannelId::ALL[i])
        });
        let sp = masses_for_joints(&model, &joints);
        sim.set_setpoints(&sp).unwrap();
        let mut entered = [false; CHANNEL_COUNT];
        for _ in 0..(3.0 / dt) as usize {
            sim.step().unwrap();
            switches.observe(&sim);
            let m = sim.masses();
            let est = &sim.estimator().estimated_mass;
            for i in 0..CHANNEL_COUNT {
                let e = (m[i] - sp[i]).abs();
                entered[i] |= (est[i] - sp[i]).abs() <= band / 2.0;
                if entered[i] {
                    max_error = max_error.max(e);
                }
            }
        }
        assert!(
            entered.iter().all(|e| *e),
            "every channel reaches its band within 3 s"
        );
    }
    TrackingResult {
        max_error,
        bound: band + quantum,
        switches,
    }
}

/// Noisy sensing; each tick the setpoint jumps far above or below the
/// current mass so every channel alternates inflate and vent. Returns the
/// RMS estimate error over channels and seeds at each checkpoint (cycles).
pub fn drift_ensemble(seeds: u64, checkpoints: &[usize]) -> (Vec<f64>, SwitchLog) {
    let model = HandModel::default();
    let mid: [f64; CHANNEL_COUNT] = std::array::from_fn(|i| {
        mass_for_joint(
            &model,
            ChannelId::ALL[i],
            0.5 * model.joint_limit(ChannelId::ALL[i]),
        )
    });
    let hi = mid.map(|m| m * 1.5);
    let lo = mid.map(|m| m * 0.5);
    let mut sq = vec![0.0; checkpoints.len()];
    let mut switches = SwitchLog::new();
    let last = *checkpoints.iter().max().unwrap();
    for seed in 0..seeds {
        let mut sim =
            Simulation::new(model.clone(), SimConfig::default().with_seed(1000 + seed)).unwrap();
        // park the chambers near the middle of their range first
        sim.set_setpoints(&mid).unwrap();
        sim.run_for(2.0).unwrap();
        let offset = estimate_error(&sim);
        for cycle in 1..=last {
            for sp in [&hi, &lo] {
                sim.set_setpoints(sp).unwrap();
                sim.step().unwrap();
                if seed == 0 {
                    switches.observe(&sim);
                }
            }
            if let Some(k) = checkpoints.iter().position(|c| *c == cycle) {
                let e = estimate_error(&sim);
                sq[k] += (0..CHANNEL_COUNT)
                    .map(|i| (e[i] - offset[i]).powi(2))
                    .sum::<f64>();
            }
        }
    }
    let n = (seeds as usize * CHANNEL_COUNT) as f64;
    (sq.into_iter().map(|s| (s / n).sqrt()).collect(), switches)
}

pub fn estimate_error(sim: &Simulation) -> [f64; CHANNEL_COUNT] {
    let m = sim.masses();
    std::array::from_fn(|i| sim.estimator().estimated_mass[i] - m[i])
}

pub struct RecalibrationResult {
    /// Largest |estimate − truth| before recalibration, kg.
    pub before: f64,
    /// Largest |estimate − truth| right after every channel calibrated, kg.
    pub after: f64,
    /// Mass of the recalibration threshold pressure in the largest chamber, kg.
    pub bound: f64,
}

/// Accumulates drift with `cycles` noisy inflate/vent cycles, then
/// recalibrates all channels at once.
pub fn recalibration_reset(cycles: usize) -> RecalibrationResult {
    let model = HandModel::default();
    let cfg = SimConfig::default().with_seed(77);
    let mut sim = Simulation::new(model.clone(), cfg.clone()).unwrap();
    let mid: [f64; CHANNEL_COUNT] = std::array::from_fn(|i| {
        mass_for_joint(
            &model,
            ChannelId::ALL[i],
            0.5 * model.joint_limit(ChannelId::ALL[i]),
        )
    });
    for _ in 0..cycles {
        sim.set_setpoints(&mid.map(|m| m * 1.5)).unwrap();
        sim.step().unwrap();
        sim.set_setpoints(&mid.map(|m| m * 0.5)).unwrap();
        sim.step().unwrap();
    }
    let before = estimate_error(&sim)
        .iter()
        .map(|e| e.abs())
        .fold(0.0, f64::max);
    for ch in ChannelId::ALL {
        sim.recalibrate(ch).unwrap();
    }
    let mut done = [false; CHANNEL_COUNT];
    let mut after: f64 = 0.0;
    while !done.iter().all(|d| *d) {
        for e in sim.step().unwrap() {
            match e {
                ControlEvent::Calibrated { channel, .. } => {
                    done[channel.index()] = true;
                    after = after.max(estimate_error(&sim)[channel.index()].abs());
                }
                ControlEvent::Fault {
                    channel, detail, ..
                } => panic!("{channel}: {detail}"),
                _ => {}
            }
        }
    }
    let v_max = ChannelId::ALL
        .iter()
        .map(|c| sim.equilibrium().volumes[c.index()])
        .fold(0.0, f64::max);
    let bound = v_max * cfg.controller.recalibration.threshold / (R_AIR * model.temperature);
    RecalibrationResult {
        before,
        after,
        bound,
    }
}

pub struct ComplianceResult {
    pub mass_unchanged: bool,
    pub pose_changed: bool,
    pub pressure_changed: bool,
    pub valves_stayed_closed: bool,
}

/// Holds a grasp posture in the deadband, then loads every bellow and
/// constrains every fingertip.
pub fn compliance_under_load() -> ComplianceResult {
    let model = HandModel::default();
    let lib = pneumahand::experiments::PostureLibrary::default_for(&model).unwrap();
    let traj = lib.require("Power Sphere").unwrap().trajectory.clone();
    let mut sim = Simulation::new(model.clone(), SimConfig::default()).unwrap();
    sim.replay(traj, 1.0).unwrap();
    sim.run_for(2.0).unwrap();
    // wait for a tick with every valve closed
    while sim.commands().iter().any(|c| *c != ValveCommand::Hold) {
        sim.step().unwrap();
    }
    sim.step().unwrap();
    let masses = sim.masses();
    let joints = sim.equilibrium().pose.joints;
    let pressures = sim.pressures();
    let mut load = ExternalLoad::default();
    for ch in BELLOWS {
        load.torques[ch.index()] = 0.05;
    }
    for (f, c) in load.tip_constraints.iter_mut().enumerate() {
        let base = pneumahand::hand::Finger::ALL[f];
        let spec = model.finger(base);
        *c = Some(nalgebra::Vector2::new(0.8 * spec.total_length(), 0.0));
    }
    sim.set_load(load).unwrap();
    let mut closed = true;
    for _ in 0..300 {
        sim.step().unwrap();
        closed &= sim.commands().iter().all(|c| *c == ValveCommand::Hold);
    }
    ComplianceResult {
        mass_unchanged: sim.masses() == masses,
        pose_changed: sim.equilibrium().pose.joints != joints,
        pressure_changed: sim.pressures() != pressures,
        valves_stayed_closed: closed,
    }
}
