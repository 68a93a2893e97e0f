//! Operator session: owns the simulation, applies client commands at tick
//! boundaries in arrival order and produces replies and decimated telemetry.
//! It does no I/O besides the optional state file; the network service
//! feeds it text and forwards what it returns.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::experiments::{
    kapandji_report, run_bellow_characterization, run_finger_characterization, run_pullout,
    validate_library, EntryKind, ExperimentReport, LibraryEntry, PostureLibrary,
};
use crate::hand::{ChannelId, Finger, HandPose};
use crate::sim::{ControlEvent, SimSnapshot, Simulation};

use super::wire::{
    reply_for, Command, Envelope, ErrorCode, ExperimentKind, Telemetry, TipFrame, WireMessage,
};
use super::{check_version, FORMAT_VERSION};

pub type ClientId = u64;

pub const SESSION_FORMAT: &str = "pneumahand.session";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Live,
    Recording,
    Replaying,
    Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipient {
    Client(ClientId),
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: Recipient,
    pub message: WireMessage,
}

impl Outbound {
    pub fn text(&self) -> String {
        Envelope::new(self.message.clone()).encode()
    }
}

#[derive(Debug, Clone)]
pub struct SessionState {
    /// s
    pub clock: f64,
    pub snapshot: SimSnapshot,
    pub pose: HandPose,
    pub mode: Mode,
    pub clients: usize,
    pub operator: Option<ClientId>,
}

/// What survives a restart: clock, plant and controller state, library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionFile {
    pub format: String,
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    /// s
    pub clock: f64,
    pub snapshot: SimSnapshot,
    pub library: PostureLibrary,
}

impl SessionFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: SessionFile = serde_json::from_str(&text).map_err(|e| {
            let line = e.line();
            Error::from(e).at_line(path, line)
        })?;
        if file.format != SESSION_FORMAT {
            return Err(Error::format(format!(
                "not a session file: format `{}`",
                file.format
            )));
        }
        check_version(&file.version)?;
        Ok(file)
    }

    /// Writes through a temporary file so a crash never leaves half a file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Queued {
    Command {
        client: ClientId,
        id: u64,
        command: Command,
    },
    Reply {
        client: ClientId,
        message: WireMessage,
    },
}

#[derive(Debug, Clone, Copy)]
struct PendingExperiment {
    client: ClientId,
    id: u64,
    kind: ExperimentKind,
}

pub struct Session {
    cfg: Config,
    sim: Simulation,
    library: PostureLibrary,
    clients: BTreeSet<ClientId>,
    next_client: ClientId,
    operator: Option<ClientId>,
    queue: VecDeque<Queued>,
    experiment: Option<PendingExperiment>,
    decimation: u64,
    last_mode: Option<Mode>,
    library_dirty: bool,
}

impl Session {
    /// Resumes from `cfg.session.state_file` when it exists.
    pub fn new(cfg: Config) -> Result<Self> {
        if let Some(path) = &cfg.session.state_file {
            if path.exists() {
                let file = SessionFile::load(path)?;
                return Self::resume(cfg, file);
            }
        }
        let library = PostureLibrary::default_for(&cfg.model)?;
        let sim = Simulation::new(cfg.model.clone(), cfg.sim())?;
        Ok(Self::assemble(cfg, sim, library))
    }

    pub fn resume(cfg: Config, file: SessionFile) -> Result<Self> {
        check_version(&file.version)?;
        if file.config_digest != cfg.digest() {
            return Err(Error::format(
                "session file was written with a different config",
            ));
        }
        let sim = Simulation::restore(cfg.model.clone(), cfg.sim(), &file.snapshot)?;
        Ok(Self::assemble(cfg, sim, file.library))
    }

    fn assemble(cfg: Config, sim: Simulation, library: PostureLibrary) -> Self {
        let decimation = (sim.tick_rate() / cfg.session.telemetry_rate)
            .round()
            .max(1.0) as u64;
        Self {
            cfg,
            sim,
            library,
            clients: BTreeSet::new(),
            next_client: 1,
            operator: None,
            queue: VecDeque::new(),
            experiment: None,
            decimation,
            last_mode: None,
            library_dirty: false,
        }
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn library(&self) -> &PostureLibrary {
        &self.library
    }

    /// Ticks between regular telemetry frames.
    pub fn decimation(&self) -> u64 {
        self.decimation
    }

    pub fn mode(&self) -> Mode {
        if self.experiment.is_some() {
            Mode::Experiment
        } else if self.sim.is_replaying() {
            Mode::Replaying
        } else if self.sim.is_recording() {
            Mode::Recording
        } else if self.operator.is_some() {
            Mode::Live
        } else {
            Mode::Idle
        }
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            clock: self.sim.time(),
            snapshot: self.sim.snapshot(),
            pose: self.sim.equilibrium().pose.clone(),
            mode: self.mode(),
            clients: self.clients.len(),
            operator: self.operator,
        }
    }

    pub fn to_file(&self) -> SessionFile {
        SessionFile {
            format: SESSION_FORMAT.into(),
            version: FORMAT_VERSION.into(),
            config_digest: self.cfg.digest(),
            seed: self.cfg.seed,
            clock: self.sim.time(),
            snapshot: self.sim.snapshot(),
            library: self.library.clone(),
        }
    }

    pub fn connect(&mut self) -> (ClientId, Outbound) {
        let id = self.next_client;
        self.next_client += 1;
        self.clients.insert(id);
        (
            id,
            Outbound {
                to: Recipient::Client(id),
                message: WireMessage::Welcome { client: id },
            },
        )
    }

    /// Drops the client and frees the operator role if it held it.
    pub fn disconnect(&mut self, client: ClientId) {
        self.clients.remove(&client);
        self.queue
            .retain(|q| !matches!(q, Queued::Reply { client: c, .. } if *c == client));
        if self.operator == Some(client) {
            self.operator = None;
        }
    }

    /// Queues one text message for the next tick boundary.
    pub fn submit(&mut self, client: ClientId, text: &str) {
        let q = match Envelope::decode(text) {
            Ok(Envelope {
                message: WireMessage::Command { id, command },
                ..
            }) => Queued::Command {
                client,
                id,
                command,
            },
            Ok(_) => Queued::Reply {
                client,
                message: WireMessage::Error {
                    id: None,
                    code: ErrorCode::Malformed,
                    detail: "clients may only send commands".into(),
                },
            },
            Err(message) => Queued::Reply { client, message },
        };
        self.queue.push_back(q);
    }

    /// Runs a pending experiment, applies queued commands, advances the
    /// simulation one tick and emits telemetry when due or when the mode
    /// changed.
    pub fn step(&mut self) -> Result<Vec<Outbound>> {
        let mut out = Vec::new();
        if let Some(p) = self.experiment.take() {
            let result = self.run_experiment(p.kind).map(|r| {
                let pass = r.verdicts.iter().filter(|v| v.pass).count();
                Some(format!(
                    "{}: {pass}/{} verdicts pass",
                    r.experiment,
                    r.verdicts.len()
                ))
            });
            out.push(Outbound {
                to: Recipient::Client(p.client),
                message: reply_for(p.id, result),
            });
        }
        while let Some(q) = self.queue.pop_front() {
            match q {
                Queued::Reply { client, message } => out.push(Outbound {
                    to: Recipient::Client(client),
                    message,
                }),
                Queued::Command {
                    client,
                    id,
                    command,
                } => {
                    if let Some(message) = self.apply(client, id, command) {
                        out.push(Outbound {
                            to: Recipient::Client(client),
                            message,
                        });
                    }
                }
            }
        }
        for e in self.sim.step()? {
            if let ControlEvent::Fault {
                channel, detail, ..
            } = e
            {
                out.push(Outbound {
                    to: Recipient::All,
                    message: WireMessage::Error {
                        id: None,
                        code: ErrorCode::Rejected,
                        detail: Error::HardwareFault { channel, detail }.to_string(),
                    },
                });
            }
        }
        let mode = self.mode();
        if self.last_mode != Some(mode) || self.sim.tick().is_multiple_of(self.decimation) {
            self.last_mode = Some(mode);
            out.push(Outbound {
                to: Recipient::All,
                message: WireMessage::Telemetry(Box::new(self.telemetry())),
            });
        }
        self.persist()?;
        Ok(out)
    }

    fn persist(&mut self) -> Result<()> {
        let Some(path) = self.cfg.session.state_file.clone() else {
            return Ok(());
        };
        let per_second = self.sim.tick_rate().round() as u64;
        if self.library_dirty || self.sim.tick().is_multiple_of(per_second.max(1)) {
            self.to_file().save(&path)?;
            self.library_dirty = false;
        }
        Ok(())
    }

    pub fn telemetry(&self) -> Telemetry {
        let atm = self.sim.config().plant.atmosphere.pressure;
        let pose = &self.sim.equilibrium().pose;
        let thumb = pose.thumb_tip_point();
        let tol = self.cfg.experiments.kapandji_tolerance;
        Telemetry {
            tick: self.sim.tick(),
            t: self.sim.time(),
            mode: self.mode(),
            clients: self.clients.len(),
            operator: self.operator,
            masses: self.sim.masses(),
            setpoints: *self.sim.setpoints(),
            pressures: self.sim.pressures().map(|p| p - atm),
            joints: pose.joints,
            tips: TipFrame::of_pose(pose),
            kapandji_targets: pose.kapandji_targets.map(|p| [p.x, p.y, p.z]),
            kapandji_reached: pose.kapandji_targets.map(|p| (thumb - p).norm() <= tol),
        }
    }

    fn apply(&mut self, client: ClientId, id: u64, command: Command) -> Option<WireMessage> {
        match command {
            Command::ClaimOperator => match self.operator {
                Some(holder) if holder != client => Some(WireMessage::Error {
                    id: Some(id),
                    code: ErrorCode::RoleConflict,
                    detail: format!("operator role is held by client {holder}"),
                }),
                _ => {
                    self.operator = Some(client);
                    Some(WireMessage::Ack { id, detail: None })
                }
            },
            Command::ReleaseOperator if self.operator == Some(client) => {
                self.operator = None;
                Some(WireMessage::Ack { id, detail: None })
            }
            _ if self.operator != Some(client) => Some(WireMessage::Error {
                id: Some(id),
                code: ErrorCode::NotOperator,
                detail: "command needs the operator role".into(),
            }),
            Command::RunExperiment { experiment } => {
                // answered after the run, at the next tick boundary
                self.experiment = Some(PendingExperiment {
                    client,
                    id,
                    kind: experiment,
                });
                None
            }
            command => Some(reply_for(id, self.apply_control(client, command))),
        }
    }

    fn apply_control(&mut self, client: ClientId, command: Command) -> Result<Option<String>> {
        match command {
            Command::SetSetpoint { channel, mass } => {
                self.sim.set_setpoint(channel, mass).map(|_| None)
            }
            Command::StartRecord { name } => {
                if name.trim().is_empty() {
                    return Err(Error::domain("recording needs a name"));
                }
                self.sim.start_record(name).map(|_| None)
            }
            Command::StopRecord => {
                let traj = self.sim.stop_record()?.with_author(
                    format!("client {client}"),
                    format!("{:.6} s", self.sim.time()),
                );
                let detail = format!("{} samples", traj.samples.len());
                self.library.insert(LibraryEntry {
                    kind: EntryKind::Custom,
                    trajectory: traj,
                });
                self.library_dirty = true;
                Ok(Some(detail))
            }
            Command::Replay { name, scale } => {
                let traj = self.library.require(&name)?.trajectory.clone();
                self.sim.replay(traj, scale).map(|_| None)
            }
            Command::StopReplay => match self.sim.stop_replay() {
                true => Ok(None),
                false => Err(Error::domain("not replaying")),
            },
            Command::Recalibrate { channel } => self.sim.recalibrate(channel).map(|_| None),
            Command::ClaimOperator | Command::ReleaseOperator | Command::RunExperiment { .. } => {
                unreachable!("handled by apply")
            }
        }
    }

    fn run_experiment(&self, kind: ExperimentKind) -> Result<ExperimentReport> {
        let cfg = &self.cfg;
        match kind {
            ExperimentKind::Finger => run_finger_characterization(cfg, Finger::Index),
            ExperimentKind::Bellow => run_bellow_characterization(cfg, ChannelId::PalmBellow),
            ExperimentKind::Kapandji => kapandji_report(cfg, &self.library),
            ExperimentKind::Pullout => run_pullout(cfg, &self.library),
            ExperimentKind::Library => {
                Ok(validate_library(cfg, &self.library).to_experiment_report(cfg))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface::wire::command_text;
    use crate::interface::PoseRecord;

    fn session() -> Session {
        Session::new(Config::default()).unwrap()
    }

    fn replies(out: &[Outbound], client: ClientId) -> Vec<&WireMessage> {
        out.iter()
            .filter(|o| {
                o.to == Recipient::Client(client) && !matches!(o.message, WireMessage::Telemetry(_))
            })
            .map(|o| &o.message)
            .collect()
    }

    #[test]
    fn single_operator() {
        let mut s = session();
        let (a, _) = s.connect();
        let (b, _) = s.connect();
        s.submit(a, &command_text(1, Command::ClaimOperator));
        s.submit(b, &command_text(2, Command::ClaimOperator));
        s.submit(b, &command_text(3, Command::StopReplay));
        let out = s.step().unwrap();
        assert!(matches!(
            replies(&out, a)[..],
            [WireMessage::Ack { id: 1, .. }]
        ));
        let rb = replies(&out, b);
        assert!(matches!(
            rb[0],
            WireMessage::Error {
                id: Some(2),
                code: ErrorCode::RoleConflict,
                ..
            }
        ));
        assert!(matches!(
            rb[1],
            WireMessage::Error {
                id: Some(3),
                code: ErrorCode::NotOperator,
                ..
            }
        ));
        s.submit(a, &command_text(4, Command::ReleaseOperator));
        s.submit(b, &command_text(5, Command::ClaimOperator));
        let out = s.step().unwrap();
        assert!(matches!(
            replies(&out, b)[..],
            [WireMessage::Ack { id: 5, .. }]
        ));
        s.disconnect(b);
        assert_eq!(s.state().operator, None);
    }

    #[test]
    fn malformed_message_gets_error_reply() {
        let mut s = session();
        let (a, _) = s.connect();
        s.submit(a, "{oops");
        s.submit(a, &command_text(1, Command::ClaimOperator));
        let out = s.step().unwrap();
        let r = replies(&out, a);
        assert!(matches!(
            r[0],
            WireMessage::Error {
                code: ErrorCode::Malformed,
                ..
            }
        ));
        assert!(matches!(r[1], WireMessage::Ack { id: 1, .. }));
    }

    #[test]
    fn telemetry_decimated_with_forced_mode_frames() {
        let mut s = session();
        let (a, _) = s.connect();
        let mut ticks = Vec::new();
        let mut modes = Vec::new();
        for k in 0..40 {
            if k == 13 {
                s.submit(a, &command_text(1, Command::ClaimOperator));
            }
            for o in s.step().unwrap() {
                if let WireMessage::Telemetry(t) = o.message {
                    ticks.push(t.tick);
                    modes.push(t.mode);
                }
            }
        }
        assert_eq!(s.decimation(), 10);
        assert_eq!(ticks, [1, 10, 14, 20, 30, 40]);
        assert_eq!(modes[2], Mode::Live);
        assert!(ticks.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn every_command_answered_once() {
        let mut s = session();
        let (a, _) = s.connect();
        let cmds = [
            Command::ClaimOperator,
            Command::SetSetpoint {
                channel: ChannelId::IndexBase,
                mass: 1e-4,
            },
            Command::StartRecord { name: "x".into() },
            Command::StartRecord { name: "y".into() },
            Command::StopRecord,
            Command::Replay {
                name: "nope".into(),
                scale: 1.0,
            },
            Command::RunExperiment {
                experiment: ExperimentKind::Bellow,
            },
        ];
        for (i, c) in cmds.iter().enumerate() {
            s.submit(a, &command_text(i as u64, c.clone()));
        }
        let mut ids = Vec::new();
        for _ in 0..3 {
            for o in s.step().unwrap() {
                match o.message {
                    WireMessage::Ack { id, .. } | WireMessage::Error { id: Some(id), .. } => {
                        ids.push(id)
                    }
                    _ => {}
                }
            }
        }
        ids.sort();
        assert_eq!(ids, (0..cmds.len() as u64).collect::<Vec<_>>());
    }

    #[test]
    fn setpoint_echoes_in_telemetry() {
        let mut s = session();
        let (a, _) = s.connect();
        s.submit(a, &command_text(1, Command::ClaimOperator));
        s.submit(
            a,
            &command_text(
                2,
                Command::SetSetpoint {
                    channel: ChannelId::MiddleTip,
                    mass: 2e-4,
                },
            ),
        );
        let out = s.step().unwrap();
        let t = out
            .iter()
            .find_map(|o| match &o.message {
                WireMessage::Telemetry(t) => Some(t),
                _ => None,
            })
            .unwrap();
        assert_eq!(t.setpoints[ChannelId::MiddleTip.index()], 2e-4);
    }

    /// Live slider moves recorded, then replayed from an identically seeded
    /// session at the same tick, reproduce the live pose trace exactly.
    #[test]
    fn record_then_replay_matches_live_trace() {
        let moves = [
            (5u64, ChannelId::IndexBase, 1.2e-4),
            (40, ChannelId::ThumbMiddle, 0.9e-4),
            (90, ChannelId::PalmBellow, 3.0e-4),
        ];
        let mut live = session();
        let (a, _) = live.connect();
        live.submit(a, &command_text(0, Command::ClaimOperator));
        live.submit(
            a,
            &command_text(
                1,
                Command::StartRecord {
                    name: "live".into(),
                },
            ),
        );
        let mut live_trace = Vec::new();
        for k in 0..150u64 {
            for (at, ch, m) in moves {
                if k == at {
                    live.submit(
                        a,
                        &command_text(
                            10 + k,
                            Command::SetSetpoint {
                                channel: ch,
                                mass: m,
                            },
                        ),
                    );
                }
            }
            live.step().unwrap();
            live_trace.push(PoseRecord::of(live.simulation()));
        }
        live.submit(a, &command_text(2, Command::StopRecord));
        live.step().unwrap();
        let traj = live.library().get("live").unwrap().trajectory.clone();
        assert_eq!(traj.samples.len(), 4);

        let mut again = session();
        again.library.insert(LibraryEntry {
            kind: EntryKind::Custom,
            trajectory: traj,
        });
        let (b, _) = again.connect();
        again.submit(b, &command_text(0, Command::ClaimOperator));
        again.submit(
            b,
            &command_text(
                1,
                Command::Replay {
                    name: "live".into(),
                    scale: 1.0,
                },
            ),
        );
        for rec in &live_trace {
            again.step().unwrap();
            assert_eq!(&PoseRecord::of(again.simulation()), rec);
        }
    }

    #[test]
    fn state_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = Config::default();
        cfg.session.state_file = Some(dir.path().join("session.json"));
        let mut s = Session::new(cfg.clone()).unwrap();
        let (a, _) = s.connect();
        s.submit(a, &command_text(0, Command::ClaimOperator));
        s.submit(
            a,
            &command_text(
                1,
                Command::StartRecord {
                    name: "kept".into(),
                },
            ),
        );
        s.run_until(10);
        s.submit(a, &command_text(2, Command::StopRecord));
        s.run_until(300);
        let back = Session::new(cfg).unwrap();
        assert_eq!(back.simulation().tick(), 300);
        assert!(back.library().get("kept").is_some());
        assert_eq!(back.library(), s.library());
    }

    impl Session {
        fn run_until(&mut self, tick: u64) {
            while self.sim.tick() < tick {
                self.step().unwrap();
            }
        }
    }
}
