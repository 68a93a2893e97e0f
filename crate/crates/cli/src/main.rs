//! `pneumahand`: simulate synergies, run the characterization and evaluation
//! protocols, fit bellow calibrations and serve operator sessions.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pneumahand::actuators::CalibrationTable;
use pneumahand::config::{fit_bellow, model_fragment, Config, CONFIG_ENV};
use pneumahand::control::MassTrajectory;
use pneumahand::experiments::{
    kapandji_report, run_bellow_characterization, run_finger_characterization, run_pullout,
    validate_library, ExperimentReport, PostureLibrary,
};
use pneumahand::hand::{ChannelId, Finger};
use pneumahand::interface::{
    read_trajectory, write_pose_trace, write_trajectory, FileHeader, PoseRecord, POSE_FORMAT,
};
use pneumahand::sim::Simulation;
use pneumahand::{Error, Result};

mod serve;

#[derive(Parser)]
#[command(name = "pneumahand", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// TOML config; falls back to $PNEUMAHAND_CONFIG, then built-in defaults.
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = Config::resolve(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a synergy through the closed loop and write its pose trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Library entry name, or a trajectory file.
        #[arg(long)]
        synergy: String,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Closed-loop time after the trajectory ends, s.
        #[arg(long)]
        settle: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an actuator characterization protocol.
    Characterize {
        rig: Rig,
        #[command(flatten)]
        common: Common,
        /// Finger for the finger rig.
        #[arg(long, default_value = "index")]
        finger: FingerArg,
        /// Bellow channel for the bellow rig.
        #[arg(long, default_value = "thumb_proximal")]
        channel: ChannelId,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a hand-level evaluation.
    Evaluate {
        what: Evaluation,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the WebSocket session service.
    Serve {
        #[command(flatten)]
        common: Common,
        /// 0 picks a free port; the bound address is printed.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Overrides `session.state_file`.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Fit calibration data into a config fragment.
    Calibrate {
        #[command(subcommand)]
        what: Calibration,
    },
    /// Write the default config.
    InitConfig {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Rig {
    Finger,
    Bellow,
}

#[derive(Clone, Copy, ValueEnum)]
enum FingerArg {
    Index,
    Middle,
    Ring,
    Little,
}

impl From<FingerArg> for Finger {
    fn from(f: FingerArg) -> Self {
        match f {
            FingerArg::Index => Finger::Index,
            FingerArg::Middle => Finger::Middle,
            FingerArg::Ring => Finger::Ring,
            FingerArg::Little => Finger::Little,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Evaluation {
    Kapandji,
    Pullout,
    Library,
}

#[derive(Subcommand)]
enum Calibration {
    /// Fit a bellow moment-arm table from an angle/pressure/torque CSV.
    FitBellow {
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value = "thumb_proximal")]
        channel: ChannelId,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    s.split('-')
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("-")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_report(report: &ExperimentReport, out: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(out)?;
    report.write_csv(create(&out.join(format!("{stem}.csv")))?)?;
    fs::write(out.join(format!("{stem}.json")), report.to_json()?)?;
    for v in &report.verdicts {
        println!(
            "{} {}: {} (expected {}, tolerance {})",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.actual,
            v.expected,
            v.tolerance
        );
    }
    Ok(())
}

fn load_synergy(cfg: &Config, synergy: &str) -> Result<MassTrajectory> {
    let path = Path::new(synergy);
    if path.is_file() {
        let file = File::open(path)?;
        return Ok(read_trajectory(BufReader::new(file), path)?.1);
    }
    let lib = PostureLibrary::default_for(&cfg.model)?;
    Ok(lib.require(synergy)?.trajectory.clone())
}

fn simulate(
    cfg: &Config,
    synergy: &str,
    scale: f64,
    settle: Option<f64>,
    out: &Path,
) -> Result<()> {
    let traj = load_synergy(cfg, synergy)?;
    let settle = settle.unwrap_or(cfg.experiments.settle);
    if settle.is_nan() || settle < 0.0 {
        return Err(Error::Domain("settle time must be non-negative".into()));
    }
    let mut sim = Simulation::new(cfg.model.clone(), cfg.sim())?;
    sim.replay(traj.clone(), scale)?;
    let mut records = vec![PoseRecord::of(&sim)];
    while sim.is_replaying() {
        sim.step()?;
        records.push(PoseRecord::of(&sim));
    }
    let extra = (settle * sim.tick_rate()).round() as u64;
    for _ in 0..extra {
        sim.step()?;
        records.push(PoseRecord::of(&sim));
    }
    fs::create_dir_all(out)?;
    let stem = slug(&traj.name);
    let header = FileHeader::new(POSE_FORMAT, traj.name.clone(), cfg.digest(), cfg.seed);
    let trace = out.join(format!("{stem}.pose.jsonl"));
    let mut w = create(&trace)?;
    write_pose_trace(&mut w, &header, &records)?;
    w.flush()?;
    let mut w = create(&out.join(format!("{stem}.trajectory.jsonl")))?;
    write_trajectory(&mut w, &traj, &cfg.digest(), cfg.seed)?;
    w.flush()?;
    println!("{} ticks written to {}", records.len(), trace.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Simulate {
            common,
            synergy,
            scale,
            settle,
            out,
        } => simulate(&common.load()?, &synergy, scale, settle, &out),
        Cmd::Characterize {
            rig,
            common,
            finger,
            channel,
            out,
        } => {
            let cfg = common.load()?;
            match rig {
                Rig::Finger => {
                    let f = Finger::from(finger);
                    let r = run_finger_characterization(&cfg, f)?;
                    write_report(&r, &out, &format!("finger_{}", f.name()))
                }
                Rig::Bellow => {
                    let r = run_bellow_characterization(&cfg, channel)?;
                    write_report(&r, &out, &format!("bellow_{}", channel.name()))
                }
            }
        }
        Cmd::Evaluate { what, common, out } => {
            let cfg = common.load()?;
            let lib = PostureLibrary::default_for(&cfg.model)?;
            match what {
                Evaluation::Kapandji => {
                    let r = kapandji_report(&cfg, &lib)?;
                    println!("score: {}/10", r.summary["score"]);
                    println!(
                        "score with palm disabled: {}/10",
                        r.summary["score_palm_disabled"]
                    );
                    write_report(&r, &out, "kapandji")
                }
                Evaluation::Pullout => write_report(&run_pullout(&cfg, &lib)?, &out, "pullout"),
                Evaluation::Library => {
                    let lr = validate_library(&cfg, &lib);
                    println!("entries passed: {}/{}", lr.passed_count(), lr.entries.len());
                    fs::create_dir_all(&out)?;
                    fs::write(
                        out.join("library_distances.json"),
                        serde_json::to_string_pretty(&lr)?,
                    )?;
                    write_report(&lr.to_experiment_report(&cfg), &out, "library")
                }
            }
        }
        Cmd::Serve {
            common,
            port,
            host,
            state,
        } => {
            let mut cfg = common.load()?;
            if state.is_some() {
                cfg.session.state_file = state;
            }
            serve::serve(cfg, &host, port)
        }
        Cmd::Calibrate {
            what:
                Calibration::FitBellow {
                    table,
                    channel,
                    config,
                    out,
                },
        } => {
            let cfg = Config::resolve(config.as_deref())?;
            let file = File::open(&table).map_err(|e| Error::Config {
                path: table.clone(),
                line: None,
                message: e.to_string(),
            })?;
            let t = CalibrationTable::read_csv(BufReader::new(file), table.display().to_string())
                .map_err(|e| Error::Config {
                path: table.clone(),
                line: None,
                message: e.to_string(),
            })?;
            let fitted = fit_bellow(&cfg, channel, &t)?;
            let text = model_fragment(&fitted, channel)?;
            let mut w = create(&out)?;
            writeln!(
                w,
                "# moment arm of {channel} fitted from {}",
                table.display()
            )?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Cmd::InitConfig { out, force } => {
            if out.exists() && !force {
                return Err(Error::Domain(format!(
                    "{} exists; pass --force to overwrite",
                    out.display()
                )));
            }
            let mut w = create(&out)?;
            w.write_all(Config::default().to_toml_string()?.as_bytes())?;
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
