//! Workbench configuration: one TOML file with hand, plant, sensor,
//! controller, experiment and session sections. Every section is optional
//! and falls back to the defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actuators::{fit_moment_arm, CalibrationTable};
use crate::control::ControllerConfig;
use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;
use crate::hand::{ChannelId, ChannelKind, HandModel};
use crate::interface::SessionConfig;
use crate::pneumatics::{PlantConfig, PressureSensorModel};
use crate::sim::SimConfig;

/// Environment variable naming the config file when no path is given.
pub const CONFIG_ENV: &str = "PNEUMAHAND_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Base seed of every random stream; the sensor stream also mixes in
    /// `sensor.noise_seed`.
    pub seed: u64,
    pub model: HandModel,
    pub plant: PlantConfig,
    pub sensor: PressureSensorModel,
    pub controller: ControllerConfig,
    pub experiments: ExperimentConfig,
    pub session: SessionConfig,
}

impl Default for Config {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            seed: 0,
            model: HandModel::default(),
            plant: sim.plant,
            sensor: sim.sensor,
            controller: sim.controller,
            experiments: ExperimentConfig::default(),
            session: SessionConfig::default(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|b| *b == b'\n')
        .count()
        + 1
}

impl Config {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate().map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: None,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: None,
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Explicit path first, then the environment variable, then defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match Self::resolve_path(path) {
            Some(p) => Self::load(&p),
            None => Ok(Self::default()),
        }
    }

    pub fn resolve_path(path: Option<&Path>) -> Option<PathBuf> {
        path.map(Path::to_path_buf).or_else(|| {
            std::env::var_os(CONFIG_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.sim().validate()?;
        self.experiments.validate()?;
        self.session.validate()
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            plant: self.plant.clone(),
            sensor: PressureSensorModel {
                noise_seed: self.sensor.noise_seed ^ self.seed,
                ..self.sensor
            },
            controller: self.controller.clone(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::format(e.to_string()))
    }

    /// SHA-256 of the canonical JSON encoding, hex.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Fits the moment arm of the bellow behind `channel` to `table` and
/// returns the updated config.
pub fn fit_bellow(cfg: &Config, channel: ChannelId, table: &CalibrationTable) -> Result<Config> {
    let mut out = cfg.clone();
    let joint = out
        .model
        .bellow_mut(channel)
        .ok_or_else(|| Error::domain(format!("{channel} is not a bellow channel")))?;
    joint.bellow.moment_arm_table = fit_moment_arm(table, &joint.bellow)?;
    out.validate()?;
    Ok(out)
}

/// TOML holding only the `[model]` entry that contains `channel`'s actuator,
/// ready to paste into a config file.
pub fn model_fragment(cfg: &Config, channel: ChannelId) -> Result<String> {
    let m = &cfg.model;
    let (key, value) = match channel.kind() {
        ChannelKind::ThumbBellow(_) | ChannelKind::ThumbTip => {
            ("thumb", toml::Value::try_from(&m.thumb))
        }
        ChannelKind::Palm => ("palm", toml::Value::try_from(&m.palm)),
        ChannelKind::Abduction(_) => ("abduction", toml::Value::try_from(&m.abduction)),
        ChannelKind::FingerBase(_) | ChannelKind::FingerTip(_) => {
            ("fingers", toml::Value::try_from(m.fingers))
        }
    };
    let value = value.map_err(|e| Error::format(e.to_string()))?;
    let mut model = toml::Table::new();
    model.insert(key.into(), value);
    let mut root = toml::Table::new();
    root.insert("model".into(), toml::Value::Table(model));
    toml::to_string_pretty(&root).map_err(|e| Error::format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = Config::default();
        let text = cfg.to_toml_string().unwrap();
        let back = Config::from_toml_str(&text, Path::new("x.toml")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn empty_file_is_default() {
        let cfg = Config::from_toml_str("", Path::new("e.toml")).unwrap();
        assert_eq!(cfg, Config::default());
    }

    #[test]
    fn unknown_key_names_file_and_line() {
        let text = "seed = 3\n\n[plant]\nsubsteps = 2\nbogus = 1\n";
        let err = Config::from_toml_str(text, Path::new("bad.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("bad.toml:5:"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        let err = Config::from_toml_str("[controller]\ntick_rate = 1000.0\n", Path::new("c.toml"))
            .unwrap_err();
        assert!(err.to_string().contains("tick rate"), "{err}");
    }

    #[test]
    fn digest_tracks_content() {
        let a = Config::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn fitted_fragment_reproduces_table() {
        use crate::actuators::{bellow_torque, CalibrationRow};
        let cfg = Config::default();
        let arms = [(0.0, 0.031), (10.0, 0.027), (20.0, 0.022), (30.0, 0.012)];
        let area = cfg.model.palm.bellow.pouch_area;
        let mut rows = Vec::new();
        for (deg, arm) in arms {
            for kpa in [0.0, 50.0, 125.0, 250.0] {
                rows.push(CalibrationRow {
                    angle_deg: deg,
                    pressure_kpa: kpa,
                    torque_nm: kpa * 1e3 * area * arm,
                });
            }
        }
        let table = CalibrationTable::new(rows.clone(), "synthetic").unwrap();
        let fitted = fit_bellow(&cfg, ChannelId::PalmBellow, &table).unwrap();
        let text = model_fragment(&fitted, ChannelId::PalmBellow).unwrap();
        let back = Config::from_toml_str(&text, Path::new("fragment.toml")).unwrap();
        for r in rows {
            let t = bellow_torque(
                &back.model.palm.bellow,
                r.pressure_kpa * 1e3,
                r.angle_deg.to_radians(),
            )
            .unwrap();
            assert!((t - r.torque_nm).abs() < 1e-9, "{r:?} -> {t}");
        }
        assert!(fit_bellow(&cfg, ChannelId::IndexTip, &table).is_err());
    }
}
