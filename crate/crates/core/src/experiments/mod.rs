//! Characterization protocols, hand-level evaluations and the posture library.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::CONTACT_TOLERANCE;
use crate::par::Execution;
use crate::pneumatics::{keyed_rng, PressureSensorModel};

pub mod authoring;
pub mod characterization;
pub mod evaluation;
pub mod library;
pub mod pullout;
pub mod report;

pub use characterization::{run_bellow_characterization, run_finger_characterization};
pub use evaluation::{
    kapandji_report, run_kapandji, validate_library, KapandjiOutcome, LibraryReport,
};
pub use library::{EntryKind, LibraryEntry, PostureLibrary, IN_HAND_SYNERGIES, TAXONOMY};
pub use pullout::{run_pullout, PulloutConfig, PulloutDirection};
pub use report::{ExperimentReport, ReportRow, Stat, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub repetitions: u32,
    /// Thumb-tip-to-target distance counted as a touch, m.
    pub kapandji_tolerance: f64,
    /// Closed-loop settling time after a replayed trajectory ends, s.
    pub settle: f64,
    pub execution: Execution,
    pub pullout: PulloutConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            repetitions: 5,
            kapandji_tolerance: CONTACT_TOLERANCE,
            settle: 2.0,
            execution: Execution::default(),
            pullout: PulloutConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::domain("experiments need at least one repetition"));
        }
        if !(self.kapandji_tolerance >= 0.0 && self.settle >= 0.0) {
            return Err(Error::domain(
                "tolerance and settle time must be non-negative",
            ));
        }
        self.pullout.validate()
    }
}

/// Identifies one independent noise draw within an experiment.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NoiseKey {
    seed: u64,
    a: u64,
    b: u64,
}

impl NoiseKey {
    pub(crate) fn new(seed: u64, a: u64, b: u64) -> Self {
        Self { seed, a, b }
    }

    pub(crate) fn normal(self) -> f64 {
        // offset keeps experiment streams apart from the sensor stream
        let mut rng = keyed_rng(self.seed ^ 0x5EED_0FE4_0E41, self.a, self.b);
        StandardNormal.sample(&mut rng)
    }
}

/// Gauge pressure actually reached when regulating to `setpoint` on a
/// noisy sensor. Zero means vented to atmosphere and is exact.
pub(crate) fn realized_pressure(
    setpoint: f64,
    max: f64,
    sensor: &PressureSensorModel,
    key: NoiseKey,
) -> f64 {
    if setpoint <= 0.0 {
        return 0.0;
    }
    (setpoint + sensor.sigma() * key.normal()).clamp(0.0, max)
}
