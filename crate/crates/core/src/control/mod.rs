//! Air-mass control: estimation from noisy pressure, bang-bang valve
//! switching, recalibration, and synergy record/replay.

mod controller;
mod recalibration;
mod trajectory;

pub use controller::{
    apply_command, control_step, desired_command, estimate_step, ControllerConfig,
    MassEstimatorState, RecalibrationConfig, ValveCommand,
};
pub use recalibration::{Recalibration, RecalibrationStatus};
pub use trajectory::{
    replay, MassTrajectory, Recorder, Replay, TrajectorySample, CHANGE_THRESHOLD,
};
