//! Vent-and-reset procedure that clears accumulated estimator drift.

use std::collections::VecDeque;

use super::controller::RecalibrationConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecalibrationStatus {
    Venting,
    Vented,
    TimedOut,
}

/// Tracks one channel while it vents. The channel counts as vented once the
/// mean measured gauge pressure over the hold window is below threshold; a
/// single noisy reading is not a reliable test at low pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct Recalibration {
    started: f64,
    window: VecDeque<f64>,
    window_len: usize,
}

impl Recalibration {
    pub fn start(now: f64, cfg: &RecalibrationConfig, tick_rate: f64) -> Self {
        let window_len = ((cfg.hold * tick_rate).round() as usize).max(1);
        Self {
            started: now,
            window: VecDeque::with_capacity(window_len),
            window_len,
        }
    }

    pub fn started(&self) -> f64 {
        self.started
    }

    pub fn observe(
        &mut self,
        now: f64,
        measured_gauge: f64,
        cfg: &RecalibrationConfig,
    ) -> RecalibrationStatus {
        if self.window.len() == self.window_len {
            self.window.pop_front();
        }
        self.window.push_back(measured_gauge);
        if self.window.len() == self.window_len {
            let mean = self.window.iter().sum::<f64>() / self.window_len as f64;
            if mean < cfg.threshold {
                return RecalibrationStatus::Vented;
            }
        }
        if now - self.started > cfg.timeout {
            RecalibrationStatus::TimedOut
        } else {
            RecalibrationStatus::Venting
        }
    }
}
