use serde::{Deserialize, Serialize};

use super::EpisodeError;

/// Rewards for each kind of trip decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardTable {
    /// Primary device trips inside its window.
    pub trip: f64,
    /// Backup trips after the primary missed its deadline.
    pub backup: f64,
    /// False-positive or miscoordinated trip.
    pub bad: f64,
    /// Primary device misses its deadline.
    pub miss: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        RewardTable { trip: 10.0, backup: 5.0, bad: -10.0, miss: -10.0 }
    }
}

impl RewardTable {
    pub const PRESETS: [&'static str; 3] = ["default", "strict", "unit"];

    /// Named reward designs: `default`, `strict` (no backup credit, doubled
    /// penalties) and `unit` (+1 / -1 for every decision).
    pub fn preset(name: &str) -> Option<RewardTable> {
        match name {
            "default" => Some(RewardTable::default()),
            "strict" => Some(RewardTable { trip: 10.0, backup: 0.0, bad: -20.0, miss: -20.0 }),
            "unit" => Some(RewardTable { trip: 1.0, backup: 1.0, bad: -1.0, miss: -1.0 }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub step_seconds: f64,
    pub steps_per_episode: usize,
    pub primary_window_seconds: f64,
    pub backup_margin_seconds: f64,
    /// Steps run after the fault is isolated before the episode ends.
    pub post_clear_hold_steps: usize,
    /// Observation window length H.
    pub history: usize,
    pub rewards: RewardTable,
    /// Keep every step's device samples in the episode record.
    pub record_observations: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            step_seconds: 1.0 / 60.0,
            steps_per_episode: 180,
            primary_window_seconds: 0.3,
            backup_margin_seconds: 0.3,
            post_clear_hold_steps: 30,
            history: 10,
            rewards: RewardTable::default(),
            record_observations: false,
        }
    }
}

impl EpisodeConfig {
    fn whole_steps(&self, seconds: f64, what: &str) -> Result<usize, EpisodeError> {
        let steps = seconds / self.step_seconds;
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-6 * steps.max(1.0) {
            return Err(EpisodeError::Config(format!(
                "{what} of {seconds} s is not a whole number of {} s steps",
                self.step_seconds
            )));
        }
        Ok(rounded as usize)
    }

    pub fn check(&self) -> Result<(), EpisodeError> {
        let positive = [
            (self.step_seconds, "step length"),
            (self.primary_window_seconds, "primary window"),
            (self.backup_margin_seconds, "backup margin"),
        ];
        for (v, what) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EpisodeError::Config(format!("{what} must be positive, got {v}")));
            }
        }
        if self.steps_per_episode == 0 || self.history == 0 {
            return Err(EpisodeError::Config("episode length and history must be at least one step".into()));
        }
        self.whole_steps(self.primary_window_seconds, "primary window")?;
        self.whole_steps(self.backup_margin_seconds, "backup margin")?;
        Ok(())
    }

    pub fn primary_window_steps(&self) -> usize {
        (self.primary_window_seconds / self.step_seconds).round() as usize
    }

    pub fn backup_margin_steps(&self) -> usize {
        (self.backup_margin_seconds / self.step_seconds).round() as usize
    }
}
