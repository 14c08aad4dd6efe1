use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{latest, Agent, AgentContext, AgentError};
use crate::episode::Observations;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceZone {
    /// Reach along the characteristic angle (ohm).
    pub reach_ohm: f64,
    pub delay_s: f64,
}

/// Mho distance element with one or more zones sharing an angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSettings {
    pub angle_deg: f64,
    pub zones: Vec<DistanceZone>,
}

impl DistanceSettings {
    pub fn reach(&self, zone: usize) -> Complex64 {
        Complex64::from_polar(self.zones[zone].reach_ohm, self.angle_deg.to_radians())
    }

    pub fn check(&self) -> Result<(), String> {
        if self.zones.is_empty() {
            return Err("distance element needs at least one zone".into());
        }
        for z in &self.zones {
            if !(z.reach_ohm > 0.0 && z.reach_ohm.is_finite()) || !(z.delay_s >= 0.0) {
                return Err(format!("zone reach {} / delay {} invalid", z.reach_ohm, z.delay_s));
            }
        }
        Ok(())
    }
}

/// First zone whose mho circle (through the origin and `Zr`) contains `z`,
/// boundary included. `None` for an undefined impedance.
pub fn distance_operate(settings: &DistanceSettings, z: Option<Complex64>) -> Option<usize> {
    let z = z?;
    (0..settings.zones.len()).find(|&k| {
        let zr = settings.reach(k);
        (z - zr / 2.0).norm() <= zr.norm() / 2.0 * (1.0 + 1e-12)
    })
}

/// Distance relay over the three phase-to-ground loops.
#[derive(Debug, Clone)]
pub struct DistanceAgent {
    device: String,
    pub settings: DistanceSettings,
    /// Continuous time each zone has seen a fault (s), `None` when out of zone.
    timers: Vec<Option<f64>>,
    operated: bool,
}

impl DistanceAgent {
    pub fn new(device: &str, settings: DistanceSettings) -> DistanceAgent {
        let n = settings.zones.len();
        DistanceAgent { device: device.to_string(), settings, timers: vec![None; n], operated: false }
    }
}

impl Agent for DistanceAgent {
    fn device(&self) -> &str {
        &self.device
    }

    fn reset(&mut self, _ctx: &AgentContext) {
        self.timers.iter_mut().for_each(|t| *t = None);
        self.operated = false;
    }

    fn observe(&mut self, obs: &Observations) -> Result<(), AgentError> {
        let sample = latest(obs, &self.device, &self.device)?;
        let zone = sample.z_ohm.iter().filter_map(|&z| distance_operate(&self.settings, z)).min();
        for (k, timer) in self.timers.iter_mut().enumerate() {
            // zone circles are nested when reaches grow, so an inner-zone
            // fault also times the outer zones
            let seen = zone.is_some_and(|z| z <= k);
            *timer = match (*timer, seen) {
                (_, false) => None,
                (None, true) => Some(0.0),
                (Some(t), true) => Some(t + obs.step_seconds),
            };
            if timer.is_some_and(|t| t >= self.settings.zones[k].delay_s - 1e-9) {
                self.operated = true;
            }
        }
        Ok(())
    }

    fn act(&mut self) -> bool {
        self.operated
    }
}
