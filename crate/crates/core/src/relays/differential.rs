use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{latest, Agent, AgentContext, AgentError, Requirements};
use crate::episode::Observations;

/// Percentage-restrained differential over the zone between two devices.
/// The agent trips `inner`; `outer` is the far boundary, whose measured
/// current flows out of the zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentialSettings {
    pub inner: String,
    pub outer: String,
    pub slope: f64,
    pub min_operate_amps: f64,
}

impl DifferentialSettings {
    pub fn check(&self) -> Result<(), String> {
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return Err(format!("slope {} must lie in (0, 1)", self.slope));
        }
        if !(self.min_operate_amps >= 0.0) {
            return Err(format!("minimum operate current {} must be non-negative", self.min_operate_amps));
        }
        if self.inner == self.outer {
            return Err("differential boundary needs two distinct devices".into());
        }
        Ok(())
    }
}

/// Operates when any phase satisfies
/// `|I_in + I_out| > max(min_operate, k (|I_in| + |I_out|) / 2)` with both
/// currents referenced into the zone.
pub fn differential_operate(settings: &DifferentialSettings, i_in: &[Complex64; 3], i_out: &[Complex64; 3]) -> bool {
    (0..3).any(|k| {
        let diff = (i_in[k] + i_out[k]).norm();
        let restraint = settings.slope * (i_in[k].norm() + i_out[k].norm()) / 2.0;
        diff > settings.min_operate_amps.max(restraint)
    })
}

#[derive(Debug, Clone)]
pub struct DifferentialAgent {
    pub settings: DifferentialSettings,
    operated: bool,
}

impl DifferentialAgent {
    pub fn new(settings: DifferentialSettings) -> DifferentialAgent {
        DifferentialAgent { settings, operated: false }
    }
}

impl Agent for DifferentialAgent {
    fn device(&self) -> &str {
        &self.settings.inner
    }

    fn requirements(&self) -> Requirements {
        Requirements { devices: vec![self.settings.inner.clone(), self.settings.outer.clone()], window: 1 }
    }

    fn reset(&mut self, _ctx: &AgentContext) {
        self.operated = false;
    }

    fn observe(&mut self, obs: &Observations) -> Result<(), AgentError> {
        let s = &self.settings;
        let a = latest(obs, &s.inner, &s.inner)?;
        let b = latest(obs, &s.inner, &s.outer)?;
        let i_in = std::array::from_fn(|k| a.current_phasor(k));
        let i_out = std::array::from_fn(|k| -b.current_phasor(k));
        self.operated = differential_operate(s, &i_in, &i_out);
        Ok(())
    }

    fn act(&mut self) -> bool {
        self.operated
    }
}
