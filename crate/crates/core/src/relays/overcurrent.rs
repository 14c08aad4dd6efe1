use serde::{Deserialize, Deserializer, Serialize};

use super::{latest, Agent, AgentContext, AgentError, Curve, CurveIntegrator};
use crate::episode::Observations;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcMode {
    Instantaneous,
    #[default]
    InverseTime,
}

/// Phase overcurrent settings. Any phase above its pickup operates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcSettings {
    /// Per-phase pickup (A); a single number applies to all phases.
    #[serde(deserialize_with = "per_phase")]
    pub pickup_amps: [f64; 3],
    #[serde(default)]
    pub mode: OcMode,
    #[serde(default = "default_curve")]
    pub curve: Curve,
    #[serde(default = "default_tds")]
    pub time_dial: f64,
}

fn default_curve() -> Curve {
    Curve::VeryInverse
}

fn default_tds() -> f64 {
    1.0
}

fn per_phase<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 3], D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum P {
        One(f64),
        Three([f64; 3]),
    }
    Ok(match P::deserialize(d)? {
        P::One(x) => [x; 3],
        P::Three(a) => a,
    })
}

impl OcSettings {
    pub fn inverse(pickup: f64, curve: Curve, time_dial: f64) -> OcSettings {
        OcSettings { pickup_amps: [pickup; 3], mode: OcMode::InverseTime, curve, time_dial }
    }

    pub fn instantaneous(pickup: f64) -> OcSettings {
        OcSettings { pickup_amps: [pickup; 3], mode: OcMode::Instantaneous, curve: Curve::VeryInverse, time_dial: 1.0 }
    }

    pub fn check(&self) -> Result<(), String> {
        if !self.pickup_amps.iter().all(|&p| p > 0.0 && p.is_finite()) {
            return Err(format!("pickup {:?} must be positive", self.pickup_amps));
        }
        if !(self.time_dial > 0.0 && self.time_dial.is_finite()) {
            return Err(format!("time dial {} must be positive", self.time_dial));
        }
        Ok(())
    }

    /// Largest phase current multiple of pickup.
    pub fn multiple(&self, currents: [f64; 3]) -> f64 {
        (0..3).map(|k| currents[k] / self.pickup_amps[k]).fold(0.0, f64::max)
    }

    /// Operate time (s) under a constant current, `None` below pickup.
    pub fn operate_time(&self, currents: [f64; 3]) -> Option<f64> {
        let m = self.multiple(currents);
        match self.mode {
            OcMode::Instantaneous => (m > 1.0).then_some(0.0),
            OcMode::InverseTime => self.curve.unit_time(m).map(|t| t * self.time_dial),
        }
    }
}

/// Overcurrent relay on one device.
#[derive(Debug, Clone)]
pub struct OcAgent {
    device: String,
    pub settings: OcSettings,
    integrator: CurveIntegrator,
    currents: [f64; 3],
    operated: bool,
}

impl OcAgent {
    pub fn new(device: &str, settings: OcSettings) -> OcAgent {
        OcAgent {
            device: device.to_string(),
            settings,
            integrator: CurveIntegrator::default(),
            currents: [0.0; 3],
            operated: false,
        }
    }

    /// Stored phase current magnitudes (A).
    pub fn currents(&self) -> [f64; 3] {
        self.currents
    }

    pub fn progress(&self) -> f64 {
        self.integrator.progress
    }
}

impl Agent for OcAgent {
    fn device(&self) -> &str {
        &self.device
    }

    fn reset(&mut self, _ctx: &AgentContext) {
        self.integrator = CurveIntegrator::default();
        self.currents = [0.0; 3];
        self.operated = false;
    }

    fn observe(&mut self, obs: &Observations) -> Result<(), AgentError> {
        self.currents = latest(obs, &self.device, &self.device)?.i_a;
        let s = &self.settings;
        let m = s.multiple(self.currents);
        self.operated = match s.mode {
            OcMode::Instantaneous => m > 1.0,
            OcMode::InverseTime => self.integrator.step(m, s.curve, s.time_dial, obs.step_seconds) || self.operated,
        };
        Ok(())
    }

    fn act(&mut self) -> bool {
        self.operated
    }
}
