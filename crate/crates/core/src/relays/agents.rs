use serde::{Deserialize, Serialize};

use super::{Agent, AgentContext, AgentError, Requirements};
use crate::episode::{Expectation, Observation, Observations};

/// Never trips.
#[derive(Debug, Clone)]
pub struct HoldAgent {
    device: String,
}

impl HoldAgent {
    pub fn new(device: &str) -> HoldAgent {
        HoldAgent { device: device.to_string() }
    }
}

impl Agent for HoldAgent {
    fn device(&self) -> &str {
        &self.device
    }

    fn observe(&mut self, _obs: &Observations) -> Result<(), AgentError> {
        Ok(())
    }

    fn act(&mut self) -> bool {
        false
    }
}

/// Trips at a fixed step regardless of measurements.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    device: String,
    /// Step at which the breaker opens.
    pub trip_step: Option<usize>,
    next_step: usize,
}

impl ScriptedAgent {
    pub fn new(device: &str, trip_step: Option<usize>) -> ScriptedAgent {
        ScriptedAgent { device: device.to_string(), trip_step, next_step: 0 }
    }
}

impl Agent for ScriptedAgent {
    fn device(&self) -> &str {
        &self.device
    }

    fn reset(&mut self, _ctx: &AgentContext) {
        self.next_step = 0;
    }

    fn observe(&mut self, obs: &Observations) -> Result<(), AgentError> {
        self.next_step = obs.step + 1;
        Ok(())
    }

    fn act(&mut self) -> bool {
        self.trip_step.is_some_and(|s| self.next_step >= s)
    }
}

/// Trips exactly as the episode expects: a primary device opens on the
/// first step after the fault appears, every other device holds.
#[derive(Debug, Clone)]
pub struct OracleAgent {
    device: String,
    trip_after: Option<usize>,
    last_step: usize,
}

impl OracleAgent {
    pub fn new(device: &str) -> OracleAgent {
        OracleAgent { device: device.to_string(), trip_after: None, last_step: 0 }
    }
}

impl Agent for OracleAgent {
    fn device(&self) -> &str {
        &self.device
    }

    fn reset(&mut self, ctx: &AgentContext) {
        self.last_step = 0;
        self.trip_after = match ctx.expectation {
            Expectation::TripBy { .. } => ctx.fault_onset,
            _ => None,
        };
    }

    fn observe(&mut self, obs: &Observations) -> Result<(), AgentError> {
        self.last_step = obs.step;
        Ok(())
    }

    fn act(&mut self) -> bool {
        self.trip_after.is_some_and(|s| self.last_step >= s)
    }
}

/// Decision of a three-way trip classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripClass {
    NoTrip,
    TripInstant,
    TripDelayed,
}

/// Turns trip decisions into a binary action stream. A delayed decision
/// made at step `t` fires once step `t + delay_steps` has been observed.
#[derive(Debug, Clone, PartialEq)]
pub struct TripScheduler {
    pub delay_steps: usize,
    due: Option<usize>,
}

impl TripScheduler {
    pub fn new(delay_s: f64, step_seconds: f64) -> TripScheduler {
        TripScheduler { delay_steps: (delay_s / step_seconds).round() as usize, due: None }
    }

    pub fn decide(&mut self, step: usize, class: TripClass) {
        let due = match class {
            TripClass::NoTrip => return,
            TripClass::TripInstant => step,
            TripClass::TripDelayed => step + self.delay_steps,
        };
        self.due = Some(self.due.map_or(due, |d| d.min(due)));
    }

    pub fn fire(&self, step: usize) -> bool {
        self.due.is_some_and(|d| step >= d)
    }

    pub fn clear(&mut self) {
        self.due = None;
    }
}

type Classifier = Box<dyn FnMut(&Observation) -> TripClass + Send>;

/// Agent driven by a three-way classifier over its device's window.
pub struct ClassifierAgent {
    device: String,
    window: usize,
    delay_s: f64,
    classify: Classifier,
    scheduler: TripScheduler,
    last_step: usize,
}

impl ClassifierAgent {
    pub fn new(
        device: &str,
        window: usize,
        delay_s: f64,
        classify: impl FnMut(&Observation) -> TripClass + Send + 'static,
    ) -> ClassifierAgent {
        ClassifierAgent {
            device: device.to_string(),
            window,
            delay_s,
            classify: Box::new(classify),
            scheduler: TripScheduler::new(delay_s, 1.0 / 60.0),
            last_step: 0,
        }
    }
}

impl Agent for ClassifierAgent {
    fn device(&self) -> &str {
        &self.device
    }

    fn requirements(&self) -> Requirements {
        Requirements { devices: vec![self.device.clone()], window: self.window }
    }

    fn reset(&mut self, ctx: &AgentContext) {
        self.scheduler = TripScheduler::new(self.delay_s, ctx.step_seconds);
        self.last_step = 0;
    }

    fn observe(&mut self, obs: &Observations) -> Result<(), AgentError> {
        let o = obs
            .get(&self.device)
            .ok_or_else(|| AgentError::MissingChannel { agent: self.device.clone(), device: self.device.clone() })?;
        if o.window.len() < self.window {
            return Err(AgentError::Misconfigured {
                agent: self.device.clone(),
                message: format!("window of {} steps, {} required", o.window.len(), self.window),
            });
        }
        self.last_step = obs.step;
        let class = (self.classify)(o);
        self.scheduler.decide(obs.step, class);
        Ok(())
    }

    fn act(&mut self) -> bool {
        self.scheduler.fire(self.last_step)
    }
}
