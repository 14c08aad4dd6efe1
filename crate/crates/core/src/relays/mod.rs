//! The observe/act agent contract and the bundled relay agents.
//!
//! The environment calls [`Agent::observe`] with the step's observations and
//! then [`Agent::act`] for a single trip bit. Timers, accumulators and any
//! delayed-trip schedule live inside the agent.

mod agents;
mod conventional;
mod curves;
mod differential;
mod distance;
mod overcurrent;
mod settings;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{Expectation, Observations};

pub use agents::{ClassifierAgent, HoldAgent, OracleAgent, ScriptedAgent, TripClass, TripScheduler};
pub use conventional::{
    conventional_agents_from_profiles, make_conventional_agents, ConventionalConfig, ConventionalSetting, GradingWarning,
};
pub use curves::{it_oc_integrate, it_oc_time, Curve, CurveIntegrator};
pub use differential::{differential_operate, DifferentialAgent, DifferentialSettings};
pub use distance::{distance_operate, DistanceAgent, DistanceSettings, DistanceZone};
pub use overcurrent::{OcAgent, OcMode, OcSettings};
pub use settings::{load_agent_settings, AgentDefault, AgentSettingsFile, AgentSpec, SETTINGS_VERSION};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("agent {agent}: no observation for device '{device}'")]
    MissingChannel { agent: String, device: String },
    #[error("agent {agent}: {message}")]
    Misconfigured { agent: String, message: String },
    #[error("agent settings: {0}")]
    Settings(String),
}

/// What an agent needs to see each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Requirements {
    pub devices: Vec<String>,
    /// Window length in steps.
    pub window: usize,
}

/// Per-episode information handed to agents at reset. Conventional agents
/// ignore it; the oracle agent reads its expectation from it.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentContext {
    pub step_seconds: f64,
    pub expectation: Expectation,
    pub fault_onset: Option<usize>,
}

pub trait Agent: Send {
    /// Device whose breaker this agent operates.
    fn device(&self) -> &str;

    fn requirements(&self) -> Requirements {
        Requirements { devices: vec![self.device().to_string()], window: 1 }
    }

    /// Clears internal state at the start of an episode.
    fn reset(&mut self, _ctx: &AgentContext) {}

    fn observe(&mut self, obs: &Observations) -> Result<(), AgentError>;

    /// Trip bit for the next step.
    fn act(&mut self) -> bool;
}

/// The latest sample of `device`, or a missing-channel error for `agent`.
pub(crate) fn latest<'a>(
    obs: &'a Observations,
    agent: &str,
    device: &str,
) -> Result<&'a crate::episode::Sample, AgentError> {
    obs.get(device)
        .map(|o| o.latest())
        .ok_or_else(|| AgentError::MissingChannel { agent: agent.to_string(), device: device.to_string() })
}
