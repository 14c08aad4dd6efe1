use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Expectations, Outcome, RewardEvent, Sample};
use crate::scenario::ScenarioSample;
use crate::shortcircuit::FaultSpec;

/// Version of the episode record layout.
pub const RECORD_SCHEMA: u32 = 1;

/// An agent error raised during an episode; the agent held afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentFault {
    pub device: String,
    pub step: usize,
    pub message: String,
}

/// Everything that happened in one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub schema: u32,
    pub episode: u64,
    pub seed: u64,
    pub scenario: ScenarioSample,
    pub fault: Option<FaultSpec>,
    /// Bus the fault was solved at (the inserted bus for line faults).
    pub fault_bus: Option<String>,
    /// Last step reached.
    pub steps: usize,
    /// Agent-controlled devices.
    pub devices: Vec<String>,
    /// Per device, the action bit of steps `1..=steps` as a `0`/`1` string.
    pub actions: BTreeMap<String, String>,
    /// Step at which each tripped device opened.
    pub trips: BTreeMap<String, usize>,
    pub isolation_step: Option<usize>,
    pub expectations: Expectations,
    /// `None` for aborted episodes.
    pub outcome: Option<Outcome>,
    /// Cumulative reward per device.
    pub rewards: BTreeMap<String, f64>,
    pub reward_events: Vec<RewardEvent>,
    pub agent_errors: Vec<AgentFault>,
    pub aborted: Option<String>,
    /// Device samples of steps `0..=steps`, when recording is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<BTreeMap<String, Sample>>>,
}

impl EpisodeRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}
