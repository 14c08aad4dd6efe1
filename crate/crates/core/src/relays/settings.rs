use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Agent, AgentError, DifferentialAgent, DifferentialSettings, DistanceAgent, DistanceSettings, HoldAgent, OcAgent,
    OcSettings, OracleAgent, ScriptedAgent,
};
use crate::netmodel::Network;

pub const SETTINGS_VERSION: u32 = 1;

/// Buildable description of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentSpec {
    Overcurrent {
        device: String,
        #[serde(flatten)]
        settings: OcSettings,
    },
    Distance {
        device: String,
        #[serde(flatten)]
        settings: DistanceSettings,
    },
    Differential {
        #[serde(flatten)]
        settings: DifferentialSettings,
    },
    Hold {
        device: String,
    },
    Oracle {
        device: String,
    },
    Scripted {
        device: String,
        trip_step: Option<usize>,
    },
}

impl AgentSpec {
    pub fn device(&self) -> &str {
        match self {
            AgentSpec::Overcurrent { device, .. }
            | AgentSpec::Distance { device, .. }
            | AgentSpec::Hold { device }
            | AgentSpec::Oracle { device }
            | AgentSpec::Scripted { device, .. } => device,
            AgentSpec::Differential { settings } => &settings.inner,
        }
    }

    pub fn build(&self) -> Box<dyn Agent> {
        match self {
            AgentSpec::Overcurrent { device, settings } => Box::new(OcAgent::new(device, settings.clone())),
            AgentSpec::Distance { device, settings } => Box::new(DistanceAgent::new(device, settings.clone())),
            AgentSpec::Differential { settings } => Box::new(DifferentialAgent::new(settings.clone())),
            AgentSpec::Hold { device } => Box::new(HoldAgent::new(device)),
            AgentSpec::Oracle { device } => Box::new(OracleAgent::new(device)),
            AgentSpec::Scripted { device, trip_step } => Box::new(ScriptedAgent::new(device, *trip_step)),
        }
    }

    /// Checks settings and device references against a network.
    pub fn check(&self, net: &Network) -> Result<(), AgentError> {
        let bad = |m: String| AgentError::Settings(format!("{}: {m}", self.device()));
        let mut devices = vec![self.device()];
        match self {
            AgentSpec::Overcurrent { settings, .. } => settings.check().map_err(bad)?,
            AgentSpec::Distance { settings, .. } => settings.check().map_err(bad)?,
            AgentSpec::Differential { settings } => {
                settings.check().map_err(bad)?;
                devices.push(&settings.outer);
            }
            _ => {}
        }
        for d in devices {
            if net.device_index(d).is_none() {
                return Err(AgentError::Settings(format!("unknown device '{d}'")));
            }
        }
        Ok(())
    }
}

/// Agent kind for devices the settings file does not list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentDefault {
    /// Graded inverse-time overcurrent from maximum load currents.
    #[default]
    Conventional,
    Hold,
    Oracle,
    /// Leave the device without an agent.
    None,
}

/// Agent settings file: a version, a default kind and explicit agents keyed
/// by device id.
///
/// ```toml
/// version = 1
/// default = "conventional"
///
/// [agents.relay_830]
/// type = "overcurrent"
/// pickup_amps = 240.0
/// curve = "very_inverse"
/// time_dial = 0.5
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSettingsFile {
    pub version: u32,
    #[serde(default)]
    pub default: AgentDefault,
    #[serde(default)]
    pub agents: BTreeMap<String, toml::Table>,
}

impl AgentSettingsFile {
    pub fn parse(text: &str) -> Result<AgentSettingsFile, AgentError> {
        let f: AgentSettingsFile = toml::from_str(text).map_err(|e| AgentError::Settings(e.to_string()))?;
        if f.version != SETTINGS_VERSION {
            return Err(AgentError::Settings(format!(
                "unsupported settings version {} (expected {SETTINGS_VERSION})",
                f.version
            )));
        }
        Ok(f)
    }

    /// Explicit agents, with the table key supplying the device id.
    pub fn specs(&self) -> Result<Vec<AgentSpec>, AgentError> {
        self.agents
            .iter()
            .map(|(device, table)| {
                let mut t = table.clone();
                let is_diff = t.get("type").and_then(|v| v.as_str()) == Some("differential");
                let key = if is_diff { "inner" } else { "device" };
                t.entry(key).or_insert_with(|| toml::Value::String(device.clone()));
                let spec: AgentSpec = t.try_into().map_err(|e: toml::de::Error| {
                    AgentError::Settings(format!("agent '{device}': {}", e.message()))
                })?;
                if spec.device() != device {
                    return Err(AgentError::Settings(format!(
                        "agent '{device}' is bound to device '{}'",
                        spec.device()
                    )));
                }
                Ok(spec)
            })
            .collect()
    }
}

pub fn load_agent_settings(path: impl AsRef<Path>) -> Result<AgentSettingsFile, AgentError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AgentError::Settings(format!("{}: {e}", path.display())))?;
    AgentSettingsFile::parse(&text)
}
