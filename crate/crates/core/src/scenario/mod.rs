//! Profile ingestion, reproducible scenario draws and random fault generation.
//!
//! Each episode `k` of a run owns the random stream `Rng::new(seed, k)`. The
//! scenario is drawn from it first and the fault second, so a run is fully
//! determined by its seed, network and configuration.

mod faults;
mod profiles;
mod rng;
mod synthetic;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::Network;
use crate::shortcircuit::FaultSpec;

pub use faults::{generate_fault, FaultConfig, FaultSampler};
pub use profiles::{
    load_profiles, parse_profiles, sample_scenario, ProfileMapping, ProfileSet, SamplingMode, ScenarioSampler,
};
pub use rng::Rng;
pub use synthetic::generate_profiles;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("profile set is empty")]
    EmptyProfiles,
    #[error("profile header must start with 'timestamp' followed by series names")]
    BadHeader,
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("line {line}: series '{series}' has negative or non-finite value {value}")]
    NegativeValue { line: usize, series: String, value: f64 },
    #[error("line {line}: series '{series}' value '{value}' is not a number")]
    BadValue { line: usize, series: String, value: String },
    #[error("line {line}: '{value}' is not an ISO-8601 timestamp")]
    BadTimestamp { line: usize, value: String },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(String),
    #[error("duplicate series '{0}'")]
    DuplicateSeries(String),
    #[error("timeline gap: {after} is followed by {next}, expected one hour later")]
    Gap { after: String, next: String },
    #[error("sequential sampling exhausted all {0} profile hours")]
    Exhausted(usize),
    #[error("no valid (location, fault type) pair under the fault configuration")]
    NoValidFault,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
}

/// One initial-condition draw: per-load and per-DER scale factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSample {
    /// Profile hour index the sample was taken from.
    pub hour: usize,
    pub timestamp: String,
    /// Scale per load, in network load order (1.0 = base value).
    pub load_scale: Vec<f64>,
    /// Scale per DER, in network DER order (1.0 = rated output).
    pub der_scale: Vec<f64>,
}

impl ScenarioSample {
    /// Every load at `load` and every DER at `der`.
    pub fn uniform(net: &Network, load: f64, der: f64) -> ScenarioSample {
        ScenarioSample {
            hour: 0,
            timestamp: String::new(),
            load_scale: vec![load; net.loads.len()],
            der_scale: vec![der; net.ders.len()],
        }
    }

    pub fn nominal(net: &Network) -> ScenarioSample {
        ScenarioSample::uniform(net, 1.0, 1.0)
    }
}

/// Where episode scenarios come from.
#[derive(Debug, Clone, Default)]
pub struct ScenarioSource {
    /// `None` runs every episode at base values.
    pub profiles: Option<Arc<ProfileSet>>,
    pub mapping: ProfileMapping,
    pub mode: SamplingMode,
    /// First hour used in sequential mode; episode `k` uses hour `start_hour + k`.
    pub start_hour: usize,
}

impl ScenarioSource {
    pub fn sample(&self, net: &Network, episode: u64, rng: &mut Rng) -> Result<ScenarioSample, ScenarioError> {
        let Some(p) = &self.profiles else {
            return Ok(ScenarioSample::nominal(net));
        };
        let mut sampler = ScenarioSampler::starting_at(self.mode, self.start_hour + episode as usize);
        sampler.next(p, net, &self.mapping, rng)
    }
}

/// Scenario and fault of episode `episode`, drawn from its own stream.
pub fn draw_episode(
    net: &Network,
    source: &ScenarioSource,
    faults: &FaultSampler,
    seed: u64,
    episode: u64,
) -> Result<(ScenarioSample, Option<FaultSpec>), ScenarioError> {
    let mut rng = Rng::new(seed, episode);
    let scenario = source.sample(net, episode, &mut rng)?;
    let fault = faults.sample(&mut rng);
    Ok((scenario, fault))
}

/// One line of the scenario/fault stream export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStreamEntry {
    pub episode: u64,
    pub timestamp: String,
    pub hour: usize,
    pub load_scale: BTreeMap<String, f64>,
    pub der_scale: BTreeMap<String, f64>,
    pub fault: Option<FaultSpec>,
}

impl ScenarioStreamEntry {
    pub fn new(net: &Network, episode: u64, scenario: &ScenarioSample, fault: Option<FaultSpec>) -> Self {
        ScenarioStreamEntry {
            episode,
            timestamp: scenario.timestamp.clone(),
            hour: scenario.hour,
            load_scale: net.loads.iter().map(|l| l.id.clone()).zip(scenario.load_scale.iter().copied()).collect(),
            der_scale: net.ders.iter().map(|d| d.id.clone()).zip(scenario.der_scale.iter().copied()).collect(),
            fault,
        }
    }
}

/// Writes the scenario/fault draws of episodes `0..n` as JSON lines.
pub fn write_scenario_stream<W: Write>(
    net: &Network,
    source: &ScenarioSource,
    faults: &FaultSampler,
    seed: u64,
    n: u64,
    mut out: W,
) -> Result<(), ScenarioError> {
    for k in 0..n {
        let (s, f) = draw_episode(net, source, faults, seed, k)?;
        let line = serde_json::to_string(&ScenarioStreamEntry::new(net, k, &s, f)).expect("serializable");
        writeln!(out, "{line}").map_err(|e| ScenarioError::Io(e.to_string()))?;
    }
    Ok(())
}
