use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::netmodel::DirectedTopology;

/// What one device is expected to do in an episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expectation {
    /// Must not trip.
    Hold,
    /// Primary device: must trip at a step no later than `deadline_step`.
    TripBy { deadline_step: usize },
    /// Backup device: may trip once one of `closer` has tripped, or after
    /// the primary deadline has passed.
    Backup { closer: Vec<String>, primary_deadline: usize },
}

/// Expectations of every agent-controlled device for one episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectations {
    /// First step at which the fault is present.
    pub onset: Option<usize>,
    pub deadline: Option<usize>,
    /// Coordination chain, primary first.
    pub chain: Vec<String>,
    pub devices: BTreeMap<String, Expectation>,
}

impl Expectations {
    pub fn get(&self, device: &str) -> &Expectation {
        self.devices.get(device).unwrap_or(&Expectation::Hold)
    }

    pub fn primary(&self) -> Option<&str> {
        self.chain.first().map(String::as_str)
    }
}

/// Expected behavior of `devices` for a fault at bus index `fault_bus` of
/// `topo` starting at step `onset`. The chain is the topology's coordination
/// chain restricted to `devices`.
pub fn desired_behavior(
    topo: &DirectedTopology,
    fault: Option<(usize, usize)>,
    devices: &[String],
    primary_window_steps: usize,
) -> Expectations {
    let mut devices_out: BTreeMap<String, Expectation> =
        devices.iter().map(|d| (d.clone(), Expectation::Hold)).collect();
    let Some((bus, onset)) = fault else {
        return Expectations { onset: None, deadline: None, chain: Vec::new(), devices: devices_out };
    };
    let mut chain: Vec<String> = Vec::new();
    for d in topo.coordination_chain_indices(bus) {
        let id = &topo.device_ids[d];
        if devices.contains(id) && !chain.contains(id) {
            chain.push(id.clone());
        }
    }
    let deadline = onset + primary_window_steps;
    for (i, id) in chain.iter().enumerate() {
        let e = if i == 0 {
            Expectation::TripBy { deadline_step: deadline }
        } else {
            Expectation::Backup { closer: chain[..i].to_vec(), primary_deadline: deadline }
        };
        devices_out.insert(id.clone(), e);
    }
    Expectations { onset: Some(onset), deadline: Some(deadline), chain, devices: devices_out }
}
