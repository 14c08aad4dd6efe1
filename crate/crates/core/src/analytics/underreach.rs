use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::episode::{run_episode_with, AgentFactory, Environment, OutcomeLabel};
use crate::netmodel::{topology_to_dot, DirectedTopology, DotStyle};
use crate::shortcircuit::{valid_fault_types, FaultKind, FaultLocation, FaultSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnderreachConfig {
    pub impedance_ohm: f64,
    pub kinds: Vec<FaultKind>,
    /// Scenarios drawn per bus.
    pub scenarios: u64,
    pub onset_step: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for UnderreachConfig {
    fn default() -> Self {
        UnderreachConfig {
            impedance_ohm: 0.0,
            kinds: FaultKind::ALL.to_vec(),
            scenarios: 3,
            onset_step: 10,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachFlag {
    DetectedAll,
    MissedSome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusReach {
    pub bus: String,
    pub tested: usize,
    pub undetected: usize,
    pub flag: ReachFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnderreachMap {
    pub impedance_ohm: f64,
    /// Buses in topological order.
    pub buses: Vec<BusReach>,
}

impl UnderreachMap {
    /// One line per flag with its bus count, then the missed buses.
    pub fn report(&self) -> String {
        let missed = self.missed();
        let mut out = format!(
            "Zf = {} ohm: {} buses tested, {} detected_all, {} missed_some\n",
            self.impedance_ohm,
            self.buses.len(),
            self.buses.len() - missed.len(),
            missed.len()
        );
        if !missed.is_empty() {
            out += &format!("missed: {}\n", missed.into_iter().collect::<Vec<_>>().join(" "));
        }
        out
    }

    pub fn missed(&self) -> BTreeSet<&str> {
        self.buses.iter().filter(|b| b.flag == ReachFlag::MissedSome).map(|b| b.bus.as_str()).collect()
    }

    /// DOT graph with detected buses blue and missed buses red.
    pub fn to_dot(&self, topo: &DirectedTopology) -> String {
        let node_colors = self
            .buses
            .iter()
            .map(|b| {
                let color = match b.flag {
                    ReachFlag::DetectedAll => "lightblue",
                    ReachFlag::MissedSome => "red",
                };
                (b.bus.clone(), color.to_string())
            })
            .collect();
        let title = format!("under-reach map, Zf = {} ohm", self.impedance_ohm);
        topology_to_dot(topo, &DotStyle { node_colors, title: Some(title) })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bus", "tested", "undetected", "flag"])?;
        for b in &self.buses {
            let flag = match b.flag {
                ReachFlag::DetectedAll => "detected_all",
                ReachFlag::MissedSome => "missed_some",
            };
            w.write_record([b.bus.as_str(), &b.tested.to_string(), &b.undetected.to_string(), flag])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Devices with no other device between them and the source.
pub fn substation_devices(topo: &DirectedTopology) -> Vec<String> {
    (0..topo.device_ids.len())
        .filter(|&d| {
            topo.device_edge[d].is_some_and(|e| topo.coordination_chain_indices(topo.edges[e].to).last() == Some(&d))
        })
        .map(|d| topo.device_ids[d].clone())
        .collect()
}

/// Faults every bus covered by an agent with each configured fault type at
/// a fixed impedance across sampled scenarios. A fault counts as
/// undetected when no agent on its coordination chain trips by the primary
/// deadline.
pub fn underreach_map<F: AgentFactory + ?Sized>(
    env: &Environment,
    factory: &F,
    cfg: &UnderreachConfig,
) -> Result<UnderreachMap, AnalyticsError> {
    if !(cfg.impedance_ohm >= 0.0 && cfg.impedance_ohm.is_finite()) {
        return Err(AnalyticsError::Input(format!("fault impedance {} must be a finite value >= 0", cfg.impedance_ohm)));
    }
    let topo = env.topology();
    let agent_devices: BTreeSet<String> = factory.agents(0).iter().map(|a| a.device().to_string()).collect();
    let subs = substation_devices(topo);
    if !subs.iter().any(|d| agent_devices.contains(d)) {
        return Err(AnalyticsError::Input(format!("no agent at a substation device (one of {})", subs.join(", "))));
    }
    let allowed = env.settings().faults.locations.clone();
    let onset = cfg.onset_step.max(1);
    let stop = onset + env.config().primary_window_steps();

    let mut scenarios = Vec::new();
    for k in 0..cfg.scenarios.max(1) {
        let (sc, _) = env.draw_seeded(cfg.seed, k).map_err(|e| AnalyticsError::Input(e.to_string()))?;
        scenarios.push(sc);
    }
    let buses: Vec<usize> = topo
        .order
        .iter()
        .copied()
        .filter(|&b| {
            let id = &topo.bus_ids[b];
            allowed.as_ref().is_none_or(|l| l.contains(id))
                && topo.coordination_chain_indices(b).iter().any(|&d| agent_devices.contains(&topo.device_ids[d]))
        })
        .collect();

    let run = || {
        buses
            .par_iter()
            .map(|&b| {
                let bus = topo.bus_ids[b].clone();
                let types: Vec<_> =
                    valid_fault_types(env.network(), &bus).into_iter().filter(|t| cfg.kinds.contains(&t.kind())).collect();
                let (mut tested, mut undetected) = (0, 0);
                for (k, sc) in scenarios.iter().enumerate() {
                    for (j, &fault_type) in types.iter().enumerate() {
                        let fault = FaultSpec {
                            fault_type,
                            location: FaultLocation::Bus { bus: bus.clone() },
                            impedance_ohm: cfg.impedance_ohm,
                            onset_step: onset,
                        };
                        let index = ((b * scenarios.len() + k) * 64 + j) as u64;
                        let mut agents = factory.agents(index);
                        let rec = run_episode_with(env, index, sc.clone(), Some(fault), &mut agents, Some(stop));
                        let Some(outcome) = rec.outcome else {
                            return Err(AnalyticsError::Runtime(format!(
                                "fault at {bus}: {}",
                                rec.aborted.unwrap_or_default()
                            )));
                        };
                        tested += 1;
                        if outcome.flags.iter().any(|f| f.kind == OutcomeLabel::FalseNegative) {
                            undetected += 1;
                        }
                    }
                }
                let flag = if undetected > 0 { ReachFlag::MissedSome } else { ReachFlag::DetectedAll };
                Ok(BusReach { bus, tested, undetected, flag })
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let buses = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers.max(1)).build() {
        Ok(pool) => pool.install(run)?,
        Err(_) => run()?,
    };
    Ok(UnderreachMap { impedance_ohm: cfg.impedance_ohm, buses })
}
