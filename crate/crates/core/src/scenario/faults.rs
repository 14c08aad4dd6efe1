use serde::{Deserialize, Serialize};

use super::{Rng, ScenarioError};
use crate::netmodel::{build_topology, ground_path_exists, DirectedTopology, EdgeKind, Network, PhaseSet};
use crate::shortcircuit::{valid_fault_kinds, FaultKind, FaultLocation, FaultSpec, FaultType};

/// User bounds on randomly generated faults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultConfig {
    pub allowed: Vec<FaultKind>,
    /// Fault impedance bounds (ohm), inclusive.
    pub impedance_range: [f64; 2],
    /// Onset step bounds, inclusive.
    pub onset_range: [usize; 2],
    /// Candidate buses; `None` means the whole network.
    pub locations: Option<Vec<String>>,
    pub fault_probability: f64,
    /// Whether interior points of lines are candidate locations.
    pub line_faults: bool,
}

impl Default for FaultConfig {
    fn default() -> Self {
        FaultConfig {
            allowed: FaultKind::ALL.to_vec(),
            impedance_range: [0.0, 10.0],
            onset_range: [10, 30],
            locations: None,
            fault_probability: 0.8,
            line_faults: true,
        }
    }
}

impl FaultConfig {
    pub fn check(&self) -> Result<(), ScenarioError> {
        let [lo, hi] = self.impedance_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(ScenarioError::InvalidConfig(format!("impedance range [{lo}, {hi}] must satisfy 0 <= lo <= hi")));
        }
        if self.onset_range[0] > self.onset_range[1] {
            return Err(ScenarioError::InvalidConfig("onset range is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.fault_probability) {
            return Err(ScenarioError::InvalidConfig(format!(
                "fault probability {} is outside [0, 1]",
                self.fault_probability
            )));
        }
        if self.allowed.is_empty() {
            return Err(ScenarioError::InvalidConfig("no fault types allowed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    location: FaultLocation,
    phases: PhaseSet,
    kinds: Vec<FaultKind>,
}

/// Precomputed candidate locations for repeated fault draws on one network.
///
/// Candidates are buses, and interior points of lines, that lie below at
/// least one protective device: a fault nothing can clear carries no label
/// information. Draws pick the bus or line class with equal probability,
/// then a member uniformly, then a fault kind uniformly among the kinds valid
/// there, then its phases uniformly.
#[derive(Debug, Clone)]
pub struct FaultSampler {
    cfg: FaultConfig,
    buses: Vec<Candidate>,
    lines: Vec<Candidate>,
}

impl FaultSampler {
    pub fn new(net: &Network, topo: &DirectedTopology, cfg: &FaultConfig) -> Result<FaultSampler, ScenarioError> {
        cfg.check()?;
        let ground = ground_path_exists(net);
        let in_filter = |bus: &str| cfg.locations.as_ref().is_none_or(|l| l.iter().any(|b| b == bus));
        let kinds_for = |phases: PhaseSet| -> Vec<FaultKind> {
            valid_fault_kinds(phases, ground).into_iter().filter(|k| cfg.allowed.contains(k)).collect()
        };
        let mut buses = Vec::new();
        for (b, bus) in net.buses.iter().enumerate() {
            if !in_filter(&bus.id) || topo.coordination_chain_indices(b).is_empty() {
                continue;
            }
            let kinds = kinds_for(bus.phases);
            if !kinds.is_empty() {
                buses.push(Candidate { location: FaultLocation::Bus { bus: bus.id.clone() }, phases: bus.phases, kinds });
            }
        }
        let mut lines = Vec::new();
        if cfg.line_faults {
            for e in &topo.edges {
                let EdgeKind::Line(li) = e.kind else { continue };
                let l = &net.lines[li];
                if l.switchable || !l.closed || e.back_edge || !in_filter(&l.from_bus) || !in_filter(&l.to_bus) {
                    continue;
                }
                let upstream = &topo.bus_ids[e.from];
                let guarded = !topo.coordination_chain_indices(e.from).is_empty()
                    || e.devices.iter().any(|&d| net.device_bus(&net.devices[d]) == Some(upstream.as_str()));
                let kinds = kinds_for(l.phases);
                if guarded && !kinds.is_empty() {
                    lines.push(Candidate {
                        location: FaultLocation::Line { line: l.id.clone(), position: 0.5 },
                        phases: l.phases,
                        kinds,
                    });
                }
            }
        }
        if buses.is_empty() && lines.is_empty() && cfg.fault_probability > 0.0 {
            return Err(ScenarioError::NoValidFault);
        }
        Ok(FaultSampler { cfg: cfg.clone(), buses, lines })
    }

    pub fn config(&self) -> &FaultConfig {
        &self.cfg
    }

    /// Candidate bus ids.
    pub fn bus_candidates(&self) -> impl Iterator<Item = &str> {
        self.buses.iter().filter_map(|c| match &c.location {
            FaultLocation::Bus { bus } => Some(bus.as_str()),
            _ => None,
        })
    }

    pub fn line_candidates(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().filter_map(|c| match &c.location {
            FaultLocation::Line { line, .. } => Some(line.as_str()),
            _ => None,
        })
    }

    /// Draws one episode's fault, or `None` for a no-fault episode.
    pub fn sample(&self, rng: &mut Rng) -> Option<FaultSpec> {
        if !rng.bernoulli(self.cfg.fault_probability) {
            return None;
        }
        let use_bus = rng.bernoulli(0.5);
        let pool = match (self.buses.is_empty(), self.lines.is_empty()) {
            (false, true) => &self.buses,
            (true, false) => &self.lines,
            (true, true) => return None,
            (false, false) if use_bus => &self.buses,
            (false, false) => &self.lines,
        };
        let c = &pool[rng.index(pool.len())];
        let kind = c.kinds[rng.index(c.kinds.len())];
        let variants = FaultType::variants(kind, c.phases);
        let fault_type = variants[rng.index(variants.len())];
        let [lo, hi] = self.cfg.impedance_range;
        let impedance_ohm = rng.range_f64(lo, hi);
        let onset_step = rng.range_usize(self.cfg.onset_range[0], self.cfg.onset_range[1]);
        let location = match &c.location {
            FaultLocation::Bus { bus } => FaultLocation::Bus { bus: bus.clone() },
            FaultLocation::Line { line, .. } => {
                let mut position = rng.uniform();
                while position == 0.0 {
                    position = rng.uniform();
                }
                FaultLocation::Line { line: line.clone(), position }
            }
        };
        Some(FaultSpec { fault_type, location, impedance_ohm, onset_step })
    }
}

/// One fault draw; builds the topology and candidate set on every call, so
/// prefer [`FaultSampler`] for repeated draws.
pub fn generate_fault(net: &Network, cfg: &FaultConfig, rng: &mut Rng) -> Result<Option<FaultSpec>, ScenarioError> {
    let topo = build_topology(net).map_err(|e| ScenarioError::InvalidConfig(e.to_string()))?;
    Ok(FaultSampler::new(net, &topo, cfg)?.sample(rng))
}
