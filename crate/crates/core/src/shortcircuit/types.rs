use std::fmt;

use serde::{Deserialize, Serialize};

use crate::netmodel::{ground_path_exists, Network, Phase, PhaseSet};

/// Fault connection without its phase assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Slg,
    Ll,
    Llg,
    ThreePhase,
    ThreePhaseGround,
}

impl FaultKind {
    pub const ALL: [FaultKind; 5] =
        [FaultKind::Slg, FaultKind::Ll, FaultKind::Llg, FaultKind::ThreePhase, FaultKind::ThreePhaseGround];

    pub fn grounded(self) -> bool {
        matches!(self, FaultKind::Slg | FaultKind::Llg | FaultKind::ThreePhaseGround)
    }

    pub fn phase_count(self) -> usize {
        match self {
            FaultKind::Slg => 1,
            FaultKind::Ll | FaultKind::Llg => 2,
            FaultKind::ThreePhase | FaultKind::ThreePhaseGround => 3,
        }
    }
}

impl std::str::FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "slg" => Ok(FaultKind::Slg),
            "ll" => Ok(FaultKind::Ll),
            "llg" => Ok(FaultKind::Llg),
            "three_phase" | "3p" | "abc" => Ok(FaultKind::ThreePhase),
            "three_phase_ground" | "3pg" | "abcg" => Ok(FaultKind::ThreePhaseGround),
            other => Err(format!("unknown fault type '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FaultType {
    Slg { phase: Phase },
    Ll { phases: [Phase; 2] },
    Llg { phases: [Phase; 2] },
    ThreePhase,
    ThreePhaseGround,
}

impl FaultType {
    pub fn kind(self) -> FaultKind {
        match self {
            FaultType::Slg { .. } => FaultKind::Slg,
            FaultType::Ll { .. } => FaultKind::Ll,
            FaultType::Llg { .. } => FaultKind::Llg,
            FaultType::ThreePhase => FaultKind::ThreePhase,
            FaultType::ThreePhaseGround => FaultKind::ThreePhaseGround,
        }
    }

    pub fn phases(self) -> PhaseSet {
        match self {
            FaultType::Slg { phase } => PhaseSet::single(phase),
            FaultType::Ll { phases } | FaultType::Llg { phases } => PhaseSet::new(phases).expect("nonempty"),
            FaultType::ThreePhase | FaultType::ThreePhaseGround => PhaseSet::ABC,
        }
    }

    /// Every concrete fault of `kind` that fits on `phases`.
    pub fn variants(kind: FaultKind, phases: PhaseSet) -> Vec<FaultType> {
        let ps: Vec<Phase> = phases.iter().collect();
        let pairs = || {
            let mut v = Vec::new();
            for i in 0..ps.len() {
                for j in i + 1..ps.len() {
                    v.push([ps[i], ps[j]]);
                }
            }
            v
        };
        match kind {
            FaultKind::Slg => ps.iter().map(|&phase| FaultType::Slg { phase }).collect(),
            FaultKind::Ll => pairs().into_iter().map(|phases| FaultType::Ll { phases }).collect(),
            FaultKind::Llg => pairs().into_iter().map(|phases| FaultType::Llg { phases }).collect(),
            FaultKind::ThreePhase if ps.len() == 3 => vec![FaultType::ThreePhase],
            FaultKind::ThreePhaseGround if ps.len() == 3 => vec![FaultType::ThreePhaseGround],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultType::Slg { phase } => write!(f, "SLG-{phase}"),
            FaultType::Ll { phases } => write!(f, "LL-{}{}", phases[0], phases[1]),
            FaultType::Llg { phases } => write!(f, "LLG-{}{}", phases[0], phases[1]),
            FaultType::ThreePhase => write!(f, "3PH"),
            FaultType::ThreePhaseGround => write!(f, "3PHG"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FaultLocation {
    Bus { bus: String },
    /// Interior point of a line, `position` measured from its from-bus.
    Line { line: String, position: f64 },
}

impl fmt::Display for FaultLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultLocation::Bus { bus } => write!(f, "{bus}"),
            FaultLocation::Line { line, position } => write!(f, "{line}@{position:.4}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    #[serde(flatten)]
    pub fault_type: FaultType,
    pub location: FaultLocation,
    #[serde(rename = "zf_ohm")]
    pub impedance_ohm: f64,
    pub onset_step: usize,
}

/// Fault kinds physically meaningful on a set of phases.
pub fn valid_fault_kinds(phases: PhaseSet, ground_path: bool) -> Vec<FaultKind> {
    FaultKind::ALL
        .into_iter()
        .filter(|k| (ground_path || !k.grounded()) && k.phase_count() <= phases.len())
        .collect()
}

/// Concrete fault types that can be placed at `bus`. Ground-referenced types
/// require a ground path somewhere in the network.
pub fn valid_fault_types(net: &Network, bus: &str) -> Vec<FaultType> {
    let Some(b) = net.bus(bus) else { return Vec::new() };
    let ground = ground_path_exists(net);
    valid_fault_kinds(b.phases, ground)
        .into_iter()
        .flat_map(|k| FaultType::variants(k, b.phases))
        .collect()
}
