//! Fault placement and during-fault network solutions.
//!
//! Loads are frozen to the admittance they presented before the fault, the
//! source stays behind its Thevenin impedance and DERs become current-limited
//! sources. The fault itself is an admittance stamp, so bolted faults never
//! change the matrix structure.

mod measure;
mod midline;
mod study;
mod types;

use std::borrow::Cow;
use std::cell::RefCell;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{Network, Phase};
use crate::powerflow::{
    branch_voltage, inject_current, AdmittanceSystem, NodeKind, LoadTreatment, NetworkModel, NetworkState, PowerFlowError, PowerFlowOptions,
    PowerFlowSolution, Solver, Terminals,
};
use crate::powerflow::FixedPoint;
use crate::scenario::ScenarioSample;

pub use measure::{during_fault_measurements, measure_device, DeviceMeasurement};
pub use midline::insert_midline_bus;
pub use study::{fault_study, write_fault_study_csv, FaultStudyRow};
pub use types::{valid_fault_kinds, valid_fault_types, FaultKind, FaultLocation, FaultSpec, FaultType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaultError {
    #[error("fault type {fault} is not valid at {location}")]
    InvalidType { fault: FaultType, location: String },
    #[error("unknown fault location '{0}'")]
    UnknownLocation(String),
    #[error("line '{0}' is a switch; interior faults are not placed on switches")]
    SwitchableLine(String),
    #[error("fault position {0} is not strictly inside (0, 1)")]
    InvalidPosition(f64),
    #[error("fault impedance {0} is not a finite non-negative value")]
    InvalidImpedance(f64),
    #[error("DER current-limit iteration did not settle within {0} passes")]
    ClampNonConvergence(usize),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultOptions {
    /// Conductance standing in for a zero-impedance fault (S).
    pub bolted_conductance: f64,
    /// Passes of the DER current-limit activation loop.
    pub clamp_iterations: usize,
    pub powerflow: PowerFlowOptions,
}

impl Default for FaultOptions {
    fn default() -> Self {
        FaultOptions { bolted_conductance: 1e6, clamp_iterations: 20, powerflow: PowerFlowOptions::default() }
    }
}

/// Admittance branches a fault adds at one bus.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultStamp {
    pub branches: Vec<(Terminals, Complex64)>,
}

fn fault_admittance(zf: f64, opts: &FaultOptions) -> Complex64 {
    let g = if zf > 0.0 { (1.0 / zf).min(opts.bolted_conductance) } else { opts.bolted_conductance };
    Complex64::new(g, 0.0)
}

/// Fault branches for `fault` at bus `bus` of the system's node map.
pub fn fault_stamp(
    system: &AdmittanceSystem,
    bus: usize,
    fault: FaultType,
    zf: f64,
    opts: &FaultOptions,
) -> Result<FaultStamp, FaultError> {
    if !(zf.is_finite() && zf >= 0.0) {
        return Err(FaultError::InvalidImpedance(zf));
    }
    let y = fault_admittance(zf, opts);
    let node = |p: Phase| {
        system.nodes.node(bus, p).ok_or(FaultError::InvalidType { fault, location: format!("bus index {bus}") })
    };
    let branches = match fault {
        FaultType::Slg { phase } => vec![((Some(node(phase)?), None), y)],
        FaultType::Ll { phases } => vec![((Some(node(phases[0])?), Some(node(phases[1])?)), y)],
        FaultType::Llg { phases } => {
            vec![((Some(node(phases[0])?), None), y), ((Some(node(phases[1])?), None), y)]
        }
        FaultType::ThreePhase => {
            // floating star of Zf per phase, written as its equivalent delta
            let n = [node(Phase::A)?, node(Phase::B)?, node(Phase::C)?];
            (0..3).map(|k| ((Some(n[k]), Some(n[(k + 1) % 3])), y / 3.0)).collect()
        }
        FaultType::ThreePhaseGround => {
            Phase::ALL.iter().map(|&p| Ok(((Some(node(p)?), None), y))).collect::<Result<_, FaultError>>()?
        }
    };
    Ok(FaultStamp { branches })
}

/// Stamps a fault into the admittance system. Faults at de-energized buses
/// leave the system unchanged.
pub fn apply_fault(
    system: &mut AdmittanceSystem,
    bus: usize,
    fault: FaultType,
    zf: f64,
    opts: &FaultOptions,
) -> Result<FaultStamp, FaultError> {
    let stamp = fault_stamp(system, bus, fault, zf, opts)?;
    if system.energized.get(bus).copied().unwrap_or(false) {
        for &(t, y) in &stamp.branches {
            system.stamp(t, y);
        }
    }
    Ok(stamp)
}

/// During-fault solution with fault and DER detail.
#[derive(Debug, Clone)]
pub struct FaultSolution {
    pub solution: PowerFlowSolution,
    pub fault_bus: usize,
    /// Current flowing from each phase conductor into the fault (A).
    pub fault_currents: [Complex64; 3],
    /// Per-DER phase-branch output currents (A).
    pub der_currents: Vec<Vec<Complex64>>,
    /// Whether any branch of each DER sits at its current limit.
    pub der_limited: Vec<bool>,
}

impl FaultSolution {
    pub fn fault_current_magnitudes(&self) -> [f64; 3] {
        self.fault_currents.map(|i| i.norm())
    }
}

/// Solves the faulted network on a prepared model. `prefault` must be a
/// solution of the same network and switching state.
#[allow(clippy::too_many_arguments)]
pub fn solve_fault_with_model(
    model: &NetworkModel,
    net: &Network,
    scenario: &ScenarioSample,
    state: &NetworkState,
    bus: usize,
    fault: FaultType,
    zf: f64,
    prefault: &PowerFlowSolution,
    opts: &FaultOptions,
) -> Result<FaultSolution, FaultError> {
    let mut system = model.assemble(net, scenario, state, LoadTreatment::FrozenAt(&prefault.voltages))?;
    // DERs try to hold their prefault output; a branch that would exceed its
    // limit becomes a fixed current at the limit with its prefault angle
    let mut held = Vec::with_capacity(system.ders.len());
    for d in &mut system.ders {
        let v = branch_voltage(&prefault.voltages, d.terminals);
        let i = d.current(v);
        d.s = v * i.conj();
        let limit = d.limit * d.i_rated;
        held.push(if i.norm() > 0.0 { i * (limit / i.norm()) } else { Complex64::default() });
    }
    let stamp = apply_fault(&mut system, bus, fault, zf, opts)?;
    let solver = Solver::new(net, system)?;
    let sys = &solver.system;
    let der_output = |v: &[Complex64], clamped: &[bool]| -> Vec<Complex64> {
        sys.ders
            .iter()
            .zip(clamped)
            .zip(&held)
            .map(|((d, &c), &h)| if c { h } else { d.current(branch_voltage(v, d.terminals)) })
            .collect()
    };
    // a branch latches onto its held current as soon as it exceeds the limit;
    // the latched set only grows, so each pass either adds a branch or settles
    let clamped = RefCell::new(vec![false; sys.ders.len()]);
    let injection = |v: &[Complex64]| -> Vec<Complex64> {
        let mut c = clamped.borrow_mut();
        let mut out = der_output(v, &c);
        for (k, d) in sys.ders.iter().enumerate() {
            if !c[k] && out[k].norm() > d.limit * d.i_rated {
                c[k] = true;
                out[k] = held[k];
            }
        }
        let mut inj = sys.source_current.clone();
        for (d, i) in sys.ders.iter().zip(out) {
            inject_current(&mut inj, d.terminals, i);
        }
        inj
    };
    let mut start = prefault.voltages.clone();
    let mut result = None;
    for _ in 0..opts.clamp_iterations.max(1) {
        let before = clamped.borrow().clone();
        let fp = if sys.ders.is_empty() {
            FixedPoint { voltages: solver.solve_linear(&sys.source_current), iterations: 1, mismatch: 0.0 }
        } else {
            match solver.fixed_point(net, start.clone(), &opts.powerflow, &injection) {
                Ok(fp) => fp,
                Err(e) if *clamped.borrow() == before => return Err(e.into()),
                Err(_) => continue,
            }
        };
        injection(&fp.voltages);
        start = fp.voltages.clone();
        if *clamped.borrow() == before {
            result = Some(fp);
            break;
        }
    }
    let clamped = clamped.into_inner();
    let fp = result.ok_or(FaultError::ClampNonConvergence(opts.clamp_iterations))?;
    let v = &fp.voltages;
    let mut fault_currents = [Complex64::default(); 3];
    if sys.energized.get(bus).copied().unwrap_or(false) {
        for &(t, y) in &stamp.branches {
            let i = y * branch_voltage(v, t);
            for (end, sign) in [(t.0, 1.0), (t.1, -1.0)] {
                if let Some(n) = end {
                    if let NodeKind::Bus { phase, .. } = sys.nodes.kind(n) {
                        fault_currents[phase.index()] += i * sign;
                    }
                }
            }
        }
    }
    let mut der_currents = vec![Vec::new(); net.ders.len()];
    let mut der_limited = vec![false; net.ders.len()];
    for ((d, i), &c) in sys.ders.iter().zip(der_output(v, &clamped)).zip(&clamped) {
        der_currents[d.der].push(i);
        der_limited[d.der] |= c;
    }
    Ok(FaultSolution { solution: solver.package(fp), fault_bus: bus, fault_currents, der_currents, der_limited })
}

/// Resolves a fault location to a bus, splitting the line for interior
/// faults. Interior faults on switches fall back to the nearer endpoint.
pub fn resolve_fault_location<'a>(
    net: &'a Network,
    location: &FaultLocation,
) -> Result<(Cow<'a, Network>, usize), FaultError> {
    match location {
        FaultLocation::Bus { bus } => {
            let b = net.bus_index(bus).ok_or_else(|| FaultError::UnknownLocation(bus.clone()))?;
            Ok((Cow::Borrowed(net), b))
        }
        FaultLocation::Line { line, position } => match insert_midline_bus(net, line, *position) {
            Ok((split, id)) => {
                let b = split.bus_index(&id).expect("inserted bus");
                Ok((Cow::Owned(split), b))
            }
            Err(FaultError::SwitchableLine(_)) => {
                let l = net.line(line).expect("checked by insert_midline_bus");
                let end = if *position < 0.5 { &l.from_bus } else { &l.to_bus };
                log::warn!("line {line} is a switch; fault placed at bus {end}");
                Ok((Cow::Borrowed(net), net.bus_index(end).expect("validated")))
            }
            Err(e) => Err(e),
        },
    }
}

/// Checks a fault type against the phases and grounding at its bus.
pub fn check_fault_type(net: &Network, bus: usize, fault: FaultType) -> Result<(), FaultError> {
    let b = &net.buses[bus];
    let ok = valid_fault_kinds(b.phases, crate::netmodel::ground_path_exists(net)).contains(&fault.kind())
        && fault.phases().is_subset(b.phases);
    if ok {
        Ok(())
    } else {
        Err(FaultError::InvalidType { fault, location: b.id.clone() })
    }
}

/// Prefault power flow followed by the during-fault solve of `spec`.
/// Line-interior faults are solved on the network with the dummy bus inserted;
/// `prefault` is only reused when it belongs to the network actually solved.
pub fn solve_fault(
    net: &Network,
    scenario: &ScenarioSample,
    spec: &FaultSpec,
    prefault: &PowerFlowSolution,
    opts: &FaultOptions,
) -> Result<FaultSolution, FaultError> {
    let (work, bus) = resolve_fault_location(net, &spec.location)?;
    check_fault_type(&work, bus, spec.fault_type)?;
    let model = NetworkModel::new(&work)?;
    let state = NetworkState::default();
    let own_prefault;
    let pre = if prefault.voltages.len() == model.nodes.len() {
        prefault
    } else {
        let system = model.assemble(&work, scenario, &state, LoadTreatment::Normal)?;
        own_prefault = Solver::new(&work, system)?.solve(&work, None, &opts.powerflow)?;
        &own_prefault
    };
    solve_fault_with_model(&model, &work, scenario, &state, bus, spec.fault_type, spec.impedance_ohm, pre, opts)
}
