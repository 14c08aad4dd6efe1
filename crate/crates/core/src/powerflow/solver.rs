use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model::{AdmittanceSystem, LoadTreatment, NetworkModel, NetworkState, NodeMap};
use super::sparse::SparseLu;
use super::PowerFlowError;
use crate::netmodel::{Network, Phase};
use crate::scenario::ScenarioSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerFlowOptions {
    /// Convergence threshold on the largest per-node voltage change (pu).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        PowerFlowOptions { tolerance: 1e-6, max_iterations: 100 }
    }
}

/// Phase currents of one line at both terminals, each flowing into the line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineCurrents {
    pub phases: Vec<Phase>,
    pub from: Vec<Complex64>,
    pub to: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub nodes: NodeMap,
    /// Node voltages (V), indexed per [`NodeMap`].
    pub voltages: Vec<Complex64>,
    pub energized: Vec<bool>,
    /// `None` for open or de-energized lines.
    pub line_currents: Vec<Option<LineCurrents>>,
    pub iterations: usize,
    /// Largest voltage change of the final iteration (pu).
    pub max_mismatch: f64,
}

impl PowerFlowSolution {
    pub fn voltage(&self, bus: usize, phase: Phase) -> Option<Complex64> {
        self.nodes.node(bus, phase).map(|n| self.voltages[n])
    }

    /// Per-unit voltage on the bus's line-to-neutral base.
    pub fn voltage_pu(&self, bus: usize, phase: Phase) -> Option<Complex64> {
        self.nodes.node(bus, phase).map(|n| self.voltages[n] / self.nodes.base_ln(n))
    }

    /// Phase voltages at a bus (absent phases read 0).
    pub fn bus_voltages(&self, bus: usize) -> [Complex64; 3] {
        Phase::ALL.map(|p| self.voltage(bus, p).unwrap_or_default())
    }

    /// Currents into the line at each terminal, per phase A/B/C (absent
    /// phases and open lines read 0).
    pub fn branch_currents(&self, net: &Network, line: &str) -> Result<([Complex64; 3], [Complex64; 3]), PowerFlowError> {
        let li = net.line_index(line).ok_or_else(|| PowerFlowError::UnknownLine(line.to_string()))?;
        Ok(self.line_terminal_currents(li))
    }

    pub fn line_terminal_currents(&self, line: usize) -> ([Complex64; 3], [Complex64; 3]) {
        let mut from = [Complex64::default(); 3];
        let mut to = [Complex64::default(); 3];
        if let Some(Some(lc)) = self.line_currents.get(line) {
            for (k, p) in lc.phases.iter().enumerate() {
                from[p.index()] = lc.from[k];
                to[p.index()] = lc.to[k];
            }
        }
        (from, to)
    }
}

/// Result of a fixed-point run before packaging.
pub(crate) struct FixedPoint {
    pub voltages: Vec<Complex64>,
    pub iterations: usize,
    pub mismatch: f64,
}

/// A factorized admittance system ready for repeated solves.
#[derive(Debug, Clone)]
pub struct Solver {
    pub system: AdmittanceSystem,
    lu: SparseLu,
}

impl Solver {
    pub fn new(net: &Network, system: AdmittanceSystem) -> Result<Solver, PowerFlowError> {
        let lu = SparseLu::factor(&system.y)
            .map_err(|e| PowerFlowError::SingularMatrix { node: system.nodes.describe(net, e.row) })?;
        Ok(Solver { system, lu })
    }

    pub fn solve_linear(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        self.lu.solve(rhs)
    }

    /// Node voltages with every injection switched off.
    pub fn no_load_voltages(&self) -> Vec<Complex64> {
        self.lu.solve(&self.system.source_current)
    }

    /// Iterates `V ← Y⁻¹ I(V)` from `start` until the largest per-unit
    /// voltage change drops below the tolerance.
    pub(crate) fn fixed_point(
        &self,
        net: &Network,
        start: Vec<Complex64>,
        options: &PowerFlowOptions,
        injections: impl Fn(&[Complex64]) -> Vec<Complex64>,
    ) -> Result<FixedPoint, PowerFlowError> {
        let nodes = &self.system.nodes;
        let mut v = start;
        let mut worst = (0usize, f64::INFINITY);
        for it in 1..=options.max_iterations.max(1) {
            let next = self.lu.solve(&injections(&v));
            worst = (0, 0.0);
            for (i, (a, b)) in next.iter().zip(&v).enumerate() {
                let d = (a - b).norm() / nodes.base_ln(i);
                if d > worst.1 || !d.is_finite() {
                    worst = (i, d);
                }
            }
            v = next;
            if worst.1 < options.tolerance {
                return Ok(FixedPoint { voltages: v, iterations: it, mismatch: worst.1 });
            }
        }
        Err(PowerFlowError::NonConvergence {
            worst_bus: nodes.describe(net, worst.0),
            mismatch: worst.1,
            iterations: options.max_iterations,
        })
    }

    /// Steady-state solution with loads and DERs at constant power.
    pub fn solve(
        &self,
        net: &Network,
        warm_start: Option<&[Complex64]>,
        options: &PowerFlowOptions,
    ) -> Result<PowerFlowSolution, PowerFlowError> {
        let sys = &self.system;
        let fp = if sys.loads.is_empty() && sys.ders.is_empty() {
            FixedPoint { voltages: self.no_load_voltages(), iterations: 1, mismatch: 0.0 }
        } else {
            let start = match warm_start {
                Some(v) if v.len() == sys.nodes.len() => v.to_vec(),
                _ => self.no_load_voltages(),
            };
            self.fixed_point(net, start, options, |v| sys.injections(v))?
        };
        Ok(self.package(fp))
    }

    pub(crate) fn package(&self, fp: FixedPoint) -> PowerFlowSolution {
        let v = &fp.voltages;
        let line_currents = self
            .system
            .lines
            .iter()
            .map(|stamp| {
                stamp.as_ref().map(|s| {
                    let dv: Vec<Complex64> = s.from.iter().zip(&s.to).map(|(&f, &t)| v[f] - v[t]).collect();
                    let from: Vec<Complex64> =
                        s.yz.iter().map(|row| row.iter().zip(&dv).map(|(y, d)| y * d).sum()).collect();
                    let to = from.iter().map(|i| -i).collect();
                    LineCurrents { phases: s.phases.clone(), from, to }
                })
            })
            .collect();
        PowerFlowSolution {
            nodes: self.system.nodes.clone(),
            voltages: fp.voltages,
            energized: self.system.energized.clone(),
            line_currents,
            iterations: fp.iterations,
            max_mismatch: fp.mismatch,
        }
    }
}

/// Solves the steady-state power flow of `net` under one scenario.
pub fn solve_powerflow(
    net: &Network,
    scenario: &ScenarioSample,
    options: &PowerFlowOptions,
) -> Result<PowerFlowSolution, PowerFlowError> {
    let model = NetworkModel::new(net)?;
    let system = model.assemble(net, scenario, &NetworkState::default(), LoadTreatment::Normal)?;
    Solver::new(net, system)?.solve(net, None, options)
}
