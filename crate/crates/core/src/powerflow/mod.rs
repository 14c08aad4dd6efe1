//! Unbalanced three-phase steady-state power flow.
//!
//! Elements are stamped into a nodal admittance matrix in physical units
//! (volts, amperes, siemens). Constant-impedance elements live in the matrix,
//! which is factorized once; constant-power and constant-current loads and
//! DER outputs are iterated as current injections around it. Results are
//! reported per unit on each bus's line-to-neutral base.

mod export;
mod maxload;
mod model;
mod sequence;
mod solver;
pub mod sparse;

use thiserror::Error;

pub use export::write_solution_csv;
pub use maxload::{max_load_current, max_load_currents};
pub use model::{
    assemble_admittance, branch_voltage, energized_buses, floating_nodes, inject_current, AdmittanceSystem, DerInjection, LoadTreatment, NetworkModel, NetworkState,
    NodeKind, NodeMap, ShuntInjection, Terminals, LEAK_SIEMENS,
};
pub use sequence::{sequence_components, SequenceComponents};
pub(crate) use solver::FixedPoint;
pub use solver::{solve_powerflow, LineCurrents, PowerFlowOptions, PowerFlowSolution, Solver};

/// Phasor stored in rectangular form.
pub type ComplexPhasor = num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerFlowError {
    #[error("element '{0}' has a singular impedance")]
    SingularElement(String),
    #[error("admittance matrix is singular at node {node}")]
    SingularMatrix { node: String },
    #[error("power flow did not converge after {iterations} iterations (worst node {worst_bus}, mismatch {mismatch:.3e} pu)")]
    NonConvergence { worst_bus: String, mismatch: f64, iterations: usize },
    #[error("scenario has {got_loads} load and {got_ders} DER scales, network has {loads} loads and {ders} DERs")]
    ScenarioMismatch { loads: usize, ders: usize, got_loads: usize, got_ders: usize },
    #[error("source bus is not part of the network")]
    MissingSource,
    #[error("unknown line '{0}'")]
    UnknownLine(String),
    #[error("unknown device '{0}'")]
    UnknownDevice(String),
    #[error("{element}: {message}")]
    InvalidElement { element: String, message: String },
    #[error("profile hour {hour}: {source}")]
    AtHour { hour: usize, source: Box<PowerFlowError> },
}
