//! Electrical network data model for a single radial feeder.
//!
//! A [`Network`] is produced by the DSS parser (see [`parse_dss`]) or built
//! programmatically and then checked with [`validate`]. Once constructed it is
//! treated as immutable and shared between episode workers behind an `Arc`.

mod canonical;
mod dot;
mod dss;
mod ground;
mod topology;
mod validate;

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use canonical::to_canonical;
pub use dot::{topology_to_dot, DotStyle};
pub use dss::{parse_dss, parse_dss_file, DssError, ParseOutput};
pub use ground::ground_path_exists;
pub use topology::{build_topology, DirectedTopology, EdgeKind, TopoEdge, TopologyError};
pub use validate::{validate, Diagnostic, Severity};

/// One conductor phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Phase> {
        Phase::ALL.get(i).copied()
    }

    /// DSS node number (1-based).
    pub fn node(self) -> usize {
        self.index() + 1
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Phase::A => 'A',
            Phase::B => 'B',
            Phase::C => 'C',
        };
        write!(f, "{c}")
    }
}

/// Nonempty subset of {A, B, C}, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn new(phases: impl IntoIterator<Item = Phase>) -> Option<PhaseSet> {
        let mask = phases.into_iter().fold(0u8, |m, p| m | (1 << p.index()));
        (mask != 0).then_some(PhaseSet(mask))
    }

    pub fn single(p: Phase) -> PhaseSet {
        PhaseSet(1 << p.index())
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn is_subset(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: PhaseSet) -> PhaseSet {
        PhaseSet(self.0 | other.0)
    }

    /// Phases in A < B < C order.
    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    /// Position of `p` within this set's ordered phases.
    pub fn position(self, p: Phase) -> Option<usize> {
        self.iter().position(|q| q == p)
    }

    /// DSS node suffix, e.g. `.1.2.3`.
    pub fn dss_suffix(self) -> String {
        self.iter().map(|p| format!(".{}", p.node())).collect()
    }
}

impl fmt::Debug for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhaseSet({self})")
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl Serialize for PhaseSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PhaseSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for PhaseSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut phases = Vec::new();
        for c in s.chars() {
            phases.push(match c.to_ascii_uppercase() {
                'A' => Phase::A,
                'B' => Phase::B,
                'C' => Phase::C,
                _ => return Err(format!("invalid phase '{c}' in '{s}'")),
            });
        }
        PhaseSet::new(phases).ok_or_else(|| "empty phase set".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    /// Line-to-line base voltage in kV.
    pub base_kv: f64,
}

impl Bus {
    /// Line-to-neutral base voltage in volts.
    pub fn base_ln_volts(&self) -> f64 {
        self.base_kv * 1000.0 / 3f64.sqrt()
    }
}

/// Per-unit-length series impedance of a conductor configuration, in ohm/km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCode {
    pub id: String,
    pub n_phases: usize,
    /// Row-major `n_phases × n_phases`.
    pub r_matrix: Vec<f64>,
    pub x_matrix: Vec<f64>,
}

impl LineCode {
    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.n_phases + j;
        Complex64::new(self.r_matrix[k], self.x_matrix[k])
    }

    /// Series impedance matrix (ohm) of a line of `length_km` using this code,
    /// reduced to the line's phases. Returns `None` when the code cannot serve
    /// those phases.
    pub fn series_impedance(&self, phases: PhaseSet, length_km: f64) -> Option<Vec<Vec<Complex64>>> {
        let positions: Vec<usize> = if phases.len() == self.n_phases {
            (0..self.n_phases).collect()
        } else if self.n_phases == 3 {
            phases.iter().map(Phase::index).collect()
        } else {
            return None;
        };
        Some(
            positions
                .iter()
                .map(|&i| positions.iter().map(|&j| self.z(i, j) * length_km).collect())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub phases: PhaseSet,
    pub length_km: f64,
    pub code: String,
    /// Switch or fuse position modeled as a near-zero-impedance line.
    pub switchable: bool,
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindingConnection {
    WyeGrounded,
    Wye,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Winding {
    pub bus: String,
    /// Bus nodes the winding attaches to. A single-unit delta winding spans two phases.
    pub phases: PhaseSet,
    pub connection: WindingConnection,
    /// Winding rated voltage in kV: line-to-line for three-phase banks, the
    /// unit winding voltage for single-phase units.
    pub kv: f64,
    pub kva: f64,
    pub tap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub id: String,
    /// Number of single-phase units in the bank (1 or 3).
    pub units: usize,
    pub windings: Vec<Winding>,
    /// Series impedance in per-unit on the winding-1 kVA base.
    pub series_impedance: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadConnection {
    Wye,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadModel {
    ConstantPq,
    ConstantZ,
    ConstantI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    pub connection: LoadConnection,
    /// Total base real power over all phases (kW); see [`LoadSpec::kw_per_phase`].
    pub kw: f64,
    pub kvar: f64,
    pub model: LoadModel,
}

impl LoadSpec {
    pub fn kw_per_phase(&self) -> f64 {
        self.kw / element_branches(self.phases, self.connection == LoadConnection::Delta).len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerKind {
    Pv,
    Wind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerSpec {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    pub kind: DerKind,
    pub rated_kva: f64,
    pub connection: LoadConnection,
    /// Fault-current ceiling as a multiple of rated current.
    pub fault_current_limit: f64,
    pub pf: f64,
}

/// Parsed but not part of the admittance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitorSpec {
    pub id: String,
    pub bus: String,
    pub phases: PhaseSet,
    pub kvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub name: String,
    pub bus: String,
    pub nominal_kv: f64,
    pub pu: f64,
    pub angle_deg: f64,
    /// Positive-sequence Thevenin impedance (ohm).
    pub z1: Complex64,
    /// Zero-sequence Thevenin impedance (ohm); unused when ungrounded.
    pub z0: Complex64,
    pub grounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Relay,
    Recloser,
    Fuse,
}

impl DeviceKind {
    pub fn dss_class(self) -> &'static str {
        match self {
            DeviceKind::Relay => "Relay",
            DeviceKind::Recloser => "Recloser",
            DeviceKind::Fuse => "Fuse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceLocation {
    pub id: String,
    pub kind: DeviceKind,
    pub line: String,
    /// Terminal (1 = from bus, 2 = to bus) the device sits at; that end is
    /// treated as upstream.
    pub terminal: u8,
}

/// A single-source distribution feeder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub buses: Vec<Bus>,
    pub linecodes: Vec<LineCode>,
    pub lines: Vec<Line>,
    pub transformers: Vec<Transformer>,
    pub loads: Vec<LoadSpec>,
    pub ders: Vec<DerSpec>,
    pub capacitors: Vec<CapacitorSpec>,
    pub source: SourceSpec,
    pub devices: Vec<DeviceLocation>,
    #[serde(skip)]
    index: NetworkIndex,
}

#[derive(Debug, Clone, Default)]
struct NetworkIndex {
    buses: HashMap<String, usize>,
    lines: HashMap<String, usize>,
    linecodes: HashMap<String, usize>,
    devices: HashMap<String, usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.buses == other.buses
            && self.linecodes == other.linecodes
            && self.lines == other.lines
            && self.transformers == other.transformers
            && self.loads == other.loads
            && self.ders == other.ders
            && self.capacitors == other.capacitors
            && self.source == other.source
            && self.devices == other.devices
    }
}

impl Network {
    /// Assembles a network from its parts and builds the id lookup tables.
    /// No validation is performed; call [`validate`] for diagnostics.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        name: String,
        buses: Vec<Bus>,
        linecodes: Vec<LineCode>,
        lines: Vec<Line>,
        transformers: Vec<Transformer>,
        loads: Vec<LoadSpec>,
        ders: Vec<DerSpec>,
        capacitors: Vec<CapacitorSpec>,
        source: SourceSpec,
        devices: Vec<DeviceLocation>,
    ) -> Network {
        let mut net = Network {
            name,
            buses,
            linecodes,
            lines,
            transformers,
            loads,
            ders,
            capacitors,
            source,
            devices,
            index: NetworkIndex::default(),
        };
        net.reindex();
        net
    }

    pub(crate) fn reindex(&mut self) {
        fn map<T>(items: &[T], key: impl Fn(&T) -> &str) -> HashMap<String, usize> {
            let mut m = HashMap::with_capacity(items.len());
            for (i, it) in items.iter().enumerate() {
                m.entry(key(it).to_string()).or_insert(i);
            }
            m
        }
        self.index = NetworkIndex {
            buses: map(&self.buses, |b| &b.id),
            lines: map(&self.lines, |l| &l.id),
            linecodes: map(&self.linecodes, |c| &c.id),
            devices: map(&self.devices, |d| &d.id),
        };
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.index.buses.get(id).copied()
    }

    pub fn bus(&self, id: &str) -> Option<&Bus> {
        self.bus_index(id).map(|i| &self.buses[i])
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.index.lines.get(id).copied()
    }

    pub fn line(&self, id: &str) -> Option<&Line> {
        self.line_index(id).map(|i| &self.lines[i])
    }

    pub fn linecode(&self, id: &str) -> Option<&LineCode> {
        self.index.linecodes.get(id).map(|&i| &self.linecodes[i])
    }

    pub fn device_index(&self, id: &str) -> Option<usize> {
        self.index.devices.get(id).copied()
    }

    pub fn device(&self, id: &str) -> Option<&DeviceLocation> {
        self.device_index(id).map(|i| &self.devices[i])
    }

    pub fn source_bus_index(&self) -> Option<usize> {
        self.bus_index(&self.source.bus)
    }

    /// Series impedance matrix (ohm) of a line, reduced to its phases.
    pub fn line_impedance(&self, line: &Line) -> Option<Vec<Vec<Complex64>>> {
        self.linecode(&line.code)?.series_impedance(line.phases, line.length_km)
    }

    /// The bus a device is installed at.
    pub fn device_bus(&self, dev: &DeviceLocation) -> Option<&str> {
        let line = self.line(&dev.line)?;
        Some(if dev.terminal == 2 { &line.to_bus } else { &line.from_bus })
    }

    pub fn device_ids(&self) -> Vec<String> {
        self.devices.iter().map(|d| d.id.clone()).collect()
    }
}

/// Terminal pairs of a wye- or delta-connected shunt element. The second
/// member is `None` for the ground/neutral reference.
pub fn element_branches(phases: PhaseSet, delta: bool) -> Vec<(Phase, Option<Phase>)> {
    let ps: Vec<Phase> = phases.iter().collect();
    if !delta {
        return ps.into_iter().map(|p| (p, None)).collect();
    }
    match ps.len() {
        3 => vec![
            (Phase::A, Some(Phase::B)),
            (Phase::B, Some(Phase::C)),
            (Phase::C, Some(Phase::A)),
        ],
        2 => vec![(ps[0], Some(ps[1]))],
        _ => Vec::new(),
    }
}
