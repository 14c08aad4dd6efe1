use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::sparse::{invert_dense, SparseMatrix};
use super::PowerFlowError;
use crate::netmodel::{
    element_branches, LoadConnection, LoadModel, Network, Phase, WindingConnection,
};
use crate::scenario::ScenarioSample;

/// Conductance tied to ground from every node that has no other ground
/// reference (ungrounded zones and de-energized buses), so the matrix stays
/// nonsingular and the floating common-mode voltage is pinned near zero.
pub const LEAK_SIEMENS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Bus { bus: usize, phase: Phase },
    /// Floating star point of an ungrounded wye transformer winding.
    Neutral { transformer: usize, winding: usize },
}

/// Fixed ordering of electrical nodes: bus insertion order × phase A<B<C,
/// followed by internal neutral points.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMap {
    kinds: Vec<NodeKind>,
    bus_nodes: Vec<[Option<usize>; 3]>,
    /// Line-to-neutral base voltage per node (V).
    base_ln: Vec<f64>,
}

impl NodeMap {
    pub fn new(net: &Network) -> NodeMap {
        let mut kinds = Vec::new();
        let mut base_ln = Vec::new();
        let mut bus_nodes = vec![[None; 3]; net.buses.len()];
        for (b, bus) in net.buses.iter().enumerate() {
            for p in bus.phases.iter() {
                bus_nodes[b][p.index()] = Some(kinds.len());
                kinds.push(NodeKind::Bus { bus: b, phase: p });
                base_ln.push(bus.base_ln_volts());
            }
        }
        for (t, tr) in net.transformers.iter().enumerate() {
            for (w, wd) in tr.windings.iter().enumerate() {
                if wd.connection == WindingConnection::Wye {
                    kinds.push(NodeKind::Neutral { transformer: t, winding: w });
                    base_ln.push(net.bus(&wd.bus).map_or(1.0, |b| b.base_ln_volts()));
                }
            }
        }
        NodeMap { kinds, bus_nodes, base_ln }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn node(&self, bus: usize, phase: Phase) -> Option<usize> {
        self.bus_nodes.get(bus)?[phase.index()]
    }

    pub fn bus_count(&self) -> usize {
        self.bus_nodes.len()
    }

    pub fn base_ln(&self, node: usize) -> f64 {
        self.base_ln[node]
    }

    fn neutral(&self, transformer: usize, winding: usize) -> Option<usize> {
        self.kinds.iter().position(|k| *k == NodeKind::Neutral { transformer, winding })
    }

    pub fn describe(&self, net: &Network, node: usize) -> String {
        match self.kinds[node] {
            NodeKind::Bus { bus, phase } => format!("{}.{}", net.buses[bus].id, phase.node()),
            NodeKind::Neutral { transformer, winding } => {
                format!("{}.wdg{}.neutral", net.transformers[transformer].id, winding + 1)
            }
        }
    }
}

/// Terminal pair of a two-terminal primitive branch; `None` is ground.
pub type Terminals = (Option<usize>, Option<usize>);

#[derive(Debug, Clone)]
pub(crate) struct LineStamp {
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    pub phases: Vec<Phase>,
    /// Inverse of the series impedance matrix (S).
    pub yz: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub(crate) struct TransformerStamp {
    /// One entry per single-phase unit: winding 1 and winding 2 terminals.
    pub units: Vec<(Terminals, Terminals)>,
    /// 2×2 primitive admittance shared by all units.
    pub yprim: [[Complex64; 2]; 2],
}

/// Element admittances that depend only on the network, computed once and
/// reused for every scenario and switching state.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub nodes: NodeMap,
    pub(crate) lines: Vec<Option<LineStamp>>,
    pub(crate) transformers: Vec<TransformerStamp>,
    pub(crate) source_nodes: Vec<usize>,
    pub(crate) source_y: Vec<Vec<Complex64>>,
    pub(crate) source_emf: Vec<Complex64>,
}

fn phasor(mag: f64, deg: f64) -> Complex64 {
    Complex64::from_polar(mag, deg * PI / 180.0)
}

/// Node pairs of a wye or delta shunt element at `bus`.
pub(crate) fn shunt_terminals(
    nodes: &NodeMap,
    bus: usize,
    phases: crate::netmodel::PhaseSet,
    delta: bool,
) -> Option<Vec<Terminals>> {
    element_branches(phases, delta)
        .into_iter()
        .map(|(p, q)| {
            let a = nodes.node(bus, p)?;
            let b = match q {
                Some(q) => Some(nodes.node(bus, q)?),
                None => None,
            };
            Some((Some(a), b))
        })
        .collect()
}

impl NetworkModel {
    pub fn new(net: &Network) -> Result<NetworkModel, PowerFlowError> {
        let nodes = NodeMap::new(net);
        let invalid = |id: &str, msg: &str| PowerFlowError::InvalidElement { element: id.to_string(), message: msg.to_string() };
        let mut lines = Vec::with_capacity(net.lines.len());
        for l in &net.lines {
            let (Some(f), Some(t)) = (net.bus_index(&l.from_bus), net.bus_index(&l.to_bus)) else {
                return Err(invalid(&l.id, "references an unknown bus"));
            };
            let z = net.line_impedance(l).ok_or_else(|| invalid(&l.id, "line code does not match its phases"))?;
            let yz = invert_dense(&z).ok_or_else(|| PowerFlowError::SingularElement(l.id.clone()))?;
            let phases: Vec<Phase> = l.phases.iter().collect();
            let from: Option<Vec<usize>> = phases.iter().map(|&p| nodes.node(f, p)).collect();
            let to: Option<Vec<usize>> = phases.iter().map(|&p| nodes.node(t, p)).collect();
            let (Some(from), Some(to)) = (from, to) else {
                return Err(invalid(&l.id, "phases missing at a terminal bus"));
            };
            lines.push(Some(LineStamp { from, to, phases, yz }));
        }
        let mut transformers = Vec::with_capacity(net.transformers.len());
        for (ti, tr) in net.transformers.iter().enumerate() {
            if tr.windings.len() != 2 {
                return Err(invalid(&tr.id, "only two-winding transformers are supported"));
            }
            let mut unit_terms: [Vec<Terminals>; 2] = [Vec::new(), Vec::new()];
            let mut unit_kv = [0.0; 2];
            for (w, wd) in tr.windings.iter().enumerate() {
                let b = net.bus_index(&wd.bus).ok_or_else(|| invalid(&tr.id, "references an unknown bus"))?;
                let ps: Vec<Phase> = wd.phases.iter().collect();
                let node = |p: Phase| nodes.node(b, p).ok_or_else(|| invalid(&tr.id, "phases missing at a terminal bus"));
                let terms: Vec<Terminals> = match (tr.units, wd.connection) {
                    (3, WindingConnection::Delta) => {
                        if ps.len() != 3 {
                            return Err(invalid(&tr.id, "three-phase delta winding needs three phases"));
                        }
                        (0..3).map(|k| Ok((Some(node(ps[k])?), Some(node(ps[(k + 1) % 3])?)))).collect::<Result<_, _>>()?
                    }
                    (_, WindingConnection::Delta) => {
                        if ps.len() != 2 {
                            return Err(invalid(&tr.id, "single-phase delta winding needs two phases"));
                        }
                        vec![(Some(node(ps[0])?), Some(node(ps[1])?))]
                    }
                    (_, conn) => {
                        if ps.len() != tr.units {
                            return Err(invalid(&tr.id, "wye winding phase count must equal the unit count"));
                        }
                        let neutral = match conn {
                            WindingConnection::Wye => Some(nodes.neutral(ti, w).expect("neutral node allocated")),
                            _ => None,
                        };
                        ps.iter().map(|&p| Ok((Some(node(p)?), neutral))).collect::<Result<_, _>>()?
                    }
                };
                unit_terms[w] = terms;
                unit_kv[w] = if tr.units == 3 && wd.connection != WindingConnection::Delta {
                    wd.kv / 3f64.sqrt()
                } else {
                    wd.kv
                } * wd.tap;
            }
            if unit_terms[0].len() != unit_terms[1].len() {
                return Err(invalid(&tr.id, "winding unit counts differ"));
            }
            let kva_unit = tr.windings[0].kva / unit_terms[0].len() as f64;
            let v2 = tr.windings[1].kv
                / if tr.units == 3 && tr.windings[1].connection != WindingConnection::Delta { 3f64.sqrt() } else { 1.0 };
            let z_base = v2 * v2 * 1000.0 / kva_unit;
            let z = tr.series_impedance * z_base;
            if z.norm() == 0.0 {
                return Err(PowerFlowError::SingularElement(tr.id.clone()));
            }
            let y = 1.0 / z;
            let t = unit_kv[0] / unit_kv[1];
            let yprim = [[y / (t * t), -y / t], [-y / t, y]];
            let units = unit_terms[0].iter().copied().zip(unit_terms[1].iter().copied()).collect();
            transformers.push(TransformerStamp { units, yprim });
        }
        let s = &net.source;
        let source_bus = net.source_bus_index().ok_or(PowerFlowError::MissingSource)?;
        let src_phases: Vec<Phase> = net.buses[source_bus].phases.iter().collect();
        let source_nodes: Vec<usize> = src_phases.iter().map(|&p| nodes.node(source_bus, p).expect("bus phase")).collect();
        if s.z1.norm() == 0.0 || (s.grounded && s.z0.norm() == 0.0) {
            return Err(PowerFlowError::SingularElement(format!("circuit.{}", s.name)));
        }
        let y1 = 1.0 / s.z1;
        let y0 = if s.grounded { 1.0 / s.z0 } else { Complex64::default() };
        let full: Vec<Vec<Complex64>> = (0..3)
            .map(|i| (0..3).map(|j| y1 * (if i == j { 1.0 } else { 0.0 } - 1.0 / 3.0) + y0 / 3.0).collect())
            .collect();
        let source_y: Vec<Vec<Complex64>> =
            src_phases.iter().map(|p| src_phases.iter().map(|q| full[p.index()][q.index()]).collect()).collect();
        let vln = s.pu * s.nominal_kv * 1000.0 / 3f64.sqrt();
        let source_emf = src_phases.iter().map(|p| phasor(vln, s.angle_deg - 120.0 * p.index() as f64)).collect();
        Ok(NetworkModel { nodes, lines, transformers, source_nodes, source_y, source_emf })
    }
}

/// Switching configuration overlaid on the network's own switch states.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct NetworkState {
    /// Line indices forced open (tripped breakers).
    pub open_lines: BTreeSet<usize>,
}

/// A shunt element branch iterated as a current injection.
#[derive(Debug, Clone, Copy)]
pub struct ShuntInjection {
    pub element: usize,
    pub terminals: Terminals,
    /// Complex power consumed by the branch at nominal voltage (VA).
    pub s: Complex64,
    /// Nominal branch voltage (V).
    pub v_nom: f64,
    pub model: LoadModel,
}

impl ShuntInjection {
    /// Branch current flowing from the first terminal to the second.
    pub fn current(&self, v: Complex64) -> Complex64 {
        let vm = v.norm();
        if vm < 1e-9 * self.v_nom {
            return Complex64::default();
        }
        match self.model {
            LoadModel::ConstantPq => (self.s / v).conj(),
            LoadModel::ConstantZ => v * (self.s / (self.v_nom * self.v_nom)).conj(),
            LoadModel::ConstantI => {
                let mag = self.s.norm() / self.v_nom;
                Complex64::from_polar(mag, v.arg() - self.s.arg())
            }
        }
    }
}

/// A DER branch injecting current into its first terminal.
#[derive(Debug, Clone, Copy)]
pub struct DerInjection {
    pub der: usize,
    pub terminals: Terminals,
    /// Complex power delivered by the branch (VA).
    pub s: Complex64,
    /// Rated branch current (A).
    pub i_rated: f64,
    pub limit: f64,
}

impl DerInjection {
    pub fn current(&self, v: Complex64) -> Complex64 {
        if v.norm() < 1e-9 {
            return Complex64::default();
        }
        (self.s / v).conj()
    }
}

/// How loads enter the admittance matrix.
#[derive(Debug, Clone, Copy)]
pub enum LoadTreatment<'a> {
    /// Constant-Z loads stamped, other models iterated as injections.
    Normal,
    /// Every load converted to the admittance it presented at these node voltages.
    FrozenAt(&'a [Complex64]),
}

/// Nodal admittance matrix plus the injection slots iterated around it.
#[derive(Debug, Clone)]
pub struct AdmittanceSystem {
    pub nodes: NodeMap,
    pub y: SparseMatrix,
    /// Norton current of the source (A).
    pub source_current: Vec<Complex64>,
    pub loads: Vec<ShuntInjection>,
    pub ders: Vec<DerInjection>,
    /// Energization per bus.
    pub energized: Vec<bool>,
    pub(crate) lines: Vec<Option<LineStamp>>,
}

/// Voltage across a terminal pair.
pub fn branch_voltage(v: &[Complex64], t: Terminals) -> Complex64 {
    t.0.map_or(Complex64::default(), |i| v[i]) - t.1.map_or(Complex64::default(), |i| v[i])
}

/// Adds a current entering the first terminal and leaving the second.
pub fn inject_current(into: &mut [Complex64], t: Terminals, i: Complex64) {
    if let Some(a) = t.0 {
        into[a] += i;
    }
    if let Some(b) = t.1 {
        into[b] -= i;
    }
}

pub(crate) fn stamp_branch(y: &mut SparseMatrix, t: Terminals, v: Complex64) {
    match t {
        (Some(a), Some(b)) => {
            y.add(a, a, v);
            y.add(b, b, v);
            y.add(a, b, -v);
            y.add(b, a, -v);
        }
        (Some(a), None) | (None, Some(a)) => y.add(a, a, v),
        (None, None) => {}
    }
}

fn stamp_coupled(y: &mut SparseMatrix, p: Terminals, q: Terminals, v: Complex64) {
    // A_p · v · A_qᵀ for incidence columns p and q
    let sides = |t: Terminals| [(t.0, 1.0), (t.1, -1.0)];
    for (r, sr) in sides(p) {
        for (c, sc) in sides(q) {
            if let (Some(r), Some(c)) = (r, c) {
                y.add(r, c, v * (sr * sc));
            }
        }
    }
}

/// Buses reachable from the source through closed lines and transformers.
pub fn energized_buses(net: &Network, state: &NetworkState) -> Vec<bool> {
    let n = net.buses.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut link = |a: Option<usize>, b: Option<usize>| {
        if let (Some(a), Some(b)) = (a, b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    };
    for (i, l) in net.lines.iter().enumerate() {
        if l.closed && !state.open_lines.contains(&i) {
            link(net.bus_index(&l.from_bus), net.bus_index(&l.to_bus));
        }
    }
    for t in &net.transformers {
        link(net.bus_index(&t.windings[0].bus), net.bus_index(&t.windings[1].bus));
    }
    let mut on = vec![false; n];
    if let Some(root) = net.source_bus_index() {
        on[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !on[v] {
                    on[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    on
}

/// Per node: whether it carries the leak conductance.
///
/// Buses joined by closed lines form a galvanic zone. A zone is grounded
/// when it holds a grounded source or a grounded-wye winding; otherwise the
/// leak goes on the nodes of one root bus only (the source bus, else the
/// lowest-indexed transformer winding bus), so the floating common-mode
/// voltage is pinned at that bus and unaffected by the rest of the zone.
/// De-energized buses and ungrounded-wye neutrals always carry it.
pub fn floating_nodes(net: &Network, nodes: &NodeMap, state: &NetworkState, energized: &[bool]) -> Vec<bool> {
    let n = net.buses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, l) in net.lines.iter().enumerate() {
        if l.closed && !state.open_lines.contains(&i) {
            if let (Some(a), Some(b)) = (net.bus_index(&l.from_bus), net.bus_index(&l.to_bus)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut grounded = vec![false; n];
    let mut root: Vec<Option<usize>> = vec![None; n];
    let source = net.source_bus_index();
    if let Some(s) = source {
        let r = find(&mut parent, s);
        grounded[r] |= net.source.grounded;
        root[r] = Some(s);
    }
    for w in net.transformers.iter().flat_map(|t| &t.windings) {
        let Some(b) = net.bus_index(&w.bus) else { continue };
        let r = find(&mut parent, b);
        grounded[r] |= w.connection == WindingConnection::WyeGrounded;
        if root[r].is_none_or(|x| Some(x) != source && b < x) {
            root[r] = Some(b);
        }
    }
    (0..nodes.len())
        .map(|i| match nodes.kind(i) {
            NodeKind::Bus { bus, .. } => {
                let r = find(&mut parent, bus);
                !energized[bus] || (!grounded[r] && root[r] == Some(bus))
            }
            NodeKind::Neutral { .. } => true,
        })
        .collect()
}

fn branch_v_nom(net: &Network, bus: usize, delta_branch: bool) -> f64 {
    let b = &net.buses[bus];
    if delta_branch {
        b.base_kv * 1000.0
    } else {
        b.base_ln_volts()
    }
}

impl NetworkModel {
    /// Builds the admittance system for one scenario and switching state.
    pub fn assemble(
        &self,
        net: &Network,
        scenario: &ScenarioSample,
        state: &NetworkState,
        loads: LoadTreatment<'_>,
    ) -> Result<AdmittanceSystem, PowerFlowError> {
        if scenario.load_scale.len() != net.loads.len() || scenario.der_scale.len() != net.ders.len() {
            return Err(PowerFlowError::ScenarioMismatch {
                loads: net.loads.len(),
                ders: net.ders.len(),
                got_loads: scenario.load_scale.len(),
                got_ders: scenario.der_scale.len(),
            });
        }
        let n = self.nodes.len();
        let energized = energized_buses(net, state);
        let mut y = SparseMatrix::new(n);
        for (i, floating) in floating_nodes(net, &self.nodes, state, &energized).into_iter().enumerate() {
            if floating {
                y.add(i, i, Complex64::new(LEAK_SIEMENS, 0.0));
            }
        }
        let mut lines = vec![None; net.lines.len()];
        for (i, (l, stamp)) in net.lines.iter().zip(&self.lines).enumerate() {
            let Some(stamp) = stamp else { continue };
            let f = net.bus_index(&l.from_bus).expect("validated");
            if !l.closed || state.open_lines.contains(&i) || !energized[f] {
                continue;
            }
            for (a, &fa) in stamp.from.iter().enumerate() {
                for (b, &fb) in stamp.from.iter().enumerate() {
                    let v = stamp.yz[a][b];
                    y.add(fa, fb, v);
                    y.add(stamp.to[a], stamp.to[b], v);
                    y.add(fa, stamp.to[b], -v);
                    y.add(stamp.to[a], fb, -v);
                }
            }
            lines[i] = Some(stamp.clone());
        }
        for (t, stamp) in net.transformers.iter().zip(&self.transformers) {
            let b = net.bus_index(&t.windings[0].bus).expect("validated");
            if !energized[b] {
                continue;
            }
            for &(p, q) in &stamp.units {
                stamp_coupled(&mut y, p, p, stamp.yprim[0][0]);
                stamp_coupled(&mut y, p, q, stamp.yprim[0][1]);
                stamp_coupled(&mut y, q, p, stamp.yprim[1][0]);
                stamp_coupled(&mut y, q, q, stamp.yprim[1][1]);
            }
        }
        let mut source_current = vec![Complex64::default(); n];
        for (a, &na) in self.source_nodes.iter().enumerate() {
            for (b, &nb) in self.source_nodes.iter().enumerate() {
                y.add(na, nb, self.source_y[a][b]);
                source_current[na] += self.source_y[a][b] * self.source_emf[b];
            }
        }
        let mut load_slots = Vec::new();
        for (li, l) in net.loads.iter().enumerate() {
            let bus = net.bus_index(&l.bus).expect("validated");
            if !energized[bus] {
                continue;
            }
            let delta = l.connection == LoadConnection::Delta;
            let terms = shunt_terminals(&self.nodes, bus, l.phases, delta).ok_or_else(|| {
                PowerFlowError::InvalidElement { element: l.id.clone(), message: "phases missing at its bus".into() }
            })?;
            if terms.is_empty() {
                continue;
            }
            let s = Complex64::new(l.kw, l.kvar) * (1000.0 * scenario.load_scale[li] / terms.len() as f64);
            for t in terms {
                let slot = ShuntInjection {
                    element: li,
                    terminals: t,
                    s,
                    v_nom: branch_v_nom(net, bus, t.1.is_some()),
                    model: l.model,
                };
                match loads {
                    LoadTreatment::Normal if l.model == LoadModel::ConstantZ => {
                        stamp_branch(&mut y, t, (s / (slot.v_nom * slot.v_nom)).conj());
                    }
                    LoadTreatment::Normal => load_slots.push(slot),
                    LoadTreatment::FrozenAt(v) => {
                        let vb = branch_voltage(v, t);
                        if vb.norm() > 1e-9 * slot.v_nom {
                            stamp_branch(&mut y, t, slot.current(vb) / vb);
                        }
                    }
                }
            }
        }
        let mut der_slots = Vec::new();
        for (di, d) in net.ders.iter().enumerate() {
            let bus = net.bus_index(&d.bus).expect("validated");
            if !energized[bus] {
                continue;
            }
            let delta = d.connection == LoadConnection::Delta;
            let terms = shunt_terminals(&self.nodes, bus, d.phases, delta).ok_or_else(|| {
                PowerFlowError::InvalidElement { element: d.id.clone(), message: "phases missing at its bus".into() }
            })?;
            if terms.is_empty() {
                continue;
            }
            let nb = terms.len() as f64;
            let pf = d.pf.clamp(0.0, 1.0);
            let s_rated = d.rated_kva * 1000.0 / nb;
            let s = Complex64::new(pf, (1.0 - pf * pf).sqrt()) * (s_rated * scenario.der_scale[di]);
            for t in terms {
                let v_nom = branch_v_nom(net, bus, t.1.is_some());
                der_slots.push(DerInjection { der: di, terminals: t, s, i_rated: s_rated / v_nom, limit: d.fault_current_limit });
            }
        }
        Ok(AdmittanceSystem {
            nodes: self.nodes.clone(),
            y,
            source_current,
            loads: load_slots,
            ders: der_slots,
            energized,
            lines,
        })
    }
}

/// Builds the admittance system of `net` for one scenario with all
/// breakers in their file state.
pub fn assemble_admittance(net: &Network, scenario: &ScenarioSample) -> Result<AdmittanceSystem, PowerFlowError> {
    NetworkModel::new(net)?.assemble(net, scenario, &NetworkState::default(), LoadTreatment::Normal)
}

impl AdmittanceSystem {
    /// Total injected current (A) at node voltages `v`: source Norton current
    /// plus load and DER injections.
    pub fn injections(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut inj = self.source_current.clone();
        for l in &self.loads {
            inject_current(&mut inj, l.terminals, -l.current(branch_voltage(v, l.terminals)));
        }
        for d in &self.ders {
            inject_current(&mut inj, d.terminals, d.current(branch_voltage(v, d.terminals)));
        }
        inj
    }

    /// Per-node current mismatch `Y·V − I(V)` (A).
    pub fn kcl_residual(&self, v: &[Complex64]) -> Vec<Complex64> {
        let yv = self.y.mul_vec(v);
        yv.iter().zip(self.injections(v)).map(|(a, b)| a - b).collect()
    }

    /// Adds an admittance between two terminals.
    pub fn stamp(&mut self, t: Terminals, v: Complex64) {
        stamp_branch(&mut self.y, t, v);
    }
}
