use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use super::Network;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("source bus '{0}' is not part of the network")]
    MissingSource(String),
    #[error("network is disconnected; unreachable buses: {0:?}")]
    Disconnected(Vec<String>),
    #[error("unknown bus '{0}'")]
    UnknownBus(String),
    #[error("unknown device '{0}'")]
    UnknownDevice(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum EdgeKind {
    Line(usize),
    Transformer(usize),
}

/// One line or transformer oriented away from the source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopoEdge {
    pub kind: EdgeKind,
    pub id: String,
    /// Upstream bus index.
    pub from: usize,
    /// Downstream bus index.
    pub to: usize,
    /// Edge closes a loop; not part of the spanning tree.
    pub back_edge: bool,
    /// Device indices installed on this edge, nearest-to-downstream first.
    pub devices: Vec<usize>,
}

/// Breadth-first orientation of a network from its source bus.
#[derive(Debug, Clone, Serialize)]
pub struct DirectedTopology {
    pub root: usize,
    pub bus_ids: Vec<String>,
    pub edges: Vec<TopoEdge>,
    /// Tree edge entering each bus (`None` for the root).
    pub parent_edge: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Buses in breadth-first order from the root.
    pub order: Vec<usize>,
    pub device_ids: Vec<String>,
    /// Tree edge each device sits on.
    pub device_edge: Vec<Option<usize>>,
}

pub fn build_topology(net: &Network) -> Result<DirectedTopology, TopologyError> {
    let n = net.buses.len();
    let root = net.source_bus_index().ok_or_else(|| TopologyError::MissingSource(net.source.bus.clone()))?;
    // undirected incidence: (edge kind, a, b)
    let mut raw: Vec<(EdgeKind, String, usize, usize)> = Vec::new();
    for (i, l) in net.lines.iter().enumerate() {
        if let (Some(a), Some(b)) = (net.bus_index(&l.from_bus), net.bus_index(&l.to_bus)) {
            raw.push((EdgeKind::Line(i), l.id.clone(), a, b));
        }
    }
    for (i, t) in net.transformers.iter().enumerate() {
        if let (Some(a), Some(b)) = (net.bus_index(&t.windings[0].bus), net.bus_index(&t.windings[1].bus)) {
            raw.push((EdgeKind::Transformer(i), t.id.clone(), a, b));
        }
    }
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(_, _, a, b)) in raw.iter().enumerate() {
        incident[a].push(e);
        incident[b].push(e);
    }
    let mut visited = vec![false; n];
    let mut parent_edge = vec![None; n];
    let mut oriented: Vec<Option<(usize, usize, bool)>> = vec![None; raw.len()];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    visited[root] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &e in &incident[u] {
            if oriented[e].is_some() {
                continue;
            }
            let (_, _, a, b) = raw[e];
            let v = if a == u { b } else { a };
            if visited[v] {
                oriented[e] = Some((u, v, true));
            } else {
                visited[v] = true;
                parent_edge[v] = Some(e);
                oriented[e] = Some((u, v, false));
                queue.push_back(v);
            }
        }
    }
    let unreachable: Vec<String> =
        (0..n).filter(|&i| !visited[i]).map(|i| net.buses[i].id.clone()).collect();
    if !unreachable.is_empty() {
        return Err(TopologyError::Disconnected(unreachable));
    }
    let mut edges: Vec<TopoEdge> = raw
        .iter()
        .zip(&oriented)
        .map(|((kind, id, _, _), o)| {
            let (from, to, back_edge) = o.expect("connected network orients every edge");
            TopoEdge { kind: *kind, id: id.clone(), from, to, back_edge, devices: Vec::new() }
        })
        .collect();
    let mut device_edge = vec![None; net.devices.len()];
    for (d, dev) in net.devices.iter().enumerate() {
        let Some(li) = net.line_index(&dev.line) else { continue };
        let Some(e) = edges.iter().position(|x| x.kind == EdgeKind::Line(li)) else { continue };
        device_edge[d] = Some(e);
        edges[e].devices.push(d);
    }
    for e in &mut edges {
        if e.devices.len() > 1 {
            // device at the downstream terminal is nearer to any fault below
            let downstream = net.buses[e.to].id.clone();
            e.devices.sort_by_key(|&d| {
                let at = net.device_bus(&net.devices[d]).unwrap_or("");
                (at != downstream, d)
            });
        }
    }
    let mut children = vec![Vec::new(); n];
    for &u in &order {
        if let Some(e) = parent_edge[u] {
            children[edges[e].from].push(u);
        }
    }
    Ok(DirectedTopology {
        root,
        bus_ids: net.buses.iter().map(|b| b.id.clone()).collect(),
        edges,
        parent_edge,
        children,
        order,
        device_ids: net.devices.iter().map(|d| d.id.clone()).collect(),
        device_edge,
    })
}

impl DirectedTopology {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_ids.iter().position(|b| b == id)
    }

    pub fn device_index(&self, id: &str) -> Option<usize> {
        self.device_ids.iter().position(|d| d == id)
    }

    /// Parent bus of `bus` in the spanning tree.
    pub fn parent(&self, bus: usize) -> Option<usize> {
        self.parent_edge[bus].map(|e| self.edges[e].from)
    }

    /// Tree edges from `bus` up to the root, nearest first.
    pub fn path_to_root(&self, bus: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = bus;
        while let Some(e) = self.parent_edge[cur] {
            out.push(e);
            cur = self.edges[e].from;
        }
        out
    }

    /// Device indices from the fault location towards the source: element 0
    /// is the primary device, the rest are backups in escalation order.
    pub fn coordination_chain_indices(&self, bus: usize) -> Vec<usize> {
        self.path_to_root(bus)
            .into_iter()
            .flat_map(|e| self.edges[e].devices.iter().copied())
            .collect()
    }

    pub fn coordination_chain(&self, fault_bus: &str) -> Result<Vec<String>, TopologyError> {
        let b = self.bus_index(fault_bus).ok_or_else(|| TopologyError::UnknownBus(fault_bus.to_string()))?;
        Ok(self.coordination_chain_indices(b).into_iter().map(|d| self.device_ids[d].clone()).collect())
    }

    /// All buses in the subtree rooted at `bus` (inclusive).
    pub fn subtree(&self, bus: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![bus];
        while let Some(u) = stack.pop() {
            out.insert(u);
            stack.extend(self.children[u].iter().copied());
        }
        out
    }

    pub fn protection_region_indices(&self, device: usize) -> BTreeSet<usize> {
        match self.device_edge.get(device).copied().flatten() {
            Some(e) if !self.edges[e].back_edge => self.subtree(self.edges[e].to),
            _ => BTreeSet::new(),
        }
    }

    /// Buses downstream of the device's monitored line.
    pub fn protection_region(&self, device: &str) -> Result<BTreeSet<String>, TopologyError> {
        let d = self.device_index(device).ok_or_else(|| TopologyError::UnknownDevice(device.to_string()))?;
        Ok(self.protection_region_indices(d).into_iter().map(|b| self.bus_ids[b].clone()).collect())
    }

    /// Tree edge indices downstream of (and including) the given edge.
    pub fn edges_below(&self, edge: usize) -> Vec<usize> {
        self.subtree(self.edges[edge].to).into_iter().filter_map(|b| self.parent_edge[b]).collect()
    }

    pub fn back_edges(&self) -> impl Iterator<Item = &TopoEdge> {
        self.edges.iter().filter(|e| e.back_edge)
    }
}
