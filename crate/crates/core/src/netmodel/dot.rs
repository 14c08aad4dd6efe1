use std::collections::BTreeMap;
use std::fmt::Write;

use super::{DirectedTopology, EdgeKind};

/// Optional per-bus fill colors for DOT output.
#[derive(Debug, Clone, Default)]
pub struct DotStyle {
    pub node_colors: BTreeMap<String, String>,
    pub title: Option<String>,
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz DOT export: one node per bus, one edge per line or transformer,
/// device ids as edge labels. Back edges are drawn dashed.
pub fn topology_to_dot(topo: &DirectedTopology, style: &DotStyle) -> String {
    let mut out = String::from("digraph feeder {\n  rankdir=TB;\n  node [shape=circle, style=filled, fillcolor=white, fontsize=10];\n");
    if let Some(t) = &style.title {
        let _ = writeln!(out, "  label={};", quote(t));
    }
    for &b in &topo.order {
        let id = &topo.bus_ids[b];
        match style.node_colors.get(id) {
            Some(color) => {
                let _ = writeln!(out, "  {} [fillcolor={}];", quote(id), quote(color));
            }
            None => {
                let _ = writeln!(out, "  {};", quote(id));
            }
        }
    }
    for e in &topo.edges {
        let mut attrs = Vec::new();
        let devices: Vec<&str> = e.devices.iter().map(|&d| topo.device_ids[d].as_str()).collect();
        if !devices.is_empty() {
            attrs.push(format!("label={}", quote(&devices.join(","))));
            attrs.push("color=red".to_string());
        }
        if matches!(e.kind, EdgeKind::Transformer(_)) {
            attrs.push("style=bold".to_string());
        }
        if e.back_edge {
            attrs.push("style=dashed".to_string());
        }
        attrs.push(format!("tooltip={}", quote(&e.id)));
        let _ = writeln!(
            out,
            "  {} -> {} [{}];",
            quote(&topo.bus_ids[e.from]),
            quote(&topo.bus_ids[e.to]),
            attrs.join(", ")
        );
    }
    out.push_str("}\n");
    out
}
