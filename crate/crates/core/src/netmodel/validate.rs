use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub element: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.element, self.message)
    }
}

struct Collector(Vec<Diagnostic>);

impl Collector {
    fn error(&mut self, element: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic { severity: Severity::Error, element: element.into(), message: message.into() });
    }

    fn warning(&mut self, element: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic { severity: Severity::Warning, element: element.into(), message: message.into() });
    }
}

fn is_symmetric(m: &[f64], n: usize) -> bool {
    (0..n).all(|i| (0..i).all(|j| {
        let (a, b) = (m[i * n + j], m[j * n + i]);
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
    }))
}

/// Checks every network invariant; returns an empty list iff all hold.
/// Elements that are parsed but excluded from the electrical model
/// (capacitors) are reported as warnings.
pub fn validate(net: &Network) -> Vec<Diagnostic> {
    let mut c = Collector(Vec::new());

    let mut seen = HashSet::new();
    for b in &net.buses {
        if !seen.insert(b.id.as_str()) {
            c.error(format!("bus.{}", b.id), "duplicate bus id");
        }
        if !(b.base_kv > 0.0) {
            c.error(format!("bus.{}", b.id), format!("base kV {} must be > 0", b.base_kv));
        }
    }
    for (class, ids) in [
        ("line", net.lines.iter().map(|x| x.id.as_str()).collect::<Vec<_>>()),
        ("linecode", net.linecodes.iter().map(|x| x.id.as_str()).collect()),
        ("transformer", net.transformers.iter().map(|x| x.id.as_str()).collect()),
        ("load", net.loads.iter().map(|x| x.id.as_str()).collect()),
        ("der", net.ders.iter().map(|x| x.id.as_str()).collect()),
        ("device", net.devices.iter().map(|x| x.id.as_str()).collect()),
    ] {
        let mut seen = HashSet::new();
        for id in ids {
            if !seen.insert(id) {
                c.error(format!("{class}.{id}"), "duplicate id");
            }
        }
    }

    let bus_phases = |id: &str| net.bus(id).map(|b| b.phases);

    match bus_phases(&net.source.bus) {
        None => c.error("circuit", format!("source bus '{}' is not declared", net.source.bus)),
        Some(p) if p != PhaseSet::ABC => c.error("circuit", "source bus must carry all three phases"),
        _ => {}
    }
    if !(net.source.nominal_kv > 0.0) {
        c.error("circuit", "nominal kV must be > 0");
    }
    if net.source.z1.norm() == 0.0 {
        c.error("circuit", "positive-sequence source impedance must be nonzero");
    }

    for code in &net.linecodes {
        let el = format!("linecode.{}", code.id);
        let n = code.n_phases;
        if !(1..=3).contains(&n) || code.r_matrix.len() != n * n || code.x_matrix.len() != n * n {
            c.error(&el, "matrix dimensions do not match nphases");
            continue;
        }
        if !is_symmetric(&code.r_matrix, n) || !is_symmetric(&code.x_matrix, n) {
            c.error(&el, "impedance matrices must be symmetric");
        }
        if (0..n).any(|i| code.r_matrix[i * n + i] < 0.0) {
            c.error(&el, "negative diagonal resistance");
        }
    }

    for l in &net.lines {
        let el = format!("line.{}", l.id);
        if l.from_bus == l.to_bus {
            c.error(&el, "line connects a bus to itself");
        }
        for end in [&l.from_bus, &l.to_bus] {
            match bus_phases(end) {
                None => c.error(&el, format!("references undeclared bus '{end}'")),
                Some(p) if !l.phases.is_subset(p) => {
                    c.error(&el, format!("phases {} not present at bus '{end}'", l.phases))
                }
                _ => {}
            }
        }
        if !(l.length_km > 0.0) {
            c.error(&el, format!("length {} km must be > 0", l.length_km));
        }
        match net.linecode(&l.code) {
            None => c.error(&el, format!("unresolved linecode '{}'", l.code)),
            Some(code) if code.series_impedance(l.phases, l.length_km).is_none() => {
                c.error(&el, format!("linecode '{}' has {} phases, line has {}", l.code, code.n_phases, l.phases.len()))
            }
            _ => {}
        }
    }

    for t in &net.transformers {
        let el = format!("transformer.{}", t.id);
        if t.windings.len() != 2 {
            c.error(&el, format!("{} windings; exactly 2 supported", t.windings.len()));
            continue;
        }
        if t.units != 1 && t.units != 3 {
            c.error(&el, "bank must have 1 or 3 units");
        }
        for w in &t.windings {
            if !(w.kva > 0.0) || !(w.kv > 0.0) || !(w.tap > 0.0) {
                c.error(&el, format!("winding at '{}' needs kva, kv and tap > 0", w.bus));
            }
            match bus_phases(&w.bus) {
                None => c.error(&el, format!("references undeclared bus '{}'", w.bus)),
                Some(p) if !w.phases.is_subset(p) => c.error(&el, format!("phases {} not present at '{}'", w.phases, w.bus)),
                _ => {}
            }
            let expect = match (t.units, w.connection) {
                (3, _) => 3,
                (_, WindingConnection::Delta) => 2,
                _ => 1,
            };
            if w.phases.len() != expect {
                c.error(&el, format!("winding at '{}' spans {} phases, expected {expect}", w.bus, w.phases.len()));
            }
        }
        if t.windings[0].bus == t.windings[1].bus {
            c.error(&el, "both windings on the same bus");
        }
        if t.series_impedance.norm() == 0.0 {
            c.error(&el, "series impedance must be nonzero");
        }
    }

    for l in &net.loads {
        let el = format!("load.{}", l.id);
        match bus_phases(&l.bus) {
            None => c.error(&el, format!("references undeclared bus '{}'", l.bus)),
            Some(p) if !l.phases.is_subset(p) => c.error(&el, format!("phases {} not present at '{}'", l.phases, l.bus)),
            _ => {}
        }
        if l.kw < 0.0 {
            c.error(&el, "kW must be >= 0");
        }
        if l.connection == LoadConnection::Delta && l.phases.len() < 2 {
            c.error(&el, "delta load needs at least two phases");
        }
    }

    for d in &net.ders {
        let el = format!("der.{}", d.id);
        match bus_phases(&d.bus) {
            None => c.error(&el, format!("references undeclared bus '{}'", d.bus)),
            Some(p) if !d.phases.is_subset(p) => c.error(&el, format!("phases {} not present at '{}'", d.phases, d.bus)),
            _ => {}
        }
        if !(d.rated_kva > 0.0) {
            c.error(&el, "rated kVA must be > 0");
        }
        if !(d.fault_current_limit >= 1.0) {
            c.error(&el, format!("fault current limit {} must be >= 1.0", d.fault_current_limit));
        }
        if !(d.pf.abs() > 0.0 && d.pf.abs() <= 1.0) {
            c.error(&el, "power factor must be in (0, 1]");
        }
    }

    for cap in &net.capacitors {
        c.warning(format!("capacitor.{}", cap.id), "shunt capacitor is excluded from the admittance model");
    }

    let mut ends: HashMap<(&str, u8), &str> = HashMap::new();
    for d in &net.devices {
        let el = format!("device.{}", d.id);
        if net.line(&d.line).is_none() {
            c.error(&el, format!("monitored line '{}' does not exist", d.line));
            continue;
        }
        if let Some(other) = ends.insert((d.line.as_str(), d.terminal), d.id.as_str()) {
            c.error(&el, format!("line '{}' terminal {} already carries device '{other}'", d.line, d.terminal));
        }
    }

    connectivity(net, &mut c);
    c.0
}

fn connectivity(net: &Network, c: &mut Collector) {
    let Some(root) = net.source_bus_index() else { return };
    let n = net.buses.len();
    let mut adj = vec![Vec::new(); n];
    let mut link = |a: &str, b: &str| {
        if let (Some(i), Some(j)) = (net.bus_index(a), net.bus_index(b)) {
            adj[i].push(j);
            adj[j].push(i);
        }
    };
    for l in &net.lines {
        link(&l.from_bus, &l.to_bus);
    }
    for t in &net.transformers {
        if t.windings.len() == 2 {
            link(&t.windings[0].bus, &t.windings[1].bus);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    let unreachable: Vec<&str> = (0..n).filter(|&i| !seen[i]).map(|i| net.buses[i].id.as_str()).collect();
    if !unreachable.is_empty() {
        c.error("network", format!("buses unreachable from the source: {}", unreachable.join(", ")));
    }
    // device orientation sanity against the breadth-first orientation
    if unreachable.is_empty() {
        if let Ok(topo) = super::build_topology(net) {
            for (d, dev) in net.devices.iter().enumerate() {
                if let Some(e) = topo.device_edge[d] {
                    let up = &topo.bus_ids[topo.edges[e].from];
                    if net.device_bus(dev) != Some(up.as_str()) {
                        c.warning(
                            format!("device.{}", dev.id),
                            format!("installed at the downstream end of '{}' (upstream bus is '{up}')", dev.line),
                        );
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_dss;
    use super::*;

    const TWO_BUS: &str = "New Circuit.c bus1=s basekv=4.16\nNew Line.l bus1=s bus2=b length=1\n";

    #[test]
    fn valid_two_bus_is_clean() {
        assert!(validate(&parse_dss(TWO_BUS).unwrap().network).is_empty());
    }

    #[test]
    fn undeclared_bus_names_the_line() {
        let mut net = parse_dss(TWO_BUS).unwrap().network;
        net.lines[0].to_bus = "ghost".into();
        net.reindex();
        let d = validate(&net);
        let line_errors: Vec<_> = d.iter().filter(|x| x.element == "line.l").collect();
        assert_eq!(line_errors.len(), 1, "{d:?}");
        assert_eq!(line_errors[0].severity, Severity::Error);
        assert!(line_errors[0].message.contains("ghost"));
        // the orphaned bus b is reported as well
        assert!(d.iter().any(|x| x.message.contains("unreachable")));
    }

    #[test]
    fn island_is_reported() {
        let text = format!("{TWO_BUS}New Line.x bus1=p bus2=q length=1\n");
        let d = validate(&parse_dss(&text).unwrap().network);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("p, q"), "{}", d[0].message);
    }

    #[test]
    fn capacitor_warning_and_device_checks() {
        let text = format!(
            "{TWO_BUS}New Capacitor.c1 bus1=b kvar=100\nNew Relay.r1 monitoredobj=line.l\nNew Relay.r2 monitoredobj=line.l\nNew Relay.r3 monitoredobj=line.nope\n"
        );
        let d = validate(&parse_dss(&text).unwrap().network);
        assert!(d.iter().any(|x| x.severity == Severity::Warning && x.element == "capacitor.c1"));
        assert!(d.iter().any(|x| x.element == "device.r2" && x.message.contains("already")));
        assert!(d.iter().any(|x| x.element == "device.r3"));
    }

    #[test]
    fn der_limit_below_one_is_an_error() {
        let text = format!("{TWO_BUS}New PVSystem.p bus1=b kva=10 fault_current_limit=0.8\n");
        let d = validate(&parse_dss(&text).unwrap().network);
        assert!(d.iter().any(|x| x.element == "der.p"));
    }
}
