//! Deterministic text form of a [`Network`].
//!
//! The output is itself valid input for [`super::parse_dss`]: elements appear
//! class by class in storage order, properties within a statement in sorted
//! key order, numbers in shortest round-trip notation and all lengths in km.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::*;

fn num(v: f64) -> String {
    format!("{v}")
}

fn matrix(m: &[f64], n: usize) -> String {
    let rows: Vec<String> = (0..n)
        .map(|i| (0..n).map(|j| num(m[i * n + j])).collect::<Vec<_>>().join(" "))
        .collect();
    format!("({})", rows.join(" | "))
}

fn conn_winding(c: WindingConnection) -> &'static str {
    match c {
        WindingConnection::WyeGrounded | WindingConnection::Wye => "wye",
        WindingConnection::Delta => "delta",
    }
}

fn conn_load(c: LoadConnection) -> &'static str {
    match c {
        LoadConnection::Wye => "wye",
        LoadConnection::Delta => "delta",
    }
}

fn emit(out: &mut String, head: &str, props: BTreeMap<&str, String>) {
    out.push_str("New ");
    out.push_str(head);
    for (k, v) in props {
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
}

pub fn to_canonical(net: &Network) -> String {
    let mut out = String::from("! canonical network form\n");
    let s = &net.source;
    emit(
        &mut out,
        &format!("Circuit.{}", net.name),
        BTreeMap::from([
            ("angle", num(s.angle_deg)),
            ("basekv", num(s.nominal_kv)),
            ("bus1", s.bus.clone()),
            ("conn", if s.grounded { "wye" } else { "delta" }.to_string()),
            ("pu", num(s.pu)),
            ("r0", num(s.z0.re)),
            ("r1", num(s.z1.re)),
            ("x0", num(s.z0.im)),
            ("x1", num(s.z1.im)),
        ]),
    );
    for c in &net.linecodes {
        emit(
            &mut out,
            &format!("LineCode.{}", c.id),
            BTreeMap::from([
                ("nphases", c.n_phases.to_string()),
                ("rmatrix", matrix(&c.r_matrix, c.n_phases)),
                ("units", "km".to_string()),
                ("xmatrix", matrix(&c.x_matrix, c.n_phases)),
            ]),
        );
    }
    for l in &net.lines {
        let sfx = l.phases.dss_suffix();
        emit(
            &mut out,
            &format!("Line.{}", l.id),
            BTreeMap::from([
                ("bus1", format!("{}{sfx}", l.from_bus)),
                ("bus2", format!("{}{sfx}", l.to_bus)),
                ("enabled", if l.closed { "yes" } else { "no" }.to_string()),
                ("length", num(l.length_km)),
                ("linecode", l.code.clone()),
                ("phases", l.phases.len().to_string()),
                ("switch", if l.switchable { "yes" } else { "no" }.to_string()),
                ("units", "km".to_string()),
            ]),
        );
    }
    for t in &net.transformers {
        let w = &t.windings;
        let pair = |f: &dyn Fn(&Winding) -> String| format!("[{} {}]", f(&w[0]), f(&w[1]));
        let props = BTreeMap::from([
            ("buses", pair(&|x| format!("{}{}", x.bus, x.phases.dss_suffix()))),
            ("conns", pair(&|x| conn_winding(x.connection).to_string())),
            ("kvas", pair(&|x| num(x.kva))),
            ("kvs", pair(&|x| num(x.kv))),
            ("phases", t.units.to_string()),
            ("r_pu", num(t.series_impedance.re)),
            ("taps", pair(&|x| num(x.tap))),
            ("windings", "2".to_string()),
            ("x_pu", num(t.series_impedance.im)),
        ]);
        emit(&mut out, &format!("Transformer.{}", t.id), props);
        // ungrounded wye is expressed through a negative neutral resistance,
        // which must follow the `conns` assignment
        for (k, wd) in w.iter().enumerate() {
            if wd.connection == WindingConnection::Wye {
                let _ = writeln!(out, "~ wdg={} rneut=-1", k + 1);
            }
        }
    }
    for l in &net.loads {
        let model = match l.model {
            LoadModel::ConstantPq => "1",
            LoadModel::ConstantZ => "2",
            LoadModel::ConstantI => "5",
        };
        emit(
            &mut out,
            &format!("Load.{}", l.id),
            BTreeMap::from([
                ("bus1", format!("{}{}", l.bus, l.phases.dss_suffix())),
                ("conn", conn_load(l.connection).to_string()),
                ("kvar", num(l.kvar)),
                ("kw", num(l.kw)),
                ("model", model.to_string()),
                ("phases", shunt_phase_count(l.phases, l.connection).to_string()),
            ]),
        );
    }
    for d in &net.ders {
        let class = match d.kind {
            DerKind::Pv => "PVSystem",
            DerKind::Wind => "Generator",
        };
        let kind = match d.kind {
            DerKind::Pv => "pv",
            DerKind::Wind => "wind",
        };
        emit(
            &mut out,
            &format!("{class}.{}", d.id),
            BTreeMap::from([
                ("bus1", format!("{}{}", d.bus, d.phases.dss_suffix())),
                ("conn", conn_load(d.connection).to_string()),
                ("fault_current_limit", num(d.fault_current_limit)),
                ("kind", kind.to_string()),
                ("kva", num(d.rated_kva)),
                ("pf", num(d.pf)),
                ("phases", shunt_phase_count(d.phases, d.connection).to_string()),
            ]),
        );
    }
    for c in &net.capacitors {
        emit(
            &mut out,
            &format!("Capacitor.{}", c.id),
            BTreeMap::from([
                ("bus1", format!("{}{}", c.bus, c.phases.dss_suffix())),
                ("kvar", num(c.kvar)),
                ("phases", c.phases.len().to_string()),
            ]),
        );
    }
    for d in &net.devices {
        emit(
            &mut out,
            &format!("{}.{}", d.kind.dss_class(), d.id),
            BTreeMap::from([
                ("monitoredobj", format!("line.{}", d.line)),
                ("monitoredterm", d.terminal.to_string()),
            ]),
        );
    }
    out
}

fn shunt_phase_count(phases: PhaseSet, conn: LoadConnection) -> usize {
    match (conn, phases.len()) {
        (LoadConnection::Delta, 2) => 1,
        (_, n) => n,
    }
}
