mod common;

use common::oracle::{solve_complex, Dense};
use num_complex::Complex64;
use proptest::prelude::*;
use protsim::netmodel::{Network, Phase};
use protsim::powerflow::{solve_powerflow, PowerFlowOptions, PowerFlowSolution};
use protsim::scenario::ScenarioSample;
use protsim::shortcircuit::{
    during_fault_measurements, insert_midline_bus, solve_fault, valid_fault_types, FaultKind, FaultLocation, FaultOptions,
    FaultSolution, FaultSpec, FaultType,
};

fn prefault(net: &Network, sc: &ScenarioSample) -> PowerFlowSolution {
    solve_powerflow(net, sc, &PowerFlowOptions::default()).unwrap()
}

fn fault_at(net: &Network, bus: &str, fault_type: FaultType, zf: f64) -> FaultSolution {
    let sc = ScenarioSample::nominal(net);
    let pre = prefault(net, &sc);
    let spec = FaultSpec { fault_type, location: FaultLocation::Bus { bus: bus.into() }, impedance_ohm: zf, onset_step: 0 };
    solve_fault(net, &sc, &spec, &pre, &FaultOptions::default()).unwrap()
}

fn every_type(phases: protsim::netmodel::PhaseSet) -> Vec<FaultType> {
    FaultKind::ALL.iter().flat_map(|&k| FaultType::variants(k, phases)).collect()
}

#[test]
fn bolted_three_phase_at_thevenin_source_is_ten_per_unit() {
    // 10 MVA base at 12.47 kV: Zbase = 15.55 ohm, Ibase = 463 A
    let kv: f64 = 12.47;
    let zbase = kv * kv / 10.0;
    let ibase = 10e6 / (3f64.sqrt() * kv * 1000.0);
    let net = common::dss(&format!(
        "New Circuit.th bus1=s basekv={kv} pu=1.0 r1=0 x1={x} r0=0 x0={x}\n\
         New Line.l1 bus1=s bus2=b linecode=mtx601 length=1 units=mi\n",
        x = 0.1 * zbase
    ));
    for t in [FaultType::ThreePhase, FaultType::ThreePhaseGround] {
        let f = fault_at(&net, "s", t, 0.0);
        for m in f.fault_current_magnitudes() {
            assert!((m / ibase - 10.0).abs() < 0.01, "{t}: {} pu", m / ibase);
        }
    }
}

#[test]
fn fault_current_equals_incident_branch_sum() {
    let net = common::four_bus_lateral();
    let f = fault_at(&net, "b2", FaultType::Slg { phase: Phase::A }, 2.0);
    // KCL at the fault node: current arriving through l2 minus current leaving through l3 and loads
    let b2 = net.bus_index("b2").unwrap();
    let sol = &f.solution;
    let (_, l2_to) = sol.line_terminal_currents(net.line_index("l2").unwrap());
    let (l3_from, _) = sol.line_terminal_currents(net.line_index("l3").unwrap());
    let va = sol.voltage(b2, Phase::A).unwrap();
    let arriving = -l2_to[0] - l3_from[0];
    // remaining difference is the frozen load current at phase A
    let load_share = arriving - f.fault_currents[0];
    assert!(f.fault_currents[0].norm() > 100.0);
    assert!(load_share.norm() < 0.1 * f.fault_currents[0].norm(), "load share {load_share} vs {}", f.fault_currents[0]);
    assert!((f.fault_currents[0] - va * 0.5).norm() < 1e-6 * f.fault_currents[0].norm());
}

#[test]
fn during_fault_matches_dense_oracle_on_constant_z_network() {
    let net = common::dss(
        "New Circuit.z bus1=s basekv=12.47 mvasc3=200 mvasc1=180\n\
         New Line.l1 bus1=s bus2=b1 linecode=mtx601 length=1 units=mi\n\
         New Line.l2 bus1=b1 bus2=b2 linecode=mtx601 length=0.5 units=mi\n\
         New Line.l3 bus1=b2.3 bus2=b3.3 linecode=ph1 length=0.5 units=mi\n\
         New Transformer.t buses=[b1 b4] conns=[delta wye] kvs=[12.47 0.48] kvas=[500 500] xhl=5\n\
         New Load.a bus1=b2 kw=900 kvar=300 model=2\n\
         New Load.b bus1=b3.3 phases=1 kw=50 kvar=20 model=2\n\
         New Load.c bus1=b4 conn=delta kw=200 kvar=50 model=2\n",
    );
    let sc = ScenarioSample::nominal(&net);
    let pre = prefault(&net, &sc);
    for (bus, ft, zf) in [
        ("b2", FaultType::Slg { phase: Phase::B }, 0.0),
        ("b2", FaultType::Ll { phases: [Phase::A, Phase::C] }, 3.0),
        ("b2", FaultType::Llg { phases: [Phase::A, Phase::B] }, 1.0),
        ("b1", FaultType::ThreePhase, 0.5),
        ("b3", FaultType::Slg { phase: Phase::C }, 4.0),
        ("b4", FaultType::ThreePhaseGround, 0.0),
    ] {
        let spec = FaultSpec { fault_type: ft, location: FaultLocation::Bus { bus: bus.into() }, impedance_ohm: zf, onset_step: 0 };
        let f = solve_fault(&net, &sc, &spec, &pre, &FaultOptions::default()).unwrap();
        let mut d = Dense::build(&net, &sc, &[]);
        let b = net.bus_index(bus).unwrap();
        let g = if zf == 0.0 { 1e6 } else { 1.0 / zf };
        let n = |p: Phase| d.node_of[&(b, p.index())];
        let mut shunt = |i: usize, j: Option<usize>, y: f64| {
            d.y[i][i] += y;
            if let Some(j) = j {
                d.y[j][j] += y;
                d.y[i][j] -= y;
                d.y[j][i] -= y;
            }
        };
        match ft {
            FaultType::Slg { phase } => shunt(n(phase), None, g),
            FaultType::Ll { phases } => shunt(n(phases[0]), Some(n(phases[1])), g),
            FaultType::Llg { phases } => {
                shunt(n(phases[0]), None, g);
                shunt(n(phases[1]), None, g);
            }
            FaultType::ThreePhase => {
                for (p, q) in [(Phase::A, Phase::B), (Phase::B, Phase::C), (Phase::C, Phase::A)] {
                    shunt(n(p), Some(n(q)), g / 3.0);
                }
            }
            FaultType::ThreePhaseGround => {
                for p in Phase::ALL {
                    shunt(n(p), None, g);
                }
            }
        }
        let v = solve_complex(&d.y, &d.source_i);
        for (bi, bus_def) in net.buses.iter().enumerate() {
            for p in bus_def.phases.iter() {
                let ours = f.solution.voltage_pu(bi, p).unwrap();
                let theirs = d.voltage_pu(&v, bi, p).unwrap();
                assert!((ours - theirs).norm() < 1e-6, "{bus} {ft}: {} {p:?} {ours} vs {theirs}", bus_def.id);
            }
        }
    }
}

#[test]
fn der_between_source_and_fault_reduces_substation_current() {
    let base = "New Circuit.c bus1=src basekv=12.47 mvasc3=150 mvasc1=140\n\
                New Line.l1 bus1=src bus2=b2 linecode=mtx601 length=2 units=mi\n\
                New Line.l2 bus1=b2 bus2=b3 linecode=mtx601 length=2 units=mi\n\
                New Load.ld bus1=b3 kw=500 kvar=150\n\
                New Relay.sub monitoredobj=line.l1\n";
    let with_der = format!("{base}New PVSystem.pv bus1=b2 kva=2000 pf=1 fault_current_limit=1.2\n");
    for ft in [FaultType::ThreePhase, FaultType::ThreePhaseGround, FaultType::Slg { phase: Phase::A }] {
        let plain = fault_at(&common::dss(base), "b3", ft, 0.0);
        let dnet = common::dss(&with_der);
        let der = fault_at(&dnet, "b3", ft, 0.0);
        let sub = |net: &Network, f: &FaultSolution| {
            during_fault_measurements(net, f, "sub").unwrap().current_magnitudes().into_iter().fold(0.0, f64::max)
        };
        let (a, b) = (sub(&common::dss(base), &plain), sub(&dnet, &der));
        assert!(b < a, "{ft}: {b} A with DER, {a} A without");
        assert!(der.der_limited[0], "{ft}: DER should hit its limit");
    }
}

#[test]
fn der_clamp_is_respected() {
    let net = common::eight_bus_mixed();
    let sc = ScenarioSample::nominal(&net);
    let pre = prefault(&net, &sc);
    for bus in ["b4", "b6", "b7", "b3"] {
        let b = net.bus_index(bus).unwrap();
        for ft in valid_fault_types(&net, bus) {
            let spec = FaultSpec { fault_type: ft, location: FaultLocation::Bus { bus: bus.into() }, impedance_ohm: 0.0, onset_step: 0 };
            let f = solve_fault(&net, &sc, &spec, &pre, &FaultOptions::default()).unwrap();
            for (di, d) in net.ders.iter().enumerate() {
                let nb = f.der_currents[di].len() as f64;
                let delta = d.connection == protsim::netmodel::LoadConnection::Delta;
                let bus = net.bus(&d.bus).unwrap();
                let vnom = if delta { bus.base_kv * 1000.0 } else { bus.base_ln_volts() };
                let i_rated = d.rated_kva * 1000.0 / nb / vnom;
                for i in &f.der_currents[di] {
                    assert!(i.norm() <= d.fault_current_limit * i_rated + 1e-9, "{} at {b}: {}", d.id, i.norm());
                }
            }
        }
    }
}

#[test]
fn slg_on_ungrounded_feeder_is_negligible() {
    let net = common::six_bus_delta();
    assert_eq!(valid_fault_types(&net, "b2").iter().map(|t| t.kind()).collect::<std::collections::BTreeSet<_>>(),
        [FaultKind::Ll, FaultKind::ThreePhase].into());
    let model = protsim::powerflow::NetworkModel::new(&net).unwrap();
    let sc = ScenarioSample::nominal(&net);
    let pre = prefault(&net, &sc);
    let b = net.bus_index("b2").unwrap();
    let solve = |ft| {
        protsim::shortcircuit::solve_fault_with_model(
            &model, &net, &sc, &Default::default(), b, ft, 0.0, &pre, &FaultOptions::default(),
        )
        .unwrap()
        .fault_current_magnitudes()
        .into_iter()
        .fold(0.0, f64::max)
    };
    let slg = solve(FaultType::Slg { phase: Phase::A });
    let three = solve(FaultType::ThreePhase);
    assert!(slg < 0.01 * three, "SLG {slg} A vs 3-phase {three} A");
}

#[test]
fn device_on_faulted_path_sees_more_current_and_lateral_device_does_not() {
    let net = common::dss(
        "New Circuit.c bus1=s basekv=12.47 mvasc3=2000 mvasc1=1900\n\
         New Line.l1 bus1=s bus2=b1 linecode=mtx601 length=0.05 units=mi\n\
         New Line.l2 bus1=b1 bus2=b2 linecode=mtx601 length=1 units=mi\n\
         New Line.l3 bus1=b1 bus2=b3 linecode=mtx601 length=1 units=mi\n\
         New Load.a bus1=b2 kw=600 kvar=200\n\
         New Load.b bus1=b3 kw=600 kvar=200 model=2\n\
         New Relay.main monitoredobj=line.l1\n\
         New Relay.lat monitoredobj=line.l3\n",
    );
    let sc = ScenarioSample::nominal(&net);
    let pre = prefault(&net, &sc);
    let f = fault_at(&net, "b2", FaultType::Slg { phase: Phase::A }, 5.0);
    let before = |d: &str| protsim::shortcircuit::measure_device(&net, &pre, net.device_index(d).unwrap()).current_magnitudes();
    let during = |d: &str| during_fault_measurements(&net, &f, d).unwrap().current_magnitudes();
    assert!(during("main")[0] > before("main")[0]);
    // constant-Z lateral sags with the voltage, so allow the stiff-source 5% band
    for k in 0..3 {
        let (a, b) = (before("lat")[k], during("lat")[k]);
        assert!((a - b).abs() <= 0.05 * a, "phase {k}: {a} -> {b}");
    }
}

#[test]
fn zero_current_leaves_impedance_undefined() {
    let net = common::dss(
        "New Circuit.sw bus1=s basekv=12.47\n\
         New Line.l1 bus1=s bus2=b1 linecode=mtx601 length=1 units=mi\n\
         New Line.sw1 bus1=b1 bus2=b2 switch=yes enabled=no\n\
         New Load.b bus1=b2 kw=500 kvar=200\n\
         New Relay.sw_relay monitoredobj=line.sw1\n",
    );
    let pre = prefault(&net, &ScenarioSample::nominal(&net));
    let m = protsim::shortcircuit::measure_device(&net, &pre, net.device_index("sw_relay").unwrap());
    assert!(m.impedance.iter().all(Option::is_none));
}

#[test]
fn midline_bus_without_fault_changes_nothing() {
    for (name, net) in common::all_small_networks() {
        let sc = ScenarioSample::nominal(&net);
        let before = prefault(&net, &sc);
        for l in net.lines.iter().filter(|l| !l.switchable) {
            let (split, _) = insert_midline_bus(&net, &l.id, 0.37).unwrap();
            let after = prefault(&split, &sc);
            for (b, bus) in net.buses.iter().enumerate() {
                for p in bus.phases.iter() {
                    let d = (before.voltage_pu(b, p).unwrap() - after.voltage_pu(b, p).unwrap()).norm();
                    assert!(d < 1e-9, "{name}/{}: {} {p:?} moved {d:e} pu", l.id, bus.id);
                }
            }
            for (i, dev) in net.devices.iter().enumerate() {
                let a = protsim::shortcircuit::measure_device(&net, &before, i).current_magnitudes();
                let j = split.device_index(&dev.id).unwrap();
                let b = protsim::shortcircuit::measure_device(&split, &after, j).current_magnitudes();
                for k in 0..3 {
                    assert!((a[k] - b[k]).abs() <= 1e-9 * a[k].max(1.0), "{name}/{}: device {}", l.id, dev.id);
                }
            }
        }
    }
}

#[test]
fn midline_fault_lies_between_endpoint_faults() {
    let net = common::two_bus();
    let at = |loc: FaultLocation| {
        let sc = ScenarioSample::nominal(&net);
        let pre = prefault(&net, &sc);
        let spec = FaultSpec { fault_type: FaultType::ThreePhase, location: loc, impedance_ohm: 0.0, onset_step: 0 };
        solve_fault(&net, &sc, &spec, &pre, &FaultOptions::default()).unwrap().fault_current_magnitudes()[0]
    };
    let near = at(FaultLocation::Bus { bus: "s".into() });
    let mid = at(FaultLocation::Line { line: "l1".into(), position: 0.5 });
    let far = at(FaultLocation::Bus { bus: "b".into() });
    assert!(near > mid && mid > far, "{near} {mid} {far}");
}

#[test]
fn switch_interior_fault_moves_to_endpoint() {
    let net = common::dss(
        "New Circuit.c bus1=s basekv=12.47\n\
         New Line.l1 bus1=s bus2=b1 linecode=mtx601 length=1 units=mi\n\
         New Line.sw bus1=b1 bus2=b2 switch=yes\n\
         New Load.a bus1=b2 kw=100\n",
    );
    let (work, bus) = protsim::shortcircuit::resolve_fault_location(&net, &FaultLocation::Line { line: "sw".into(), position: 0.8 }).unwrap();
    assert_eq!(work.buses[bus].id, "b2");
}

fn small_net() -> Network {
    common::four_bus_lateral()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn larger_fault_impedance_never_raises_fault_current(z1 in 0.0f64..20.0, dz in 0.01f64..20.0, pick in 0usize..64) {
        let net = small_net();
        let sc = ScenarioSample::nominal(&net);
        let pre = prefault(&net, &sc);
        let bus = ["b1", "b2", "b3"][pick % 3];
        let types = every_type(net.bus(bus).unwrap().phases);
        let ft = types[pick % types.len()];
        let current = |zf: f64| {
            let spec = FaultSpec { fault_type: ft, location: FaultLocation::Bus { bus: bus.into() }, impedance_ohm: zf, onset_step: 0 };
            let f = solve_fault(&net, &sc, &spec, &pre, &FaultOptions::default()).unwrap();
            f.fault_current_magnitudes().into_iter().map(|m| m * m).sum::<f64>().sqrt()
        };
        let (a, b) = (current(z1), current(z1 + dz));
        prop_assert!(b <= a * (1.0 + 1e-9), "{} at {}: {} -> {}", ft, bus, a, b);
    }
}

#[test]
fn complex_helper_is_sane() {
    let x = solve_complex(&[vec![Complex64::new(2.0, 0.0)]], &[Complex64::new(4.0, 2.0)]);
    assert_eq!(x[0], Complex64::new(2.0, 1.0));
}
