#![allow(dead_code)]

pub mod oracle;
pub mod outcome_table;

use protsim::netmodel::{parse_dss, Network};
use protsim::scenario::{Rng, ScenarioSample};

const CODES: &str = "New Linecode.mtx601 nphases=3 units=mi r1=0.3465 x1=1.0179 r0=0.7526 x0=1.1814\n\
    New Linecode.ph1 nphases=1 units=mi rmatrix=[1.3292] xmatrix=[1.3475]\n\
    New Linecode.ph2 nphases=2 units=mi rmatrix=[1.1 | 0.16 1.1] xmatrix=[1.2 | 0.45 1.2]\n";

pub fn dss(body: &str) -> Network {
    parse_dss(&format!("{CODES}{body}")).expect("test case parses").network
}

/// Source, one line and a 100 kW wye constant-power load at 4.16 kV.
pub fn two_bus() -> Network {
    dss("New Circuit.two bus1=s basekv=4.16 mvasc3=100 mvasc1=90\n\
         New Line.l1 bus1=s bus2=b linecode=mtx601 length=0.5 units=mi\n\
         New Load.ld bus1=b kw=100 pf=0.9 model=1\n")
}

/// Three-phase trunk with a single-phase lateral and every load model.
pub fn four_bus_lateral() -> Network {
    dss("New Circuit.lat bus1=s basekv=12.47 mvasc3=200 mvasc1=180\n\
         New Line.l1 bus1=s bus2=b1 linecode=mtx601 length=1 units=mi\n\
         New Line.l2 bus1=b1 bus2=b2 linecode=mtx601 length=0.8 units=mi\n\
         New Line.l3 bus1=b2.2 bus2=b3.2 linecode=ph1 length=0.6 units=mi\n\
         New Load.pq bus1=b1 kw=400 kvar=150 model=1\n\
         New Load.ci bus1=b2 kw=300 kvar=100 model=5\n\
         New Load.cz bus1=b3.2 phases=1 kw=80 kvar=30 model=2\n\
         New Load.dl bus1=b2 conn=delta kw=250 kvar=90 model=1\n\
         New Relay.r1 monitoredobj=line.l1\n")
}

/// Delta-wye grounded step-down with a PV system on the secondary.
pub fn five_bus_transformer() -> Network {
    dss("New Circuit.xf bus1=s basekv=12.47 mvasc3=250 mvasc1=220\n\
         New Line.l1 bus1=s bus2=b1 linecode=mtx601 length=1.2 units=mi\n\
         New Transformer.t1 phases=3 windings=2 buses=[b1 b2] conns=[delta wye] kvs=[12.47 4.16] kvas=[2000 2000] xhl=6 %rs=[0.5 0.5]\n\
         New Line.l2 bus1=b2 bus2=b3 linecode=mtx601 length=0.4 units=mi\n\
         New Line.l3 bus1=b3 bus2=b4 linecode=mtx601 length=0.3 units=mi\n\
         New Load.a bus1=b3 kw=600 kvar=250 model=1\n\
         New Load.b bus1=b4 kw=400 kvar=200 model=5\n\
         New PVSystem.pv bus1=b4 kva=300 pf=0.95\n\
         New Relay.r1 monitoredobj=line.l1\n")
}

/// All-delta feeder fed by an ungrounded source.
pub fn six_bus_delta() -> Network {
    dss("New Circuit.dd bus1=s basekv=4.8 mvasc3=120 mvasc1=100 conn=delta\n\
         New Line.l1 bus1=s bus2=b1 linecode=mtx601 length=0.7 units=mi\n\
         New Line.l2 bus1=b1 bus2=b2 linecode=mtx601 length=0.5 units=mi\n\
         New Line.l3 bus1=b2 bus2=b3 linecode=mtx601 length=0.4 units=mi\n\
         New Line.l4 bus1=b1 bus2=b4 linecode=mtx601 length=0.6 units=mi\n\
         New Line.l5 bus1=b4.1.2 bus2=b5.1.2 linecode=mtx601 length=0.3 units=mi\n\
         New Load.d1 bus1=b2 conn=delta kw=300 kvar=140 model=1\n\
         New Load.d2 bus1=b3 conn=delta kw=200 kvar=90 model=5\n\
         New Load.d3 bus1=b4 conn=delta kw=150 kvar=60 model=2\n\
         New Load.d4 bus1=b5.1.2 conn=delta phases=1 kw=60 kvar=25 model=1\n\
         New Relay.r1 monitoredobj=line.l1\n")
}

/// Ungrounded-wye/delta transformer, two-phase lateral, single-phase
/// delta-connected wind unit and a wye PV unit.
pub fn eight_bus_mixed() -> Network {
    dss("New Circuit.mx bus1=s basekv=24.9 mvasc3=300 mvasc1=280\n\
         New Line.l1 bus1=s bus2=b1 linecode=mtx601 length=2 units=mi\n\
         New Transformer.t1 phases=3 windings=2 wdg=1 bus=b1 conn=wye kv=24.9 kva=3000 rneut=-1 %r=0.6 wdg=2 bus=b2 conn=delta kv=4.16 kva=3000 %r=0.6 xhl=5.5\n\
         New Line.l2 bus1=b2 bus2=b3 linecode=mtx601 length=0.5 units=mi\n\
         New Line.l3 bus1=b3 bus2=b4 linecode=mtx601 length=0.5 units=mi\n\
         New Line.l4 bus1=b3.1.3 bus2=b5.1.3 linecode=ph2 length=0.4 units=mi\n\
         New Line.l5 bus1=b1 bus2=b6 linecode=mtx601 length=1.5 units=mi\n\
         New Line.l6 bus1=b6.3 bus2=b7.3 linecode=ph1 length=0.8 units=mi\n\
         New Load.x bus1=b4 conn=delta kw=500 kvar=200 model=1\n\
         New Load.y bus1=b5.1.3 conn=delta phases=1 kw=120 kvar=50 model=5\n\
         New Load.z bus1=b6 kw=700 kvar=300 model=2\n\
         New Load.w bus1=b7.3 phases=1 kw=90 kvar=40 model=1\n\
         New Generator.wt bus1=b4.1.2 conn=delta phases=1 kva=200 pf=0.98 kind=wind\n\
         New PVSystem.pv bus1=b6 kva=400 pf=1\n\
         New Relay.r1 monitoredobj=line.l1\n")
}

/// Open switch isolating the tail of a feeder.
pub fn three_bus_open_switch() -> Network {
    dss("New Circuit.sw bus1=s basekv=12.47\n\
         New Line.l1 bus1=s bus2=b1 linecode=mtx601 length=1 units=mi\n\
         New Line.sw1 bus1=b1 bus2=b2 switch=yes enabled=no\n\
         New Load.a bus1=b1 kw=500 kvar=200\n\
         New Load.b bus1=b2 kw=500 kvar=200\n")
}

pub fn all_small_networks() -> Vec<(&'static str, Network)> {
    vec![
        ("two_bus", two_bus()),
        ("four_bus_lateral", four_bus_lateral()),
        ("five_bus_transformer", five_bus_transformer()),
        ("six_bus_delta", six_bus_delta()),
        ("eight_bus_mixed", eight_bus_mixed()),
        ("three_bus_open_switch", three_bus_open_switch()),
    ]
}

/// Loads scaled in [0.2, 1.3], DERs in [0, 1].
pub fn random_scenario(net: &Network, rng: &mut Rng) -> ScenarioSample {
    ScenarioSample {
        hour: 0,
        timestamp: String::new(),
        load_scale: net.loads.iter().map(|_| rng.range_f64(0.2, 1.3)).collect(),
        der_scale: net.ders.iter().map(|_| rng.range_f64(0.0, 1.0)).collect(),
    }
}

/// A bundled case from `crates/core/cases`.
pub fn case(name: &str) -> Network {
    let path = format!("{}/cases/{name}.dss", env!("CARGO_MANIFEST_DIR"));
    protsim::netmodel::parse_dss_file(&path).expect("bundled case parses").network
}

pub const LATERAL_BUSES: [&str; 5] = ["x1", "x2", "x3", "x4", "x5"];

/// Stiff 10-bus trunk with a five-bus high-impedance lateral off t4, one
/// substation relay.
pub fn lateral_feeder() -> Network {
    let mut s = String::from(
        "New Circuit.lat bus1=src basekv=12.47 mvasc3=200 mvasc1=180\n\
         New Linecode.weak nphases=3 units=mi r1=10 x1=5 r0=15 x0=9\n\
         New Line.head bus1=src bus2=t0 linecode=mtx601 length=0.1 units=mi\n",
    );
    for k in 1..10 {
        s += &format!("New Line.t{k} bus1=t{} bus2=t{k} linecode=mtx601 length=0.5 units=mi\n", k - 1);
        s += &format!("New Load.lt{k} bus1=t{k} kw=150 pf=0.95\n");
    }
    let mut prev = "t4".to_string();
    for (k, b) in LATERAL_BUSES.iter().enumerate() {
        s += &format!("New Line.x{} bus1={prev} bus2={b} linecode=weak length=2 units=mi\n", k + 1);
        s += &format!("New Load.lx{} bus1={b} kw=20 pf=0.95\n", k + 1);
        prev = b.to_string();
    }
    s += "New Relay.r_sub monitoredobj=line.head\n";
    dss(&s)
}
