mod common;

use std::collections::BTreeMap;

use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use protsim::episode::{Expectation, Observation, Observations, Sample};
use protsim::netmodel::build_topology;
use protsim::relays::*;

const DT: f64 = 1.0 / 60.0;

fn ctx() -> AgentContext {
    AgentContext { step_seconds: DT, expectation: Expectation::Hold, fault_onset: None }
}

fn sample_with_current(amps: [f64; 3]) -> Sample {
    let mut s = Sample::dead();
    s.i_a = amps;
    s.i_deg = [0.0, -120.0, 120.0];
    s
}

fn obs(step: usize, samples: &[(&str, Sample)]) -> Observations {
    Observations {
        step,
        time_s: step as f64 * DT,
        step_seconds: DT,
        devices: samples.iter().map(|(d, s)| (d.to_string(), Observation::seeded(d, s.clone(), 1))).collect(),
    }
}

/// Steps an agent with a constant sample and returns the first step it trips.
fn first_trip(agent: &mut dyn Agent, sample: &Sample, max: usize) -> Option<usize> {
    agent.reset(&ctx());
    (1..=max).find(|&k| {
        agent.observe(&obs(k, &[(agent.device().to_string().as_str(), sample.clone())])).unwrap();
        agent.act()
    })
}

#[test]
fn very_inverse_reference_time() {
    assert_abs_diff_eq!(it_oc_time(5.0, Curve::VeryInverse, 1.0).unwrap(), 1.3081, epsilon = 1e-3);
}

#[test]
fn curve_values_match_closed_form() {
    // reference values evaluated independently in double precision
    let table = [
        (Curve::ModeratelyInverse, 2.0, 3.803249225231527),
        (Curve::ModeratelyInverse, 5.0, 1.688325597526334),
        (Curve::ModeratelyInverse, 20.0, 0.9480632350944558),
        (Curve::VeryInverse, 1.5, 16.179),
        (Curve::VeryInverse, 10.0, 0.6890808080808081),
        (Curve::ExtremelyInverse, 2.0, 9.521700000000001),
        (Curve::ExtremelyInverse, 5.0, 1.2967),
        (Curve::ExtremelyInverse, 20.0, 0.1923766917293233),
    ];
    for (c, m, t) in table {
        assert_abs_diff_eq!(it_oc_time(m, c, 1.0).unwrap(), t, epsilon = 1e-12);
        assert_abs_diff_eq!(it_oc_time(m, c, 0.5).unwrap(), 0.5 * t, epsilon = 1e-12);
    }
}

#[test]
fn curves_are_monotone_over_a_grid() {
    for c in Curve::ALL {
        assert!(it_oc_time(1.0, c, 1.0).is_none());
        assert!(it_oc_time(0.3, c, 1.0).is_none());
        let ms: Vec<f64> = (0..400).map(|k| 1.01 + k as f64 * 0.1).collect();
        for tds in [0.1, 0.5, 1.0, 3.0, 10.0] {
            for w in ms.windows(2) {
                let (a, b) = (it_oc_time(w[0], c, tds).unwrap(), it_oc_time(w[1], c, tds).unwrap());
                assert!(b < a, "{c:?} tds {tds}: t({}) = {a} vs t({}) = {b}", w[0], w[1]);
                assert!(b > 0.0);
            }
        }
        for &m in &ms {
            let ts: Vec<f64> = [0.1, 0.5, 1.0, 3.0, 10.0].iter().map(|&d| it_oc_time(m, c, d).unwrap()).collect();
            assert!(ts.windows(2).all(|w| w[1] > w[0]), "{c:?} m {m}");
        }
    }
}

#[test]
fn integrator_matches_closed_form_at_constant_current() {
    let mut st = CurveIntegrator::default();
    let k = (1..10_000).find(|_| it_oc_integrate(&mut st, 5.0, Curve::VeryInverse, 1.0, DT)).unwrap();
    let t = k as f64 * DT;
    assert!((t - 1.3081).abs() <= DT + 1e-3, "{t}");
    assert!(t >= 1.3080833333333333 - 1e-9);
}

#[test]
fn integrator_handles_step_change_and_reset() {
    // half the operate time at M=2, then M=10: the remaining half takes half of t(10)
    let (t2, t10) = (it_oc_time(2.0, Curve::VeryInverse, 1.0).unwrap(), it_oc_time(10.0, Curve::VeryInverse, 1.0).unwrap());
    let mut st = CurveIntegrator::default();
    let n2 = (t2 / 2.0 / DT).floor() as usize;
    for _ in 0..n2 {
        assert!(!st.step(2.0, Curve::VeryInverse, 1.0, DT));
    }
    let done = st.progress;
    let k: usize = (1..10_000).find(|_| st.step(10.0, Curve::VeryInverse, 1.0, DT)).unwrap();
    let expect = ((1.0 - done) * t10 / DT).ceil() as usize;
    assert!(k.abs_diff(expect) <= 1, "{k} vs {expect}");
    // falling to pickup clears the accumulated progress
    let mut st = CurveIntegrator { progress: 0.9 };
    assert!(!st.step(1.0, Curve::VeryInverse, 1.0, DT));
    assert_eq!(st.progress, 0.0);
}

#[test]
fn instantaneous_overcurrent_is_memoryless() {
    let mut a = OcAgent::new("r", OcSettings::instantaneous(100.0));
    a.reset(&ctx());
    let steps = [(50.0, false), (150.0, true), (90.0, false), (100.0, false), (100.5, true)];
    for (k, (amps, want)) in steps.into_iter().enumerate() {
        a.observe(&obs(k + 1, &[("r", sample_with_current([amps, 0.0, 0.0]))])).unwrap();
        assert_eq!(a.act(), want, "step {k}: {amps} A");
    }
}

#[test]
fn inverse_overcurrent_agent_follows_the_curve() {
    let settings = OcSettings::inverse(100.0, Curve::VeryInverse, 0.5);
    let mut a = OcAgent::new("r", settings.clone());
    // the largest phase multiple drives the curve
    let s = sample_with_current([120.0, 500.0, 80.0]);
    let k = first_trip(&mut a, &s, 1000).unwrap();
    let t = settings.operate_time([120.0, 500.0, 80.0]).unwrap();
    assert_abs_diff_eq!(t, 0.5 * 1.3080833333333333, epsilon = 1e-12);
    assert_eq!(k, (t / DT - 1e-9).ceil() as usize);
    // latched once operated
    a.observe(&obs(k + 1, &[("r", sample_with_current([0.0; 3]))])).unwrap();
    assert!(a.act());
    let mut a = OcAgent::new("r", settings);
    assert_eq!(first_trip(&mut a, &sample_with_current([99.0, 99.0, 99.0]), 5000), None);
}

#[test]
fn missing_channel_is_an_error() {
    let mut a = OcAgent::new("r", OcSettings::instantaneous(10.0));
    let err = a.observe(&obs(1, &[("other", Sample::dead())])).unwrap_err();
    assert!(matches!(err, AgentError::MissingChannel { .. }));
}

fn two_zone() -> DistanceSettings {
    DistanceSettings {
        angle_deg: 75.0,
        zones: vec![DistanceZone { reach_ohm: 4.0, delay_s: 0.0 }, DistanceZone { reach_ohm: 8.0, delay_s: 0.2 }],
    }
}

#[test]
fn mho_characteristic_examples() {
    let s = two_zone();
    let at = |mag: f64, deg: f64| Some(Complex64::from_polar(mag, f64::to_radians(deg)));
    assert_eq!(distance_operate(&s, at(2.0, 75.0)), Some(0));
    assert_eq!(distance_operate(&s, at(4.0, 75.0)), Some(0));
    assert_eq!(distance_operate(&s, at(4.1, 75.0)), Some(1));
    assert_eq!(distance_operate(&s, at(8.0, 75.0)), Some(1));
    assert_eq!(distance_operate(&s, at(8.1, 75.0)), None);
    // off-angle reach shrinks as cos of the angle difference
    let r = 4.0 * f64::to_radians(60.0).cos();
    assert_eq!(distance_operate(&s, at(r * 0.999, 15.0)), Some(0));
    assert_eq!(distance_operate(&s, at(r * 1.01, 15.0)), Some(1));
    assert_eq!(distance_operate(&s, at(1.0, 75.0 + 180.0)), None);
    assert_eq!(distance_operate(&s, None), None);
}

#[test]
fn distance_zone_timers() {
    let mut z = Sample::dead();
    z.z_ohm = [Some(Complex64::from_polar(6.0, f64::to_radians(75.0))), None, None];
    let mut a = DistanceAgent::new("r", two_zone());
    let k = first_trip(&mut a, &z, 100).unwrap();
    assert_eq!(k, 1 + 12, "zone 2 trips 0.2 s after entry");
    z.z_ohm[0] = Some(Complex64::from_polar(1.0, f64::to_radians(70.0)));
    assert_eq!(first_trip(&mut a, &z, 100), Some(1));
    z.z_ohm[0] = Some(Complex64::new(50.0, 5.0));
    assert_eq!(first_trip(&mut a, &z, 100), None);
}

#[test]
fn differential_examples() {
    let s = DifferentialSettings { inner: "a".into(), outer: "b".into(), slope: 0.3, min_operate_amps: 20.0 };
    let ph = |m: f64| [Complex64::new(m, 0.0), Complex64::new(m, 0.0), Complex64::new(m, 0.0)];
    // through current: in and out cancel
    assert!(!differential_operate(&s, &ph(500.0), &ph(-500.0)));
    // 10 A of mismatch stays under the minimum
    assert!(!differential_operate(&s, &ph(500.0), &ph(-490.0)));
    // internal fault fed from one side
    assert!(differential_operate(&s, &ph(500.0), &ph(0.0)));
    // restraint: 100 A mismatch on 1000 A through current, 0.3 * 950 = 285 > 100
    assert!(!differential_operate(&s, &ph(1000.0), &ph(-900.0)));
    assert!(differential_operate(&s, &ph(1000.0), &ph(-500.0)));
    assert!(!differential_operate(&s, &ph(15.0), &ph(0.0)));

    // the agent negates the outer device's measured current
    let mut agent = DifferentialAgent::new(s);
    assert_eq!(agent.requirements().devices, ["a", "b"]);
    let through = [("a", sample_with_current([500.0; 3])), ("b", sample_with_current([500.0; 3]))];
    agent.reset(&ctx());
    agent.observe(&obs(1, &through)).unwrap();
    assert!(!agent.act());
    let internal = [("a", sample_with_current([500.0; 3])), ("b", sample_with_current([50.0; 3]))];
    agent.observe(&obs(2, &internal)).unwrap();
    assert!(agent.act());
}

#[test]
fn trip_scheduler_delays_by_whole_steps() {
    let mut s = TripScheduler::new(0.3, DT);
    assert_eq!(s.delay_steps, 18);
    s.decide(5, TripClass::NoTrip);
    assert!(!s.fire(100));
    s.decide(5, TripClass::TripDelayed);
    assert!(!s.fire(22));
    assert!(s.fire(23));
    s.decide(7, TripClass::TripInstant);
    assert!(s.fire(7));
    s.clear();
    assert!(!s.fire(100));
}

#[test]
fn classifier_agent_trips_after_its_decision() {
    let mut a = ClassifierAgent::new("r", 3, 0.3, |o: &Observation| {
        if o.latest().i_a[0] > 100.0 {
            TripClass::TripDelayed
        } else {
            TripClass::NoTrip
        }
    });
    a.reset(&ctx());
    let mut o = Observation::seeded("r", sample_with_current([10.0; 3]), 3);
    let mut tripped = None;
    for k in 1..=60 {
        if k == 5 {
            o.push(sample_with_current([400.0; 3]), 3);
        }
        let ob = Observations { step: k, time_s: k as f64 * DT, step_seconds: DT, devices: [("r".to_string(), o.clone())].into() };
        a.observe(&ob).unwrap();
        if a.act() && tripped.is_none() {
            tripped = Some(k);
        }
    }
    assert_eq!(tripped, Some(5 + 18));
}

#[test]
fn scripted_and_oracle_agents() {
    let mut s = ScriptedAgent::new("r", Some(4));
    s.reset(&ctx());
    let acts: Vec<bool> = (0..6)
        .map(|k| {
            s.observe(&obs(k, &[("r", Sample::dead())])).unwrap();
            s.act()
        })
        .collect();
    assert_eq!(acts, [false, false, false, true, true, true]);

    let mut o = OracleAgent::new("r");
    o.reset(&AgentContext { step_seconds: DT, expectation: Expectation::TripBy { deadline_step: 30 }, fault_onset: Some(12) });
    let first = (0..40).find(|&k| {
        o.observe(&obs(k, &[("r", Sample::dead())])).unwrap();
        o.act()
    });
    assert_eq!(first, Some(12));
    let mut h = OracleAgent::new("r");
    h.reset(&ctx());
    assert!((0..40).all(|k| {
        h.observe(&obs(k, &[("r", Sample::dead())])).unwrap();
        !h.act()
    }));
}

#[test]
fn conventional_grading_on_ieee34() {
    let net = common::case("ieee34");
    let topo = build_topology(&net).unwrap();
    let loads = [[40.0, 35.0, 38.0], [25.0, 22.0, 30.0]];
    let cfg = ConventionalConfig::default();
    let (settings, warnings) = make_conventional_agents(&net, &topo, &loads, &cfg);
    assert!(warnings.is_empty());
    let by: BTreeMap<_, _> = settings.iter().map(|s| (s.device.as_str(), &s.settings)).collect();
    let (up, down) = (by["relay_800"], by["relay_830"]);
    assert_eq!(up.pickup_amps, [80.0; 3]);
    assert_eq!(down.pickup_amps, [60.0; 3]);
    assert_eq!(down.time_dial, cfg.tds_min);
    assert_eq!(up.curve, Curve::VeryInverse);
    // margin holds at the same current, at three times either pickup
    let margin = |i: f64| up.operate_time([i; 3]).unwrap() - down.operate_time([i; 3]).unwrap();
    assert!(margin(3.0 * 80.0) >= 0.3 - 1e-9 && margin(3.0 * 60.0) >= 0.3 - 1e-9);
    // and between the two relays' own three-times-pickup points, where it is tight
    let own = up.operate_time([240.0; 3]).unwrap() - down.operate_time([180.0; 3]).unwrap();
    assert_abs_diff_eq!(own, 0.3, epsilon = 1e-9);
    let u3 = Curve::VeryInverse.unit_time(3.0).unwrap();
    assert_abs_diff_eq!(up.time_dial, (0.1 * u3 + 0.3) / u3, epsilon = 1e-12);
}

#[test]
fn conventional_pickup_floor_and_cap() {
    let net = common::case("ieee34");
    let topo = build_topology(&net).unwrap();
    let cfg = ConventionalConfig { tds_max: 0.2, ..Default::default() };
    let (settings, warnings) = make_conventional_agents(&net, &topo, &[[0.0; 3], [0.2; 3]], &cfg);
    assert_eq!(settings[0].settings.pickup_amps, [1.0; 3]);
    assert_eq!(settings[1].settings.pickup_amps, [1.0; 3]);
    assert_eq!(warnings.len(), 1);
    assert_eq!(warnings[0].upstream, "relay_800");
    assert_eq!(settings[0].settings.time_dial, 0.2);
}

#[test]
fn settings_file_round_trip() {
    let text = r#"
version = 1
default = "hold"

[agents.relay_800]
type = "overcurrent"
pickup_amps = 150.0
curve = "extremely_inverse"
time_dial = 0.4

[agents.relay_830]
type = "distance"
angle_deg = 70.0
zones = [{ reach_ohm = 3.0, delay_s = 0.0 }]
"#;
    let f = AgentSettingsFile::parse(text).unwrap();
    assert_eq!(f.default, AgentDefault::Hold);
    let specs = f.specs().unwrap();
    assert_eq!(specs.len(), 2);
    assert_eq!(specs[0].device(), "relay_800");
    match &specs[0] {
        AgentSpec::Overcurrent { settings, .. } => {
            assert_eq!(settings.pickup_amps, [150.0; 3]);
            assert_eq!(settings.curve, Curve::ExtremelyInverse);
        }
        other => panic!("{other:?}"),
    }
    let net = common::case("ieee34");
    assert!(specs.iter().all(|s| s.check(&net).is_ok()));
    assert!(AgentSettingsFile::parse("version = 2\n").is_err());
    assert!(AgentSettingsFile::parse("version = 1\nbogus = 3\n").is_err());
    let bad = AgentSpec::Hold { device: "relay_999".into() };
    assert!(bad.check(&net).is_err());
}
