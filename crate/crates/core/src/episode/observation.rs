use std::collections::{BTreeMap, VecDeque};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::shortcircuit::DeviceMeasurement;

/// Flat channel names of one [`Sample`], in [`Sample::values`] order.
pub const CHANNELS: [&str; 24] = [
    "va_pu", "vb_pu", "vc_pu", "va_deg", "vb_deg", "vc_deg", "ia_a", "ib_a", "ic_a", "ia_deg", "ib_deg", "ic_deg", "v0_pu",
    "v1_pu", "v2_pu", "i0_a", "i1_a", "i2_a", "za_ohm", "zb_ohm", "zc_ohm", "za_deg", "zb_deg", "zc_deg",
];

/// One step of measurements at one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub v_pu: [f64; 3],
    pub v_deg: [f64; 3],
    pub i_a: [f64; 3],
    pub i_deg: [f64; 3],
    /// Zero, positive and negative sequence voltage magnitudes (pu).
    pub v_seq_pu: [f64; 3],
    /// Zero, positive and negative sequence current magnitudes (A).
    pub i_seq_a: [f64; 3],
    /// Phase-to-ground loop impedances (ohm), `None` below the current floor.
    pub z_ohm: [Option<Complex64>; 3],
}

impl Sample {
    pub fn from_measurement(m: &DeviceMeasurement) -> Sample {
        let base = if m.base_ln > 0.0 { m.base_ln } else { 1.0 };
        let deg = |c: Complex64| if c.norm() > 0.0 { c.arg().to_degrees() } else { 0.0 };
        Sample {
            v_pu: m.voltage.map(|v| v.norm() / base),
            v_deg: m.voltage.map(deg),
            i_a: m.current.map(|i| i.norm()),
            i_deg: m.current.map(deg),
            v_seq_pu: [m.v_seq.zero, m.v_seq.positive, m.v_seq.negative].map(|v| v.norm() / base),
            i_seq_a: [m.i_seq.zero, m.i_seq.positive, m.i_seq.negative].map(|i| i.norm()),
            z_ohm: m.impedance,
        }
    }

    /// A de-energized, zero-current reading.
    pub fn dead() -> Sample {
        Sample {
            v_pu: [0.0; 3],
            v_deg: [0.0; 3],
            i_a: [0.0; 3],
            i_deg: [0.0; 3],
            v_seq_pu: [0.0; 3],
            i_seq_a: [0.0; 3],
            z_ohm: [None; 3],
        }
    }

    pub fn current_phasor(&self, phase: usize) -> Complex64 {
        Complex64::from_polar(self.i_a[phase], self.i_deg[phase].to_radians())
    }

    /// Channel values in [`CHANNELS`] order; undefined impedances are NaN.
    pub fn values(&self) -> [f64; 24] {
        let mut out = [0.0; 24];
        let groups = [self.v_pu, self.v_deg, self.i_a, self.i_deg, self.v_seq_pu, self.i_seq_a];
        for (g, vals) in groups.iter().enumerate() {
            out[3 * g..3 * g + 3].copy_from_slice(vals);
        }
        for k in 0..3 {
            let (m, a) = self.z_ohm[k].map_or((f64::NAN, f64::NAN), |z| (z.norm(), z.arg().to_degrees()));
            out[18 + k] = m;
            out[21 + k] = a;
        }
        out
    }
}

/// Rolling measurement window of one device, oldest sample first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub device: String,
    pub window: VecDeque<Sample>,
}

impl Observation {
    /// Window seeded with `sample` repeated `len` times.
    pub fn seeded(device: &str, sample: Sample, len: usize) -> Observation {
        Observation { device: device.to_string(), window: std::iter::repeat_n(sample, len.max(1)).collect() }
    }

    pub fn push(&mut self, sample: Sample, len: usize) {
        self.window.push_back(sample);
        while self.window.len() > len.max(1) {
            self.window.pop_front();
        }
    }

    pub fn latest(&self) -> &Sample {
        self.window.back().expect("windows are never empty")
    }
}

/// Everything the environment shows the agents at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub step: usize,
    pub time_s: f64,
    pub step_seconds: f64,
    pub devices: BTreeMap<String, Observation>,
}

impl Observations {
    pub fn get(&self, device: &str) -> Option<&Observation> {
        self.devices.get(device)
    }
}
