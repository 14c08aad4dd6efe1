use serde::{Deserialize, Serialize};

/// Inverse-time overcurrent curve shapes, `t = TDS * (A / (M^p - 1) + B)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    ModeratelyInverse,
    VeryInverse,
    ExtremelyInverse,
}

impl Curve {
    pub const ALL: [Curve; 3] = [Curve::ModeratelyInverse, Curve::VeryInverse, Curve::ExtremelyInverse];

    /// `(A, B, p)`.
    pub fn constants(self) -> (f64, f64, f64) {
        match self {
            Curve::ModeratelyInverse => (0.0515, 0.114, 0.02),
            Curve::VeryInverse => (19.61, 0.491, 2.0),
            Curve::ExtremelyInverse => (28.2, 0.1217, 2.0),
        }
    }

    /// Operate time at TDS = 1, `None` when `m <= 1`.
    pub fn unit_time(self, m: f64) -> Option<f64> {
        if !(m > 1.0) {
            return None;
        }
        let (a, b, p) = self.constants();
        Some(a / (m.powf(p) - 1.0) + b)
    }
}

/// Operate time (s) at current multiple `m`, or `None` (no trip) for `m <= 1`.
pub fn it_oc_time(m: f64, curve: Curve, tds: f64) -> Option<f64> {
    curve.unit_time(m).map(|t| tds * t)
}

/// Trip accumulator realizing a curve under time-varying current.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveIntegrator {
    /// Fraction of the operate time elapsed; trips at 1.
    pub progress: f64,
}

impl CurveIntegrator {
    /// Advances by `dt` seconds at multiple `m`. Drops straight to zero when
    /// the current falls to pickup or below. Returns whether the curve is
    /// satisfied.
    pub fn step(&mut self, m: f64, curve: Curve, tds: f64, dt: f64) -> bool {
        match it_oc_time(m, curve, tds) {
            Some(t) => self.progress += dt / t,
            None => self.progress = 0.0,
        }
        self.progress >= 1.0 - 1e-12
    }
}

/// One accumulator step; see [`CurveIntegrator::step`].
pub fn it_oc_integrate(state: &mut CurveIntegrator, m: f64, curve: Curve, tds: f64, dt: f64) -> bool {
    state.step(m, curve, tds, dt)
}
