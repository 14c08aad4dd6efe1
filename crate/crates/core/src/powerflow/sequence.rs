use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequenceComponents {
    pub zero: Complex64,
    pub positive: Complex64,
    pub negative: Complex64,
}

/// Symmetrical components of a phase-A/B/C phasor triple.
pub fn sequence_components(va: Complex64, vb: Complex64, vc: Complex64) -> SequenceComponents {
    let a = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let a2 = a * a;
    SequenceComponents {
        zero: (va + vb + vc) / 3.0,
        positive: (va + a * vb + a2 * vc) / 3.0,
        negative: (va + a2 * vb + a * vc) / 3.0,
    }
}
