use std::f64::consts::PI;

use chrono::{Duration, NaiveDateTime};

use super::{ProfileSet, Rng};

/// Synthetic hourly `load`, `pv` and `wind` profiles in percent: daily and
/// seasonal sinusoids plus bounded noise.
pub fn generate_profiles(hours: usize, seed: u64, start: NaiveDateTime) -> ProfileSet {
    let mut rng = Rng::new(seed, 0);
    let mut load = Vec::with_capacity(hours);
    let mut pv = Vec::with_capacity(hours);
    let mut wind = Vec::with_capacity(hours);
    let mut wind_state = 0.0f64;
    for h in 0..hours {
        let day = (h % 24) as f64;
        let season = (2.0 * PI * h as f64 / 8760.0).cos();
        let daily = (2.0 * PI * (day - 18.0) / 24.0).cos();
        let noise = rng.range_f64(-5.0, 5.0);
        load.push((65.0 + 15.0 * daily + 10.0 * season + noise).clamp(20.0, 120.0));
        let sun = (PI * (day - 6.0) / 12.0).sin().max(0.0);
        let cloud = rng.range_f64(0.6, 1.0);
        pv.push((100.0 * sun * cloud * (0.8 - 0.2 * season)).clamp(0.0, 100.0));
        wind_state = 0.9 * wind_state + rng.range_f64(-8.0, 8.0);
        wind.push((45.0 + 15.0 * season + wind_state).clamp(0.0, 100.0));
    }
    let timestamps = (0..hours).map(|h| start + Duration::hours(h as i64)).collect();
    ProfileSet::new(timestamps, vec![("load".into(), load), ("pv".into(), pv), ("wind".into(), wind)])
        .expect("generated profiles are valid")
}
