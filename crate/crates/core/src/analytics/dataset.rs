use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::episode::{Environment, Expectation, Expectations, Observation, CHANNELS};
use crate::relays::TripClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// One row per device and step.
    #[default]
    Step,
    /// One row per device and episode, taken at the fault onset step (or
    /// `episode_step` when there is no fault).
    Episode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub episodes: u64,
    pub granularity: Granularity,
    /// Channel names taken from each sample; see [`CHANNELS`].
    pub channels: Vec<String>,
    /// Per-step rows cover steps `1..=steps`.
    pub steps: usize,
    /// Row step of fault-free episodes at episode granularity.
    pub episode_step: usize,
    pub workers: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            episodes: 500,
            granularity: Granularity::Step,
            channels: vec!["v1_pu".into(), "i1_a".into()],
            steps: 60,
            episode_step: 20,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub episode: u64,
    pub device: String,
    pub step: usize,
    pub features: Vec<f64>,
    pub label: TripClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Feature column names, `<channel>_t<lag>` with lag 0 the latest sample.
    pub columns: Vec<String>,
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn class_counts(&self) -> BTreeMap<TripClass, usize> {
        let mut out = BTreeMap::from([(TripClass::NoTrip, 0), (TripClass::TripInstant, 0), (TripClass::TripDelayed, 0)]);
        for r in &self.rows {
            *out.entry(r.label).or_default() += 1;
        }
        out
    }
}

/// Target decision for `device` after observing step `step`: inside the
/// primary window the primary trips instantly and the first backup trips
/// after the coordination delay; everything else holds.
pub fn label_for(exp: &Expectations, device: &str, step: usize) -> TripClass {
    let (Some(onset), Some(deadline)) = (exp.onset, exp.deadline) else {
        return TripClass::NoTrip;
    };
    if step < onset || step >= deadline {
        return TripClass::NoTrip;
    }
    match exp.get(device) {
        Expectation::TripBy { .. } => TripClass::TripInstant,
        Expectation::Backup { closer, .. } if closer.len() == 1 => TripClass::TripDelayed,
        _ => TripClass::NoTrip,
    }
}

fn features(o: &Observation, channels: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(channels.len() * o.window.len());
    for &c in channels {
        out.extend(o.window.iter().map(|s| s.values()[c]));
    }
    out
}

/// Runs `cfg.episodes` episodes with every breaker held and labels the
/// observation windows of `devices` from the expected behavior. Trajectories
/// and labels therefore do not depend on any agent.
pub fn build_dataset(env: &Environment, devices: &[String], cfg: &DatasetConfig) -> Result<Dataset, AnalyticsError> {
    let channels: Vec<usize> = cfg
        .channels
        .iter()
        .map(|c| {
            CHANNELS.iter().position(|k| k == c).ok_or_else(|| {
                AnalyticsError::Input(format!("unknown channel '{c}'; expected one of {}", CHANNELS.join(", ")))
            })
        })
        .collect::<Result<_, _>>()?;
    if channels.is_empty() {
        return Err(AnalyticsError::Input("no feature channels selected".into()));
    }
    let h = env.config().history;
    let columns = channels
        .iter()
        .flat_map(|&c| (0..h).rev().map(move |lag| format!("{}_t{}", CHANNELS[c], -(lag as i64))))
        .collect();

    let one = |k: u64| -> Result<Vec<DatasetRow>, AnalyticsError> {
        let (mut ep, _) = env.reset(k, devices).map_err(|e| AnalyticsError::Runtime(format!("episode {k}: {e}")))?;
        let exp = ep.expectations.clone();
        let last = match cfg.granularity {
            Granularity::Step => cfg.steps,
            Granularity::Episode => exp.onset.unwrap_or(cfg.episode_step),
        };
        let mut rows = Vec::new();
        let hold = BTreeMap::new();
        for t in 1..=last {
            let r = ep.step(&hold).map_err(|e| AnalyticsError::Runtime(format!("episode {k} step {t}: {e}")))?;
            let obs = r.observations;
            if cfg.granularity == Granularity::Step || t == last {
                for d in devices {
                    let o = obs.get(d).expect("window for every device");
                    rows.push(DatasetRow {
                        episode: k,
                        device: d.clone(),
                        step: t,
                        features: features(o, &channels),
                        label: label_for(&exp, d, t),
                    });
                }
            }
            if r.done {
                break;
            }
        }
        Ok(rows)
    };
    let run = || (0..cfg.episodes).into_par_iter().map(one).collect::<Result<Vec<_>, _>>();
    let per_episode = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers.max(1)).build() {
        Ok(pool) => pool.install(run)?,
        Err(_) => run()?,
    };
    Ok(Dataset { columns, rows: per_episode.into_iter().flatten().collect() })
}

pub fn write_dataset_csv<W: Write>(ds: &Dataset, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["episode".to_string(), "device".into(), "step".into()];
    header.extend(ds.columns.iter().cloned());
    header.push("label".into());
    w.write_record(&header)?;
    for r in &ds.rows {
        let mut rec = vec![r.episode.to_string(), r.device.clone(), r.step.to_string()];
        rec.extend(r.features.iter().map(|x| x.to_string()));
        rec.push(label_name(r.label).into());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn label_name(c: TripClass) -> &'static str {
    match c {
        TripClass::NoTrip => "no_trip",
        TripClass::TripInstant => "trip_instant",
        TripClass::TripDelayed => "trip_delayed",
    }
}

/// Sidecar JSON with the row count per label.
pub fn write_class_counts<W: Write>(ds: &Dataset, out: W) -> serde_json::Result<()> {
    let counts: BTreeMap<&str, usize> = ds.class_counts().into_iter().map(|(k, v)| (label_name(k), v)).collect();
    serde_json::to_writer_pretty(out, &serde_json::json!({ "rows": ds.rows.len(), "classes": counts }))
}
