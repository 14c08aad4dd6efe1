use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{Rng, ScenarioError, ScenarioSample};
use crate::netmodel::{DerKind, Network};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Hourly percentage time series sharing one gap-free timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    timestamps: Vec<NaiveDateTime>,
    names: Vec<String>,
    /// `values[s][h]` in percent of base.
    values: Vec<Vec<f64>>,
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| DateTime::parse_from_rfc3339(s).ok().map(|d| d.naive_utc()))
}

impl ProfileSet {
    pub fn new(timestamps: Vec<NaiveDateTime>, series: Vec<(String, Vec<f64>)>) -> Result<ProfileSet, ScenarioError> {
        if timestamps.is_empty() || series.is_empty() {
            return Err(ScenarioError::EmptyProfiles);
        }
        for w in timestamps.windows(2) {
            let step = w[1] - w[0];
            if step == Duration::zero() {
                return Err(ScenarioError::DuplicateTimestamp(w[1].format(TIMESTAMP_FORMAT).to_string()));
            }
            if step != Duration::hours(1) {
                return Err(ScenarioError::Gap {
                    after: w[0].format(TIMESTAMP_FORMAT).to_string(),
                    next: w[1].format(TIMESTAMP_FORMAT).to_string(),
                });
            }
        }
        let mut names = Vec::new();
        let mut values = Vec::new();
        for (name, v) in series {
            if v.len() != timestamps.len() {
                return Err(ScenarioError::Ragged { line: 0, expected: timestamps.len(), found: v.len() });
            }
            if let Some(h) = v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(ScenarioError::NegativeValue { line: h + 2, series: name, value: v[h] });
            }
            if names.contains(&name) {
                return Err(ScenarioError::DuplicateSeries(name));
            }
            names.push(name);
            values.push(v);
        }
        Ok(ProfileSet { timestamps, names, values })
    }

    /// Every series held at `percent` for `hours` hours.
    pub fn constant(names: &[&str], percent: f64, hours: usize) -> ProfileSet {
        let start = NaiveDateTime::parse_from_str("2024-01-01T00:00:00", TIMESTAMP_FORMAT).expect("literal");
        let ts = (0..hours).map(|h| start + Duration::hours(h as i64)).collect();
        ProfileSet::new(ts, names.iter().map(|n| (n.to_string(), vec![percent; hours])).collect()).expect("valid")
    }

    pub fn hours(&self) -> usize {
        self.timestamps.len()
    }

    pub fn series_names(&self) -> &[String] {
        &self.names
    }

    pub fn timestamp(&self, hour: usize) -> NaiveDateTime {
        self.timestamps[hour]
    }

    /// Percent values of a series.
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i].as_slice())
    }

    /// Fractional scale (percent / 100) of a series at an hour.
    pub fn scale(&self, name: &str, hour: usize) -> Option<f64> {
        self.series(name).map(|v| v[hour] / 100.0)
    }

    pub fn min_scale(&self, name: &str) -> Option<f64> {
        self.series(name).map(|v| v.iter().copied().fold(f64::INFINITY, f64::min) / 100.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (h, t) in self.timestamps.iter().enumerate() {
            let mut rec = vec![t.format(TIMESTAMP_FORMAT).to_string()];
            rec.extend(self.values.iter().map(|s| format!("{}", s[h])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses profile CSV text: header `timestamp,<series>...`, ISO-8601
/// hourly timestamps, values in percent.
pub fn parse_profiles<R: Read>(input: R) -> Result<ProfileSet, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| ScenarioError::Csv(e.to_string()))?.clone();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("timestamp") {
        return Err(ScenarioError::BadHeader);
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut timestamps = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| ScenarioError::Csv(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(ScenarioError::Ragged { line, expected: header.len(), found: rec.len() });
        }
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| ScenarioError::BadTimestamp { line, value: rec[0].to_string() })?;
        timestamps.push(ts);
        for (i, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| ScenarioError::BadValue { line, series: names[i].clone(), value: cell.to_string() })?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(ScenarioError::NegativeValue { line, series: names[i].clone(), value: v });
            }
            cols[i].push(v);
        }
    }
    ProfileSet::new(timestamps, names.into_iter().zip(cols).collect())
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<ProfileSet, ScenarioError> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    parse_profiles(std::io::BufReader::new(f))
}

/// Assignment of loads and DERs to profile series. Elements listed in
/// `elements` use the named series; all other loads use `load`, PV units
/// `pv` and wind units `wind`. A missing series means 100%.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileMapping {
    pub load: String,
    pub pv: String,
    pub wind: String,
    pub elements: BTreeMap<String, String>,
}

impl Default for ProfileMapping {
    fn default() -> Self {
        ProfileMapping { load: "load".into(), pv: "pv".into(), wind: "wind".into(), elements: BTreeMap::new() }
    }
}

impl ProfileMapping {
    pub fn load_series<'a>(&'a self, id: &str) -> &'a str {
        self.elements.get(id).map_or(&self.load, |s| s)
    }

    pub fn der_series<'a>(&'a self, id: &str, kind: DerKind) -> &'a str {
        self.elements.get(id).map_or(
            match kind {
                DerKind::Pv => &self.pv,
                DerKind::Wind => &self.wind,
            },
            |s| s,
        )
    }
}

impl ProfileSet {
    /// Scenario at one profile hour.
    pub fn sample_at(&self, hour: usize, net: &Network, mapping: &ProfileMapping) -> ScenarioSample {
        ScenarioSample {
            hour,
            timestamp: self.timestamps[hour].format(TIMESTAMP_FORMAT).to_string(),
            load_scale: net.loads.iter().map(|l| self.scale(mapping.load_series(&l.id), hour).unwrap_or(1.0)).collect(),
            der_scale: net
                .ders
                .iter()
                .map(|d| self.scale(mapping.der_series(&d.id, d.kind), hour).unwrap_or(1.0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Sequential,
    #[default]
    Random,
}

/// Draws scenarios from a profile set, keeping the sequential cursor.
#[derive(Debug, Clone)]
pub struct ScenarioSampler {
    pub mode: SamplingMode,
    cursor: usize,
}

impl ScenarioSampler {
    pub fn new(mode: SamplingMode) -> Self {
        ScenarioSampler { mode, cursor: 0 }
    }

    pub fn starting_at(mode: SamplingMode, hour: usize) -> Self {
        ScenarioSampler { mode, cursor: hour }
    }

    pub fn next(
        &mut self,
        profiles: &ProfileSet,
        net: &Network,
        mapping: &ProfileMapping,
        rng: &mut Rng,
    ) -> Result<ScenarioSample, ScenarioError> {
        let hour = match self.mode {
            SamplingMode::Sequential => {
                if self.cursor >= profiles.hours() {
                    return Err(ScenarioError::Exhausted(profiles.hours()));
                }
                self.cursor += 1;
                self.cursor - 1
            }
            SamplingMode::Random => rng.index(profiles.hours()),
        };
        Ok(profiles.sample_at(hour, net, mapping))
    }
}

/// One scenario draw from `profiles`; see [`ScenarioSampler`].
pub fn sample_scenario(
    profiles: &ProfileSet,
    net: &Network,
    mapping: &ProfileMapping,
    sampler: &mut ScenarioSampler,
    rng: &mut Rng,
) -> Result<ScenarioSample, ScenarioError> {
    sampler.next(profiles, net, mapping, rng)
}
