use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Expectation, Expectations, RewardTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLabel {
    Correct,
    FalsePositive,
    FalseNegative,
    CoordinationFailure,
}

impl OutcomeLabel {
    pub const ALL: [OutcomeLabel; 4] = [
        OutcomeLabel::Correct,
        OutcomeLabel::FalsePositive,
        OutcomeLabel::FalseNegative,
        OutcomeLabel::CoordinationFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeLabel::Correct => "correct",
            OutcomeLabel::FalsePositive => "false_positive",
            OutcomeLabel::FalseNegative => "false_negative",
            OutcomeLabel::CoordinationFailure => "coordination_failure",
        }
    }
}

/// One violation: a bad trip at its trip step, or a missed trip at the
/// deadline step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: OutcomeLabel,
    pub device: String,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub label: OutcomeLabel,
    /// All violations, earliest first.
    pub flags: Vec<Violation>,
}

/// How a single trip is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TripJudgement {
    OnTime,
    Late,
    AfterCloser,
    AfterPrimaryFailure,
    FalsePositive,
    Miscoordinated,
}

fn judge(device: &str, step: usize, trips: &BTreeMap<String, usize>, exp: &Expectations) -> TripJudgement {
    let Some(onset) = exp.onset else {
        return TripJudgement::FalsePositive;
    };
    // actions applied at or before the onset step were decided without the fault
    if step <= onset {
        return TripJudgement::FalsePositive;
    }
    match exp.get(device) {
        Expectation::Hold => TripJudgement::Miscoordinated,
        Expectation::TripBy { deadline_step } if step <= *deadline_step => TripJudgement::OnTime,
        Expectation::TripBy { .. } => TripJudgement::Late,
        Expectation::Backup { closer, primary_deadline } => {
            if closer.iter().any(|c| trips.get(c).is_some_and(|&s| s <= step)) {
                TripJudgement::AfterCloser
            } else if step > *primary_deadline {
                TripJudgement::AfterPrimaryFailure
            } else {
                TripJudgement::Miscoordinated
            }
        }
    }
}

/// Step at which the primary device is charged with a missed trip.
fn missed_deadline(trips: &BTreeMap<String, usize>, exp: &Expectations, steps_run: usize) -> Option<(String, usize)> {
    let (primary, deadline) = (exp.primary()?, exp.deadline?);
    if deadline > steps_run {
        return None;
    }
    let isolated = exp.chain.iter().any(|d| trips.get(d).is_some_and(|&s| s <= deadline));
    (!isolated).then(|| (primary.to_string(), deadline))
}

/// Labels an episode from its trip steps. `steps_run` is the last step the
/// episode reached.
pub fn classify_outcome(trips: &BTreeMap<String, usize>, exp: &Expectations, steps_run: usize) -> Outcome {
    let mut flags = Vec::new();
    for (device, &step) in trips {
        let kind = match judge(device, step, trips, exp) {
            TripJudgement::FalsePositive => OutcomeLabel::FalsePositive,
            TripJudgement::Miscoordinated => OutcomeLabel::CoordinationFailure,
            _ => continue,
        };
        flags.push(Violation { kind, device: device.clone(), step });
    }
    if let Some((device, step)) = missed_deadline(trips, exp, steps_run) {
        flags.push(Violation { kind: OutcomeLabel::FalseNegative, device, step });
    }
    flags.sort_by(|a, b| (a.step, a.kind, &a.device).cmp(&(b.step, b.kind, &b.device)));
    let label = flags.first().map_or(OutcomeLabel::Correct, |v| v.kind);
    Outcome { label, flags }
}

/// Rewards earned at `step` by each device, given every trip up to `step`.
pub fn rewards_at(
    step: usize,
    trips: &BTreeMap<String, usize>,
    exp: &Expectations,
    table: &RewardTable,
) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = exp.devices.keys().map(|d| (d.clone(), 0.0)).collect();
    for (device, _) in trips.iter().filter(|(_, &s)| s == step) {
        let r = match judge(device, step, trips, exp) {
            TripJudgement::OnTime => table.trip,
            TripJudgement::AfterPrimaryFailure => table.backup,
            TripJudgement::FalsePositive | TripJudgement::Miscoordinated => table.bad,
            TripJudgement::Late | TripJudgement::AfterCloser => 0.0,
        };
        *out.entry(device.clone()).or_default() += r;
    }
    if let Some((device, s)) = missed_deadline(trips, exp, step) {
        if s == step {
            *out.entry(device).or_default() += table.miss;
        }
    }
    out
}

/// Nonzero reward entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEvent {
    pub step: usize,
    pub device: String,
    pub reward: f64,
}

/// Nonzero rewards over steps `1..=steps_run`.
pub fn compute_rewards(
    trips: &BTreeMap<String, usize>,
    exp: &Expectations,
    table: &RewardTable,
    steps_run: usize,
) -> Vec<RewardEvent> {
    let mut out = Vec::new();
    for step in 1..=steps_run {
        let so_far: BTreeMap<String, usize> = trips.iter().filter(|(_, &s)| s <= step).map(|(d, &s)| (d.clone(), s)).collect();
        for (device, reward) in rewards_at(step, &so_far, exp, table) {
            if reward != 0.0 {
                out.push(RewardEvent { step, device, reward });
            }
        }
    }
    out
}
