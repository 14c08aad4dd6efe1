use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AgentFault, Environment, EpisodeRecord, Expectations, OutcomeLabel, RECORD_SCHEMA};
use crate::relays::{Agent, AgentContext, AgentSpec};
use crate::scenario::ScenarioSample;
use crate::shortcircuit::FaultSpec;

/// Builds a fresh agent set for each episode of a batch.
pub trait AgentFactory: Sync {
    fn agents(&self, episode: u64) -> Vec<Box<dyn Agent>>;
}

impl<F: Fn(u64) -> Vec<Box<dyn Agent>> + Sync> AgentFactory for F {
    fn agents(&self, episode: u64) -> Vec<Box<dyn Agent>> {
        self(episode)
    }
}

impl AgentFactory for [AgentSpec] {
    fn agents(&self, _episode: u64) -> Vec<Box<dyn Agent>> {
        self.iter().map(AgentSpec::build).collect()
    }
}

impl AgentFactory for Vec<AgentSpec> {
    fn agents(&self, episode: u64) -> Vec<Box<dyn Agent>> {
        self.as_slice().agents(episode)
    }
}

fn aborted_record(env: &Environment, index: u64, devices: &[String], reason: String) -> EpisodeRecord {
    log::warn!("episode {index} aborted: {reason}");
    let (scenario, fault) = env.draw(index).unwrap_or_else(|_| (ScenarioSample::nominal(env.network()), None));
    EpisodeRecord {
        schema: RECORD_SCHEMA,
        episode: index,
        seed: env.seed(),
        scenario,
        fault,
        fault_bus: None,
        steps: 0,
        devices: devices.to_vec(),
        actions: BTreeMap::new(),
        trips: BTreeMap::new(),
        isolation_step: None,
        expectations: Expectations { onset: None, deadline: None, chain: Vec::new(), devices: BTreeMap::new() },
        outcome: None,
        rewards: BTreeMap::new(),
        reward_events: Vec::new(),
        agent_errors: Vec::new(),
        aborted: Some(reason),
        samples: None,
    }
}

/// Runs episode `index` of `env` with `agents`, each bound to one device.
/// An agent that errors is recorded and holds for the rest of the episode.
pub fn run_episode(env: &Environment, index: u64, agents: &mut [Box<dyn Agent>]) -> EpisodeRecord {
    match env.draw(index) {
        Ok((scenario, fault)) => run_episode_with(env, index, scenario, fault, agents, None),
        Err(e) => aborted_record(env, index, &[], e.to_string()),
    }
}

/// [`run_episode`] with a given scenario and fault. With `stop_after` the
/// episode is cut after that step (classified as if it ended there).
pub fn run_episode_with(
    env: &Environment,
    index: u64,
    scenario: ScenarioSample,
    fault: Option<FaultSpec>,
    agents: &mut [Box<dyn Agent>],
    stop_after: Option<usize>,
) -> EpisodeRecord {
    let net = env.network();
    let cfg = env.config();
    let mut faults = Vec::new();
    let mut active = vec![true; agents.len()];
    let mut devices: Vec<String> = Vec::new();
    for (k, a) in agents.iter().enumerate() {
        let req = a.requirements();
        let problem = if let Some(d) = req.devices.iter().find(|d| net.device_index(d).is_none()) {
            Some(format!("unknown device '{d}'"))
        } else if req.window > cfg.history {
            Some(format!("needs a {}-step window, environment keeps {}", req.window, cfg.history))
        } else {
            None
        };
        if let Some(message) = problem {
            active[k] = false;
            faults.push(AgentFault { device: a.device().to_string(), step: 0, message });
        }
        // a disabled agent still owns its breaker, which then holds
        if net.device_index(a.device()).is_some() && !devices.iter().any(|d| d == a.device()) {
            devices.push(a.device().to_string());
        }
    }
    let (mut ep, mut obs) = match env.reset_with(index, scenario, fault, &devices) {
        Ok(x) => x,
        Err(e) => return aborted_record(env, index, &devices, e.to_string()),
    };
    for a in agents.iter_mut() {
        a.reset(&AgentContext {
            step_seconds: cfg.step_seconds,
            expectation: ep.expectations.get(a.device()).clone(),
            fault_onset: ep.expectations.onset,
        });
    }
    loop {
        let mut actions: BTreeMap<String, bool> = devices.iter().map(|d| (d.clone(), false)).collect();
        for (k, a) in agents.iter_mut().enumerate() {
            if !active[k] {
                continue;
            }
            if let Err(e) = a.observe(&obs) {
                active[k] = false;
                faults.push(AgentFault { device: a.device().to_string(), step: obs.step, message: e.to_string() });
                continue;
            }
            if a.act() {
                actions.insert(a.device().to_string(), true);
            }
        }
        match ep.step(&actions) {
            Ok(r) => {
                obs = r.observations;
                if r.done || stop_after.is_some_and(|s| r.info.step >= s) {
                    break;
                }
            }
            Err(e) => {
                log::warn!("episode {index} aborted at step {}: {e}", ep.step_index());
                let mut rec = ep.record();
                rec.outcome = None;
                rec.aborted = Some(e.to_string());
                rec.agent_errors = faults;
                return rec;
            }
        }
    }
    let mut rec = ep.record();
    rec.agent_errors = faults;
    rec
}

/// Outcome counts of a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub aborted: usize,
    pub correct: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub coordination_failure: usize,
    /// Correct episodes over classified (non-aborted) episodes.
    pub success_rate: f64,
}

impl Summary {
    pub fn from_records(records: &[EpisodeRecord]) -> Summary {
        let mut s = Summary { episodes: records.len(), ..Default::default() };
        for r in records {
            match r.outcome.as_ref().map(|o| o.label) {
                None => s.aborted += 1,
                Some(OutcomeLabel::Correct) => s.correct += 1,
                Some(OutcomeLabel::FalsePositive) => s.false_positive += 1,
                Some(OutcomeLabel::FalseNegative) => s.false_negative += 1,
                Some(OutcomeLabel::CoordinationFailure) => s.coordination_failure += 1,
            }
        }
        let classified = s.episodes - s.aborted;
        s.success_rate = if classified == 0 { 0.0 } else { s.correct as f64 / classified as f64 };
        s
    }

    pub fn count(&self, label: OutcomeLabel) -> usize {
        match label {
            OutcomeLabel::Correct => self.correct,
            OutcomeLabel::FalsePositive => self.false_positive,
            OutcomeLabel::FalseNegative => self.false_negative,
            OutcomeLabel::CoordinationFailure => self.coordination_failure,
        }
    }

    /// Plain-text table with one row per agent set.
    pub fn report(rows: &[(String, Summary)]) -> String {
        let mut out = format!(
            "{:<20} {:>14} {:>14} {:>22} {:>12} {:>8}\n",
            "Agents", "False Positive", "False Negative", "Coordination Failure", "Success Rate", "Aborted"
        );
        for (name, s) in rows {
            out += &format!(
                "{:<20} {:>14} {:>14} {:>22} {:>11.2}% {:>8}\n",
                name,
                s.false_positive,
                s.false_negative,
                s.coordination_failure,
                100.0 * s.success_rate,
                s.aborted
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub summary: Summary,
    /// Records in episode order.
    pub records: Vec<EpisodeRecord>,
}

/// Runs episodes `0..n` on `workers` threads. Each episode draws from its
/// own random stream and records are collected in episode order, so the
/// result does not depend on the worker count.
pub fn run_batch<F: AgentFactory + ?Sized>(env: &Environment, factory: &F, n: u64, workers: usize) -> BatchResult {
    let run = || -> Vec<EpisodeRecord> {
        (0..n)
            .into_par_iter()
            .map(|k| {
                let mut agents = factory.agents(k);
                run_episode(env, k, &mut agents)
            })
            .collect()
    };
    let records = match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running on the global pool");
            run()
        }
    };
    BatchResult { summary: Summary::from_records(&records), records }
}

pub fn write_records_jsonl<W: Write>(records: &[EpisodeRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

/// Summary CSV with one row per named agent set.
pub fn write_summary_csv<W: Write>(rows: &[(String, Summary)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "agent_set",
        "episodes",
        "aborted",
        "correct",
        "false_positive",
        "false_negative",
        "coordination_failure",
        "success_rate",
    ])?;
    for (name, s) in rows {
        w.write_record([
            name.clone(),
            s.episodes.to_string(),
            s.aborted.to_string(),
            s.correct.to_string(),
            s.false_positive.to_string(),
            s.false_negative.to_string(),
            s.coordination_failure.to_string(),
            format!("{:.4}", s.success_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}
