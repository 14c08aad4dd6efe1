//! The environment core: reset/step episodes, desired behavior, outcome
//! labels, rewards and batch runs.
//!
//! Step `t` applies the trip bits the agents chose after observing step
//! `t - 1`, stamps the fault once `t` reaches its onset step, re-solves the
//! network and publishes new observations. Step 0 is the prefault state.

mod config;
mod env;
mod expectations;
mod observation;
mod outcome;
mod record;
mod run;

use thiserror::Error;

pub use config::{EpisodeConfig, RewardTable};
pub use env::{EnvSettings, Environment, Episode, StepInfo, StepResult};
pub use expectations::{desired_behavior, Expectation, Expectations};
pub use observation::{Observation, Observations, Sample, CHANNELS};
pub use outcome::{classify_outcome, compute_rewards, rewards_at, Outcome, OutcomeLabel, RewardEvent, Violation};
pub use record::{AgentFault, EpisodeRecord, RECORD_SCHEMA};
pub use run::{
    run_batch, run_episode, run_episode_with, write_records_jsonl, write_summary_csv, AgentFactory, BatchResult, Summary,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpisodeError {
    #[error("invalid episode configuration: {0}")]
    Config(String),
    #[error("network: {0}")]
    Network(String),
    #[error("unknown device '{0}'")]
    UnknownDevice(String),
    #[error("episode is done")]
    Done,
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error(transparent)]
    Fault(#[from] crate::shortcircuit::FaultError),
    #[error(transparent)]
    PowerFlow(#[from] crate::powerflow::PowerFlowError),
}
