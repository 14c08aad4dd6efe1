use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    classify_outcome, desired_behavior, rewards_at, EpisodeConfig, EpisodeError, EpisodeRecord, Expectations,
    Observation, Observations, Outcome, RewardEvent, Sample,
};
use crate::netmodel::{build_topology, DirectedTopology, Network};
use crate::powerflow::{LoadTreatment, NetworkModel, NetworkState, PowerFlowSolution, Solver};
use crate::scenario::{draw_episode, FaultConfig, FaultSampler, ScenarioSample, ScenarioSource};
use crate::shortcircuit::{
    check_fault_type, measure_device, resolve_fault_location, solve_fault_with_model, FaultOptions, FaultSpec,
};

/// Everything an environment needs besides the network.
#[derive(Debug, Clone, Default)]
pub struct EnvSettings {
    pub scenarios: ScenarioSource,
    pub faults: FaultConfig,
    pub episode: EpisodeConfig,
    pub fault_options: FaultOptions,
}

struct EnvInner {
    net: Network,
    topo: DirectedTopology,
    model: Arc<NetworkModel>,
    sampler: FaultSampler,
    settings: EnvSettings,
    seed: u64,
}

/// A network plus its scenario and fault generators. Cheap to clone.
#[derive(Clone)]
pub struct Environment {
    inner: Arc<EnvInner>,
}

impl std::fmt::Debug for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Environment").field("network", &self.inner.net.name).field("seed", &self.inner.seed).finish()
    }
}

impl Environment {
    pub fn new(net: Network, settings: EnvSettings, seed: u64) -> Result<Environment, EpisodeError> {
        settings.episode.check()?;
        let topo = build_topology(&net).map_err(|e| EpisodeError::Network(e.to_string()))?;
        let model = Arc::new(NetworkModel::new(&net).map_err(|e| EpisodeError::Network(e.to_string()))?);
        let sampler = FaultSampler::new(&net, &topo, &settings.faults)?;
        Ok(Environment { inner: Arc::new(EnvInner { net, topo, model, sampler, settings, seed }) })
    }

    pub fn network(&self) -> &Network {
        &self.inner.net
    }

    pub fn topology(&self) -> &DirectedTopology {
        &self.inner.topo
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.inner.settings.episode
    }

    pub fn settings(&self) -> &EnvSettings {
        &self.inner.settings
    }

    pub fn seed(&self) -> u64 {
        self.inner.seed
    }

    pub fn fault_sampler(&self) -> &FaultSampler {
        &self.inner.sampler
    }

    /// Scenario and fault of episode `index` under the environment seed.
    pub fn draw(&self, index: u64) -> Result<(ScenarioSample, Option<FaultSpec>), EpisodeError> {
        self.draw_seeded(self.inner.seed, index)
    }

    pub fn draw_seeded(&self, seed: u64, index: u64) -> Result<(ScenarioSample, Option<FaultSpec>), EpisodeError> {
        let i = &self.inner;
        Ok(draw_episode(&i.net, &i.settings.scenarios, &i.sampler, seed, index)?)
    }

    /// Starts episode `index`; `devices` are the agent-controlled devices.
    pub fn reset(&self, index: u64, devices: &[String]) -> Result<(Episode, Observations), EpisodeError> {
        let (scenario, fault) = self.draw(index)?;
        self.reset_with(index, scenario, fault, devices)
    }

    /// Starts an episode with a given scenario and fault.
    pub fn reset_with(
        &self,
        index: u64,
        scenario: ScenarioSample,
        fault: Option<FaultSpec>,
        devices: &[String],
    ) -> Result<(Episode, Observations), EpisodeError> {
        Episode::start(self.clone(), index, self.inner.seed, scenario, fault, devices)
    }

    /// Starts episode `index` of the stream seeded by `seed` instead of the
    /// environment seed.
    pub fn reset_seeded(&self, seed: u64, index: u64, devices: &[String]) -> Result<(Episode, Observations), EpisodeError> {
        let (scenario, fault) = self.draw_seeded(seed, index)?;
        Episode::start(self.clone(), index, seed, scenario, fault, devices)
    }
}

/// Network solution of one switching state, with every device's sample.
struct StateSolution {
    solution: PowerFlowSolution,
    samples: Vec<Sample>,
    fault_energized: bool,
}

/// Step outcome returned to the caller of [`Episode::step`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: usize,
    pub time_s: f64,
    pub fault_active: bool,
    pub isolated: bool,
    /// Present once the episode is done.
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub observations: Observations,
    pub rewards: BTreeMap<String, f64>,
    pub done: bool,
    pub info: StepInfo,
}

/// One running episode. Single-threaded; owns its solution cache.
pub struct Episode {
    env: Environment,
    pub index: u64,
    seed: u64,
    work: Arc<Network>,
    model: Arc<NetworkModel>,
    pub scenario: ScenarioSample,
    pub fault: Option<FaultSpec>,
    fault_bus: Option<usize>,
    pub expectations: Expectations,
    devices: Vec<String>,
    device_lines: BTreeMap<String, usize>,
    step: usize,
    open: BTreeSet<usize>,
    trips: BTreeMap<String, usize>,
    cache: HashMap<(Vec<usize>, bool), Arc<StateSolution>>,
    warm: Vec<Complex64>,
    windows: BTreeMap<String, Observation>,
    isolation_step: Option<usize>,
    done: bool,
    actions: BTreeMap<String, Vec<u8>>,
    reward_totals: BTreeMap<String, f64>,
    reward_events: Vec<RewardEvent>,
    samples_log: Option<Vec<BTreeMap<String, Sample>>>,
}

impl Episode {
    fn start(
        env: Environment,
        index: u64,
        seed: u64,
        scenario: ScenarioSample,
        mut fault: Option<FaultSpec>,
        devices: &[String],
    ) -> Result<(Episode, Observations), EpisodeError> {
        let net = &env.inner.net;
        for d in devices {
            if net.device_index(d).is_none() {
                return Err(EpisodeError::UnknownDevice(d.clone()));
            }
        }
        let cfg = env.inner.settings.episode.clone();
        let (work, model, topo, fault_bus) = match &mut fault {
            None => (Arc::new(net.clone()), env.inner.model.clone(), None, None),
            Some(spec) => {
                spec.onset_step = spec.onset_step.max(1);
                let (w, bus) = resolve_fault_location(net, &spec.location)?;
                check_fault_type(&w, bus, spec.fault_type)?;
                match w {
                    std::borrow::Cow::Borrowed(_) => (Arc::new(net.clone()), env.inner.model.clone(), None, Some(bus)),
                    std::borrow::Cow::Owned(w) => {
                        let model = NetworkModel::new(&w).map_err(|e| EpisodeError::Network(e.to_string()))?;
                        let topo = build_topology(&w).map_err(|e| EpisodeError::Network(e.to_string()))?;
                        (Arc::new(w), Arc::new(model), Some(topo), Some(bus))
                    }
                }
            }
        };
        let topo_ref = topo.as_ref().unwrap_or(&env.inner.topo);
        let expectations = desired_behavior(
            topo_ref,
            fault_bus.zip(fault.as_ref().map(|f| f.onset_step)),
            devices,
            cfg.primary_window_steps(),
        );
        let device_lines = work
            .devices
            .iter()
            .map(|d| (d.id.clone(), work.line_index(&d.line).expect("validated device line")))
            .collect();
        let mut ep = Episode {
            env,
            index,
            seed,
            work,
            model,
            scenario,
            fault,
            fault_bus,
            expectations,
            devices: devices.to_vec(),
            device_lines,
            step: 0,
            open: BTreeSet::new(),
            trips: BTreeMap::new(),
            cache: HashMap::new(),
            warm: Vec::new(),
            windows: BTreeMap::new(),
            isolation_step: None,
            done: false,
            actions: devices.iter().map(|d| (d.clone(), Vec::new())).collect(),
            reward_totals: devices.iter().map(|d| (d.clone(), 0.0)).collect(),
            reward_events: Vec::new(),
            samples_log: cfg.record_observations.then(Vec::new),
        };
        let pre = ep.solve_state(false)?;
        ep.warm = pre.solution.voltages.clone();
        for (d, s) in ep.work.devices.iter().zip(&pre.samples) {
            ep.windows.insert(d.id.clone(), Observation::seeded(&d.id, s.clone(), cfg.history));
        }
        ep.log_samples(&pre);
        let obs = ep.observations();
        Ok((ep, obs))
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.env.inner.settings.episode
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn trips(&self) -> &BTreeMap<String, usize> {
        &self.trips
    }

    pub fn devices(&self) -> &[String] {
        &self.devices
    }

    /// Network actually solved (with the fault bus inserted for line faults).
    pub fn work_network(&self) -> &Network {
        &self.work
    }

    pub fn fault_bus(&self) -> Option<&str> {
        self.fault_bus.map(|b| self.work.buses[b].id.as_str())
    }

    pub fn observations(&self) -> Observations {
        let cfg = self.config();
        Observations {
            step: self.step,
            time_s: self.step as f64 * cfg.step_seconds,
            step_seconds: cfg.step_seconds,
            devices: self.windows.clone(),
        }
    }

    fn log_samples(&mut self, s: &StateSolution) {
        if let Some(log) = &mut self.samples_log {
            log.push(self.work.devices.iter().map(|d| d.id.clone()).zip(s.samples.iter().cloned()).collect());
        }
    }

    fn solve_state(&mut self, fault_on: bool) -> Result<Arc<StateSolution>, EpisodeError> {
        let fault_on = fault_on && self.fault.is_some();
        let key = (self.open.iter().copied().collect::<Vec<_>>(), fault_on);
        if let Some(s) = self.cache.get(&key) {
            return Ok(s.clone());
        }
        let state = NetworkState { open_lines: self.open.clone() };
        let opts = self.env.inner.settings.fault_options;
        let solution = if fault_on {
            let pre = self.solve_state(false)?;
            let spec = self.fault.as_ref().expect("fault present");
            let bus = self.fault_bus.expect("fault bus resolved");
            solve_fault_with_model(
                &self.model,
                &self.work,
                &self.scenario,
                &state,
                bus,
                spec.fault_type,
                spec.impedance_ohm,
                &pre.solution,
                &opts,
            )?
            .solution
        } else {
            let system = self.model.assemble(&self.work, &self.scenario, &state, LoadTreatment::Normal)?;
            let warm = (!self.warm.is_empty()).then_some(self.warm.as_slice());
            Solver::new(&self.work, system)?.solve(&self.work, warm, &opts.powerflow)?
        };
        let samples = (0..self.work.devices.len())
            .map(|d| Sample::from_measurement(&measure_device(&self.work, &solution, d)))
            .collect();
        let fault_energized = self.fault_bus.is_some_and(|b| solution.energized[b]);
        let s = Arc::new(StateSolution { solution, samples, fault_energized });
        self.cache.insert(key, s.clone());
        Ok(s)
    }

    /// Applies trip actions, advances one step and re-solves the network.
    /// Devices missing from `actions` hold.
    pub fn step(&mut self, actions: &BTreeMap<String, bool>) -> Result<StepResult, EpisodeError> {
        if self.done {
            return Err(EpisodeError::Done);
        }
        for d in actions.keys() {
            if !self.device_lines.contains_key(d) {
                return Err(EpisodeError::UnknownDevice(d.clone()));
            }
        }
        let t = self.step + 1;
        for (d, &trip) in actions {
            if trip && !self.trips.contains_key(d) {
                self.trips.insert(d.clone(), t);
                self.open.insert(self.device_lines[d]);
            }
        }
        for (d, log) in &mut self.actions {
            log.push(u8::from(actions.get(d).copied().unwrap_or(false)));
        }
        self.step = t;
        let fault_on = self.fault.as_ref().is_some_and(|f| t >= f.onset_step);
        let sol = self.solve_state(fault_on)?;
        let h = self.config().history;
        for (d, s) in self.work.devices.iter().zip(&sol.samples) {
            self.windows.get_mut(&d.id).expect("window per device").push(s.clone(), h);
        }
        self.log_samples(&sol);
        if fault_on && !sol.fault_energized && self.isolation_step.is_none() {
            self.isolation_step = Some(t);
        }
        let table = self.config().rewards;
        let rewards = rewards_at(t, &self.trips, &self.expectations, &table);
        for (d, &r) in &rewards {
            *self.reward_totals.entry(d.clone()).or_default() += r;
            if r != 0.0 {
                self.reward_events.push(RewardEvent { step: t, device: d.clone(), reward: r });
            }
        }
        let cfg = self.env.inner.settings.episode.clone();
        self.done = t >= cfg.steps_per_episode || self.isolation_step.is_some_and(|i| t >= i + cfg.post_clear_hold_steps);
        let info = StepInfo {
            step: t,
            time_s: t as f64 * cfg.step_seconds,
            fault_active: fault_on,
            isolated: self.isolation_step.is_some(),
            outcome: self.done.then(|| self.outcome()),
        };
        Ok(StepResult { observations: self.observations(), rewards, done: self.done, info })
    }

    pub fn outcome(&self) -> Outcome {
        classify_outcome(&self.trips, &self.expectations, self.step)
    }

    /// Record of the episode so far.
    pub fn record(&self) -> EpisodeRecord {
        EpisodeRecord {
            schema: super::RECORD_SCHEMA,
            episode: self.index,
            seed: self.seed,
            scenario: self.scenario.clone(),
            fault: self.fault.clone(),
            fault_bus: self.fault_bus().map(String::from),
            steps: self.step,
            devices: self.devices.clone(),
            actions: self
                .actions
                .iter()
                .map(|(d, a)| (d.clone(), a.iter().map(|&b| char::from(b'0' + b)).collect()))
                .collect(),
            trips: self.trips.clone(),
            isolation_step: self.isolation_step,
            expectations: self.expectations.clone(),
            outcome: Some(self.outcome()),
            rewards: self.reward_totals.clone(),
            reward_events: self.reward_events.clone(),
            agent_errors: Vec::new(),
            aborted: None,
            samples: self.samples_log.clone(),
        }
    }
}
