use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::episode::{EnvSettings, Environment, EpisodeConfig};
use crate::netmodel::{parse_dss_file, validate, Network, Severity};
use crate::powerflow::PowerFlowOptions;
use crate::relays::{
    conventional_agents_from_profiles, load_agent_settings, AgentDefault, AgentSpec, ConventionalConfig, GradingWarning,
};
use crate::scenario::{load_profiles, FaultConfig, ProfileMapping, ProfileSet, SamplingMode};
use crate::shortcircuit::FaultOptions;

/// Everything a batch command needs. The seed has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub network: PathBuf,
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    #[serde(default)]
    pub agents: Option<PathBuf>,
    #[serde(default)]
    pub mapping: ProfileMapping,
    #[serde(default)]
    pub sampling: SamplingMode,
    #[serde(default)]
    pub episode: EpisodeConfig,
    #[serde(default)]
    pub faults: FaultConfig,
    pub seed: u64,
    #[serde(default = "default_episodes")]
    pub episodes: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_episodes() -> u64 {
    2000
}

fn default_workers() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunManifest {
    pub fn new(network: impl Into<PathBuf>, seed: u64) -> RunManifest {
        RunManifest {
            network: network.into(),
            profiles: None,
            agents: None,
            mapping: ProfileMapping::default(),
            sampling: SamplingMode::default(),
            episode: EpisodeConfig::default(),
            faults: FaultConfig::default(),
            seed,
            episodes: default_episodes(),
            workers: default_workers(),
            out: default_out(),
        }
    }

    /// Reads a TOML manifest. Relative paths are taken from the manifest's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<RunManifest, AnalyticsError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| AnalyticsError::Input(format!("{}: {e}", path.display())))?;
        let mut m: RunManifest =
            toml::from_str(&text).map_err(|e| AnalyticsError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut m.network);
        m.profiles.as_mut().map(fix);
        m.agents.as_mut().map(fix);
        fix(&mut m.out);
        Ok(m)
    }

    /// Checks that every input path exists and the configuration is sound.
    pub fn check(&self) -> Result<(), AnalyticsError> {
        for p in [Some(&self.network), self.profiles.as_ref(), self.agents.as_ref()].into_iter().flatten() {
            if !p.exists() {
                return Err(AnalyticsError::Input(format!("{}: no such file", p.display())));
            }
        }
        self.episode.check().map_err(|e| AnalyticsError::Input(e.to_string()))?;
        self.faults.check().map_err(|e| AnalyticsError::Input(e.to_string()))?;
        Ok(())
    }

    pub fn profile_set(&self) -> Result<Option<ProfileSet>, AnalyticsError> {
        self.profiles
            .as_ref()
            .map(|p| load_profiles(p).map_err(|e| AnalyticsError::Input(format!("{}: {e}", p.display()))))
            .transpose()
    }
}

fn load_network(path: &Path) -> Result<Network, AnalyticsError> {
    let out = parse_dss_file(path).map_err(|e| AnalyticsError::Input(format!("{}: {e}", path.display())))?;
    for w in &out.warnings {
        log::warn!("{}: {w:?}", path.display());
    }
    let errors: Vec<String> = validate(&out.network)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| format!("{}: {}", d.element, d.message))
        .collect();
    if !errors.is_empty() {
        return Err(AnalyticsError::Input(format!("{}: {}", path.display(), errors.join("; "))));
    }
    Ok(out.network)
}

/// Network, profiles and generators of a manifest.
pub fn load_environment(m: &RunManifest) -> Result<Environment, AnalyticsError> {
    m.check()?;
    let net = load_network(&m.network)?;
    let mut settings = EnvSettings {
        faults: m.faults.clone(),
        episode: m.episode.clone(),
        fault_options: FaultOptions::default(),
        ..Default::default()
    };
    settings.scenarios.profiles = m.profile_set()?.map(Arc::new);
    settings.scenarios.mapping = m.mapping.clone();
    settings.scenarios.mode = m.sampling;
    Environment::new(net, settings, m.seed).map_err(|e| AnalyticsError::Input(e.to_string()))
}

/// Graded inverse-time agents for every device, from the maximum load
/// current over the environment's profiles (or base loads without
/// profiles).
pub fn conventional_specs(
    env: &Environment,
    cfg: &ConventionalConfig,
) -> Result<(Vec<AgentSpec>, Vec<GradingWarning>), AnalyticsError> {
    let net = env.network();
    let src = &env.settings().scenarios;
    let flat;
    let profiles = match &src.profiles {
        Some(p) => p.as_ref(),
        None => {
            let mut names: Vec<&str> = vec![&src.mapping.load, &src.mapping.pv, &src.mapping.wind];
            names.extend(src.mapping.elements.values().map(String::as_str));
            names.sort_unstable();
            names.dedup();
            flat = ProfileSet::constant(&names, 100.0, 1);
            &flat
        }
    };
    let (settings, warnings) =
        conventional_agents_from_profiles(net, env.topology(), profiles, &src.mapping, cfg, &PowerFlowOptions::default())
            .map_err(|e| AnalyticsError::Runtime(format!("maximum-load study: {e}")))?;
    let specs = settings.into_iter().map(|s| AgentSpec::Overcurrent { device: s.device, settings: s.settings }).collect();
    Ok((specs, warnings))
}

/// Agents of a manifest: explicit agents from the settings file, with the
/// file's default policy (conventional without a file) on every other
/// device.
pub fn build_agents(m: &RunManifest, env: &Environment) -> Result<(Vec<AgentSpec>, Vec<GradingWarning>), AnalyticsError> {
    let (explicit, default) = match &m.agents {
        Some(p) => {
            let f = load_agent_settings(p).map_err(|e| AnalyticsError::Input(format!("{}: {e}", p.display())))?;
            (f.specs().map_err(|e| AnalyticsError::Input(format!("{}: {e}", p.display())))?, f.default)
        }
        None => (Vec::new(), AgentDefault::Conventional),
    };
    let net = env.network();
    for s in &explicit {
        s.check(net).map_err(|e| AnalyticsError::Input(e.to_string()))?;
    }
    let covered = |d: &str| explicit.iter().any(|s| s.device() == d);
    let mut warnings = Vec::new();
    let mut specs = explicit.clone();
    let rest: Vec<String> = net.device_ids().into_iter().filter(|d| !covered(d)).collect();
    match default {
        AgentDefault::None => {}
        AgentDefault::Hold => specs.extend(rest.into_iter().map(|device| AgentSpec::Hold { device })),
        AgentDefault::Oracle => specs.extend(rest.into_iter().map(|device| AgentSpec::Oracle { device })),
        AgentDefault::Conventional => {
            let (conv, w) = conventional_specs(env, &ConventionalConfig::default())?;
            specs.extend(conv.into_iter().filter(|s| rest.iter().any(|d| d == s.device())));
            warnings = w;
        }
    }
    Ok((specs, warnings))
}
