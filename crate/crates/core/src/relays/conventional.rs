use serde::{Deserialize, Serialize};

use super::{Curve, OcSettings};
use crate::netmodel::{DirectedTopology, Network};
use crate::powerflow::{max_load_currents, PowerFlowError, PowerFlowOptions};
use crate::scenario::{ProfileMapping, ProfileSet};

/// Rules for the bundled overcurrent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConventionalConfig {
    /// Pickup as a multiple of the maximum load current.
    pub pickup_factor: f64,
    /// Pickup used where no load current flows (A).
    pub min_pickup_amps: f64,
    pub curve: Curve,
    pub tds_min: f64,
    pub tds_max: f64,
    pub margin_s: f64,
    /// Current multiple at which consecutive devices are graded.
    pub grading_multiple: f64,
}

impl Default for ConventionalConfig {
    fn default() -> Self {
        ConventionalConfig {
            pickup_factor: 2.0,
            min_pickup_amps: 1.0,
            curve: Curve::VeryInverse,
            tds_min: 0.1,
            tds_max: 15.0,
            margin_s: 0.3,
            grading_multiple: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionalSetting {
    pub device: String,
    pub settings: OcSettings,
}

/// A device pair whose margin could not be met inside the TDS bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradingWarning {
    pub upstream: String,
    pub downstream: String,
    pub required_tds: f64,
}

impl std::fmt::Display for GradingWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "cannot grade {} above {}: needs TDS {:.3}, capped at the maximum",
            self.upstream, self.downstream, self.required_tds
        )
    }
}

/// Inverse-time settings for every device from per-device maximum load
/// currents (A, network device order). Each device's time dial is the
/// smallest one that keeps it at least `margin_s` slower than every device
/// directly below it, both at `grading_multiple` times its own pickup and at
/// the current that is `grading_multiple` times the lower device's pickup.
pub fn make_conventional_agents(
    net: &Network,
    topo: &DirectedTopology,
    max_load: &[[f64; 3]],
    cfg: &ConventionalConfig,
) -> (Vec<ConventionalSetting>, Vec<GradingWarning>) {
    let n = net.devices.len();
    let pickup: Vec<f64> = (0..n)
        .map(|d| {
            let peak = max_load.get(d).map_or(0.0, |c| c.iter().copied().fold(0.0, f64::max));
            (cfg.pickup_factor * peak).max(cfg.min_pickup_amps)
        })
        .collect();
    // the device directly above each device along its coordination chain
    let mut upstream: Vec<Option<usize>> = vec![None; n];
    for (d, up) in upstream.iter_mut().enumerate() {
        if let Some(e) = topo.device_edge[d] {
            let chain = topo.coordination_chain_indices(topo.edges[e].to);
            *up = chain.iter().position(|&c| c == d).and_then(|i| chain.get(i + 1).copied());
        }
    }
    let depth = |d: usize| {
        let mut k = 0;
        let mut cur = d;
        while let Some(u) = upstream[cur] {
            k += 1;
            cur = u;
        }
        k
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&d| std::cmp::Reverse(depth(d)));

    let unit = |m: f64| cfg.curve.unit_time(m);
    let m = cfg.grading_multiple;
    let mut tds = vec![cfg.tds_min; n];
    let mut warnings = Vec::new();
    for &u in &order {
        let Some(t_m) = unit(m) else { break };
        let mut need = cfg.tds_min;
        for d in (0..n).filter(|&d| upstream[d] == Some(u)) {
            let t_down = tds[d] * t_m;
            let mut req = (t_down + cfg.margin_s) / t_m;
            if let Some(t) = unit(m * pickup[d] / pickup[u]) {
                req = req.max((t_down + cfg.margin_s) / t);
            }
            if req > cfg.tds_max {
                warnings.push(GradingWarning {
                    upstream: net.devices[u].id.clone(),
                    downstream: net.devices[d].id.clone(),
                    required_tds: req,
                });
            }
            need = need.max(req);
        }
        tds[u] = need.min(cfg.tds_max);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let settings = (0..n)
        .map(|d| ConventionalSetting {
            device: net.devices[d].id.clone(),
            settings: OcSettings::inverse(pickup[d], cfg.curve, tds[d]),
        })
        .collect();
    (settings, warnings)
}

/// [`make_conventional_agents`] with maximum load currents taken over every
/// hour of `profiles`.
pub fn conventional_agents_from_profiles(
    net: &Network,
    topo: &DirectedTopology,
    profiles: &ProfileSet,
    mapping: &ProfileMapping,
    cfg: &ConventionalConfig,
    options: &PowerFlowOptions,
) -> Result<(Vec<ConventionalSetting>, Vec<GradingWarning>), PowerFlowError> {
    let max_load = max_load_currents(net, profiles, mapping, options)?;
    Ok(make_conventional_agents(net, topo, &max_load, cfg))
}
