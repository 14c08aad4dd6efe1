use super::{LoadTreatment, NetworkModel, NetworkState, PowerFlowError, PowerFlowOptions, Solver};
use crate::netmodel::{LoadModel, Network};
use crate::scenario::{ProfileMapping, ProfileSet, ScenarioSample};

/// Largest per-phase current magnitude (A) at every device over all profile
/// hours, with each DER held at the minimum of its profile. Results are in
/// network device order.
pub fn max_load_currents(
    net: &Network,
    profiles: &ProfileSet,
    mapping: &ProfileMapping,
    options: &PowerFlowOptions,
) -> Result<Vec<[f64; 3]>, PowerFlowError> {
    let model = NetworkModel::new(net)?;
    let state = NetworkState::default();
    let der_min: Vec<f64> = net
        .ders
        .iter()
        .map(|d| profiles.min_scale(mapping.der_series(&d.id, d.kind)).unwrap_or(1.0))
        .collect();
    let device_lines: Vec<(usize, bool)> = net
        .devices
        .iter()
        .map(|d| {
            let li = net.line_index(&d.line).ok_or_else(|| PowerFlowError::UnknownLine(d.line.clone()))?;
            Ok((li, d.terminal == 2))
        })
        .collect::<Result<_, PowerFlowError>>()?;
    let linear_loads = net.loads.iter().any(|l| l.model == LoadModel::ConstantZ);
    let scenario_at = |hour: usize| {
        let mut s = profiles.sample_at(hour, net, mapping);
        s.der_scale.clone_from(&der_min);
        s
    };
    // without constant-Z loads the matrix does not depend on the hour
    let mut base = if linear_loads {
        None
    } else {
        let nominal = ScenarioSample { der_scale: der_min.clone(), ..ScenarioSample::nominal(net) };
        let solver = Solver::new(net, model.assemble(net, &nominal, &state, LoadTreatment::Normal)?)?;
        let slots = solver.system.loads.clone();
        Some((solver, slots))
    };
    let mut out = vec![[0.0f64; 3]; net.devices.len()];
    let mut warm: Option<Vec<num_complex::Complex64>> = None;
    for hour in 0..profiles.hours() {
        let scenario = scenario_at(hour);
        let at_hour = |e: PowerFlowError| PowerFlowError::AtHour { hour, source: Box::new(e) };
        let sol = match &mut base {
            Some((solver, base_slots)) => {
                for (slot, base_slot) in solver.system.loads.iter_mut().zip(base_slots.iter()) {
                    slot.s = base_slot.s * scenario.load_scale[slot.element];
                }
                solver.solve(net, warm.as_deref(), options).map_err(at_hour)?
            }
            None => {
                let system = model.assemble(net, &scenario, &state, LoadTreatment::Normal).map_err(at_hour)?;
                Solver::new(net, system).map_err(at_hour)?.solve(net, warm.as_deref(), options).map_err(at_hour)?
            }
        };
        for (d, &(li, at_to)) in device_lines.iter().enumerate() {
            let (from, to) = sol.line_terminal_currents(li);
            let i = if at_to { to } else { from };
            for k in 0..3 {
                out[d][k] = out[d][k].max(i[k].norm());
            }
        }
        warm = Some(sol.voltages);
    }
    Ok(out)
}

/// [`max_load_currents`] for a single device.
pub fn max_load_current(
    net: &Network,
    profiles: &ProfileSet,
    mapping: &ProfileMapping,
    device: &str,
    options: &PowerFlowOptions,
) -> Result<[f64; 3], PowerFlowError> {
    let d = net.device_index(device).ok_or_else(|| PowerFlowError::UnknownDevice(device.to_string()))?;
    Ok(max_load_currents(net, profiles, mapping, options)?[d])
}
