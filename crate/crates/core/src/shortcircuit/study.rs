use std::io::Write;

use serde::Serialize;

use super::{measure_device, resolve_fault_location, solve_fault, FaultError, FaultOptions, FaultSpec};
use crate::netmodel::Network;
use crate::powerflow::solve_powerflow;
use crate::scenario::ScenarioSample;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultStudyRow {
    pub fault_id: usize,
    pub fault_type: String,
    pub location: String,
    pub zf_ohm: f64,
    /// |If| per phase (A).
    pub fault_current: [f64; 3],
    /// Largest phase current at each device (A), in network device order.
    pub device_current: Vec<f64>,
    /// Smallest phase voltage at each device bus (pu).
    pub device_voltage_pu: Vec<f64>,
}

/// Solves each fault independently from one prefault state.
pub fn fault_study(
    net: &Network,
    scenario: &ScenarioSample,
    faults: &[FaultSpec],
    opts: &FaultOptions,
) -> Result<Vec<FaultStudyRow>, FaultError> {
    let prefault = solve_powerflow(net, scenario, &opts.powerflow)?;
    faults
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let sol = solve_fault(net, scenario, spec, &prefault, opts)?;
            let (work, _) = resolve_fault_location(net, &spec.location)?;
            let ms: Vec<_> = (0..work.devices.len()).map(|d| measure_device(&work, &sol.solution, d)).collect();
            Ok(FaultStudyRow {
                fault_id: k,
                fault_type: spec.fault_type.to_string(),
                location: spec.location.to_string(),
                zf_ohm: spec.impedance_ohm,
                fault_current: sol.fault_current_magnitudes(),
                device_current: ms.iter().map(|m| m.current_magnitudes().into_iter().fold(0.0, f64::max)).collect(),
                device_voltage_pu: ms
                    .iter()
                    .map(|m| {
                        let pu = m.voltage_pu();
                        pu.into_iter().fold(f64::INFINITY, f64::min)
                    })
                    .collect(),
            })
        })
        .collect()
}

pub fn write_fault_study_csv<W: Write>(net: &Network, rows: &[FaultStudyRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> =
        ["fault_id", "type", "location", "zf_ohm", "if_a", "if_b", "if_c"].map(String::from).to_vec();
    for d in &net.devices {
        header.push(format!("{}_i_max_a", d.id));
        header.push(format!("{}_v_min_pu", d.id));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.fault_id.to_string(),
            r.fault_type.clone(),
            r.location.clone(),
            format!("{}", r.zf_ohm),
        ];
        rec.extend(r.fault_current.iter().map(|i| format!("{i:.6}")));
        for (i, v) in r.device_current.iter().zip(&r.device_voltage_pu) {
            rec.push(format!("{i:.6}"));
            rec.push(format!("{v:.6}"));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
