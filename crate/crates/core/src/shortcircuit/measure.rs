use num_complex::Complex64;
use serde::Serialize;

use super::FaultSolution;
use crate::netmodel::Network;
use crate::powerflow::{sequence_components, PowerFlowError, PowerFlowSolution, SequenceComponents};

/// Currents below this magnitude (A) leave the apparent impedance undefined.
pub const IMPEDANCE_CURRENT_FLOOR: f64 = 1e-6;

/// Phasors seen by one protective device.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceMeasurement {
    /// Phase voltages at the device bus (V), A/B/C.
    pub voltage: [Complex64; 3],
    /// Phase currents flowing from the device bus into the monitored line (A).
    pub current: [Complex64; 3],
    /// Line-to-neutral base voltage of the device bus (V).
    pub base_ln: f64,
    pub v_seq: SequenceComponents,
    pub i_seq: SequenceComponents,
    /// Per-phase `V/I` (ohm), `None` when the current is below the floor.
    pub impedance: [Option<Complex64>; 3],
}

/// Measurement at device index `device` from any network solution.
pub fn measure_device(net: &Network, sol: &PowerFlowSolution, device: usize) -> DeviceMeasurement {
    let dev = &net.devices[device];
    let li = net.line_index(&dev.line).expect("validated device line");
    let line = &net.lines[li];
    let (bus_id, currents) = {
        let (from, to) = sol.line_terminal_currents(li);
        if dev.terminal == 2 {
            (&line.to_bus, to)
        } else {
            (&line.from_bus, from)
        }
    };
    let bus = net.bus_index(bus_id).expect("validated bus");
    let voltage = sol.bus_voltages(bus);
    let impedance = std::array::from_fn(|k| {
        (currents[k].norm() >= IMPEDANCE_CURRENT_FLOOR).then(|| voltage[k] / currents[k])
    });
    DeviceMeasurement {
        voltage,
        current: currents,
        base_ln: net.buses[bus].base_ln_volts(),
        v_seq: sequence_components(voltage[0], voltage[1], voltage[2]),
        i_seq: sequence_components(currents[0], currents[1], currents[2]),
        impedance,
    }
}

/// Device measurement from a during-fault solution, looked up by device id.
pub fn during_fault_measurements(
    net: &Network,
    sol: &FaultSolution,
    device: &str,
) -> Result<DeviceMeasurement, PowerFlowError> {
    let d = net.device_index(device).ok_or_else(|| PowerFlowError::UnknownDevice(device.to_string()))?;
    Ok(measure_device(net, &sol.solution, d))
}

impl DeviceMeasurement {
    pub fn current_magnitudes(&self) -> [f64; 3] {
        self.current.map(|i| i.norm())
    }

    pub fn voltage_pu(&self) -> [f64; 3] {
        self.voltage.map(|v| v.norm() / self.base_ln)
    }
}
