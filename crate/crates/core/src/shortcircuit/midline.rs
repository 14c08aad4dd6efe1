use super::FaultError;
use crate::netmodel::{Bus, Line, Network};

/// Splits line `line_id` at `position` (fraction of its length from the
/// from-bus) with a new bus. The first segment keeps the original id and
/// index; the second segment is appended. Devices at terminal 2 move to the
/// second segment so every device keeps its physical location.
pub fn insert_midline_bus(net: &Network, line_id: &str, position: f64) -> Result<(Network, String), FaultError> {
    if !(position > 0.0 && position < 1.0) {
        return Err(FaultError::InvalidPosition(position));
    }
    let li = net.line_index(line_id).ok_or_else(|| FaultError::UnknownLocation(line_id.to_string()))?;
    let line = &net.lines[li];
    if line.switchable {
        return Err(FaultError::SwitchableLine(line_id.to_string()));
    }
    let unique = |base: String, taken: &dyn Fn(&str) -> bool| {
        let mut id = base.clone();
        let mut k = 2;
        while taken(&id) {
            id = format!("{base}{k}");
            k += 1;
        }
        id
    };
    let bus_id = unique(format!("{line_id}_fault"), &|s| net.bus_index(s).is_some());
    let seg_id = unique(format!("{line_id}_fault_b"), &|s| net.line_index(s).is_some());
    let base_kv = net.bus(&line.from_bus).map_or(0.0, |b| b.base_kv);

    let mut buses = net.buses.clone();
    buses.push(Bus { id: bus_id.clone(), phases: line.phases, base_kv });
    let mut lines = net.lines.clone();
    lines[li] = Line { to_bus: bus_id.clone(), length_km: line.length_km * position, ..line.clone() };
    lines.push(Line {
        id: seg_id.clone(),
        from_bus: bus_id.clone(),
        length_km: line.length_km * (1.0 - position),
        ..line.clone()
    });
    let mut devices = net.devices.clone();
    for d in devices.iter_mut().filter(|d| d.line == line_id && d.terminal == 2) {
        d.line = seg_id.clone();
    }
    let split = Network::from_parts(
        net.name.clone(),
        buses,
        net.linecodes.clone(),
        lines,
        net.transformers.clone(),
        net.loads.clone(),
        net.ders.clone(),
        net.capacitors.clone(),
        net.source.clone(),
        devices,
    );
    Ok((split, bus_id))
}
