use std::io::Write;

use super::{NodeKind, PowerFlowSolution};
use crate::netmodel::Network;

/// Writes bus voltage rows `(bus, phase, |V| pu, angle deg)` followed by
/// line current rows `(line, phase, |I| A, angle deg)`, both ends of each line.
pub fn write_solution_csv<W: Write>(net: &Network, sol: &PowerFlowSolution, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "element", "phase", "magnitude", "unit", "angle_deg"])?;
    for n in 0..sol.nodes.len() {
        if let NodeKind::Bus { bus, phase } = sol.nodes.kind(n) {
            let v = sol.voltages[n] / sol.nodes.base_ln(n);
            w.write_record([
                "voltage",
                &net.buses[bus].id,
                &phase.to_string(),
                &format!("{:.9}", v.norm()),
                "pu",
                &format!("{:.6}", v.arg().to_degrees()),
            ])?;
        }
    }
    for (l, lc) in net.lines.iter().zip(&sol.line_currents) {
        let Some(lc) = lc else { continue };
        for (end, currents) in [("from", &lc.from), ("to", &lc.to)] {
            for (p, i) in lc.phases.iter().zip(currents) {
                w.write_record([
                    &format!("current_{end}"),
                    &l.id,
                    &p.to_string(),
                    &format!("{:.6}", i.norm()),
                    "A",
                    &format!("{:.6}", i.arg().to_degrees()),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
