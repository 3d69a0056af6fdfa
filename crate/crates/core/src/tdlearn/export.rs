//! CSV output. States are numbered from 1, row by row from the top-left
//! cell.

use std::io::Write;

use super::{ErrorTrace, LearnerState};
use crate::mdp::GridWorld;
use crate::Result;

/// `state,row,col,value,shadow_value`; the last column is empty without a
/// shadow table.
pub fn write_values_csv<W: Write>(out: W, state: &LearnerState, world: &GridWorld) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "row", "col", "value", "shadow_value"])?;
    let plain = state.state_values();
    let shadow = state.shadow_state_values();
    for (s, v) in plain.iter().enumerate() {
        let cell = world.cell(s);
        let sh = shadow.as_ref().map_or(String::new(), |t| t[s].to_string());
        w.write_record([
            (s + 1).to_string(),
            cell.0.to_string(),
            cell.1.to_string(),
            v.to_string(),
            sh,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `iteration,max_error,state,action,value,state_error,bound`.
pub fn write_trace_csv<W: Write>(out: W, trace: &ErrorTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "max_error",
        "state",
        "action",
        "value",
        "state_error",
        "bound",
    ])?;
    for e in trace.entries() {
        w.write_record([
            e.iteration.to_string(),
            format!("{:e}", e.max_error),
            (e.state + 1).to_string(),
            e.action.map_or(String::new(), |a| a.to_string()),
            e.value.to_string(),
            format!("{:e}", e.state_error),
            format!("{:e}", e.bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}
