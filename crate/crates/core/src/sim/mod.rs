//! Scenario-driven closed-loop simulation: scenario files, the node state
//! machine, per-frame runs, attenuation sweeps and CSV traces.

mod node;
mod run;
mod scenario;
mod sweep;
mod trace;

pub use node::{node_step, NodeState};
pub use run::{final_tuple, run_scenario, run_scenario_detailed, EpochLog, RunOutput};
pub use scenario::{ChannelScript, ControlMode, Integrator, NoiseConfig, Scenario};
pub use sweep::{is_converged, sweep_attenuation, CONVERGENCE_TOL, CONVERGENCE_WINDOW};
pub use trace::{
    emit_sweep, emit_trace, fmt_float, parse_trace, scheme_name, sweep_to_string,
    trace_to_string, write_sweep, write_trace, SweepRow, TraceRecord, SWEEP_HEADER, TRACE_HEADER,
};
