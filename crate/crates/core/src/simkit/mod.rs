//! Wind fields, fixed-step integration and the scenario engine.

pub mod integrate;
pub mod scenario;
pub mod trace;
pub mod wind;

pub use integrate::rk4_step;
pub use scenario::{run_scenario, PowerSchedule, SimConfig};
pub use trace::{SimTrace, TraceRow};
pub use wind::{wind_sample, WindField, WindScenario};
