//! Simulation kit: mobility traces, the radio model, the deterministic
//! discrete-event engine, and run event logs.

mod engine;
mod log;
mod radio;
mod trace;

pub use engine::{run, EmergencySpec, EngineError, RunSpec};
pub use log::{EventLog, LogBody, LogParseError, LogRecord};
pub use radio::{Delivery, RadioModel};
pub use trace::{load_trace, MobilityTrace, SyntheticParams, TraceError};
