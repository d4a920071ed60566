//! Trust-scored dissemination of sensitive health data in dynamic local
//! networks, plus a deterministic simulator and scenario harness for it.
//!
//! Mobile nodes periodically announce themselves, identify answering
//! neighbors, and keep a health community: the set of nearby health-interested
//! nodes scored by social trust (shared interests plus competence similarity
//! to a reference competence). When a node's monitoring detects a critical
//! event, it sends its sensitive data to the most trusted community member,
//! tailored to that member's competence, and interrupts its own operation.
//!
//! Crate layout follows the subsystems: [`taxonomy`] and [`trust`] hold the
//! scoring primitives, [`protocol`] the per-node state machines, [`simkit`]
//! the mobility models and the event engine, [`metrics`] the evaluation
//! measures, and [`harness`] scenario construction and experiment
//! orchestration (also exposed by the `stealth` binary).

pub mod harness;
pub mod metrics;
pub mod protocol;
pub mod simkit;
pub mod taxonomy;
pub mod trust;
pub mod types;

pub use types::{NodeId, SimTime};
