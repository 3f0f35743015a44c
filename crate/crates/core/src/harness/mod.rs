//! Run configuration, seeded Monte Carlo simulation, report serialization,
//! and the self-check suite that guards every release binary.

pub mod config;
pub mod report;
pub mod sim;
pub mod stats;
pub mod verify;
