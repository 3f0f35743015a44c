//! Simulator for sequences of quantum measurement events in which the
//! selection of outcomes may be biased toward felt experience.
//!
//! The orthodox rule weights each outcome by its Born probability. The
//! biased rule reweights complete event histories by 1 + beta * valence and
//! renormalizes, which leaves every pre-terminal marginal untouched while
//! shifting conditional statistics. The crate provides the state algebra,
//! the measurement calculus, the biased outcome law, exact history
//! enumeration for a family of experiment protocols, and a seeded Monte
//! Carlo harness with machine-readable reports.

pub mod error;
pub mod harness;
pub mod histories;
pub mod linalg;
pub mod measurement;
pub mod policy;
pub mod protocols;
pub mod random;

pub use error::{Error, Result};
pub use harness::config::{PolicyKind, ProtocolParams, ReportFormat, RunConfig};
pub use harness::report::TrialReport;
pub use harness::sim::{run_simulation, sweep_beta};
pub use harness::stats::wilson_interval;
pub use harness::verify::{verify, VerificationReport};
pub use histories::{
    conditional_rate, enumerate_ensemble, no_signaling_gap, sequential_equivalence_distance,
    History, HistoryEnsemble, Predicate,
};
pub use linalg::{
    matrix_trace, tensor_product, ComplexMatrix, DensityMatrix, Direction, Projector,
    SubsystemLayout, UnitaryOp,
};
pub use measurement::{
    born_probability, collapse, conditional_probability, effective_past, family_probabilities,
    MeasurementRecord, OutcomeFamily,
};
pub use policy::{biased_weights, policy_weights, sample_outcome, BiasParameter, ChoicePolicy, Valence};
pub use protocols::{
    avoidance_protocol, detection_protocol, falsification_variant, habituation_protocol,
    priming_protocol, recall_protocol, EventKind, EventNode, PrimingMode, ProtocolSpec,
    ReactionTimeModel,
};
