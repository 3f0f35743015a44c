//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

/// Failure modes of state construction, measurement, enumeration and the
/// run harness. Variants are coarse on purpose: callers match on the kind,
/// the message carries the specifics.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the operation's domain (zero vector, empty set, bad scalar).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Matrix dimensions or subsystem layouts do not line up.
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    /// The requested outcome or conditioning event has probability below the
    /// zero threshold, so no post-measurement state or rate exists.
    #[error("zero-probability outcome: {0}")]
    ZeroProbabilityOutcome(String),

    /// Conditioning was attempted on a pair of projectors that do not commute.
    #[error("non-commuting condition: {0}")]
    NonCommutingCondition(String),

    /// An outcome family is not mutually orthogonal or does not sum to identity.
    #[error("incomplete outcome family: {0}")]
    FamilyIncomplete(String),

    /// A rewind request does not fit the recorded evolution schedule.
    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),

    /// A protocol tree violates its structural contract.
    #[error("malformed protocol: {0}")]
    ProtocolMalformed(String),

    /// A run configuration failed to parse or validate.
    #[error("config error: {0}")]
    ConfigError(String),

    /// A quantity that must be real (or otherwise tightly bounded) drifted
    /// beyond the numeric-integrity tolerance.
    #[error("numeric integrity: {0}")]
    NumericIntegrity(String),

    /// A typed value (density matrix, projector, unitary) failed its
    /// construction invariants.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// Report or table emission failed at the I/O layer.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
