use thiserror::Error;

use crate::synthesis::SynthesisStats;

/// Violations of the model invariants, reported with the offending location.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{at}: unknown {kind} `{name}`")]
    UnknownIdentifier {
        kind: &'static str,
        name: String,
        at: String,
    },
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("model declares no {kind}s")]
    Empty { kind: &'static str },
    #[error("{at}: distribution missing")]
    MissingDistribution { at: String },
    #[error("{at}: entries sum to {sum}, expected 1")]
    BadSum { at: String, sum: String },
    #[error("{at}: entry {value} outside [0, 1]")]
    OutOfRange { at: String, value: String },
    #[error("state `{state}` has no available action")]
    NoActionAvailable { state: String },
    #[error("{at}: {msg}")]
    Invalid { at: String, msg: String },
}

/// Errors raised by a solver session.
#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("solver process error: {0}")]
    Process(String),
    #[error("solver protocol error: {0}")]
    Protocol(String),
    #[error("session is dead after an earlier failure")]
    Dead,
    #[error("pop without matching push")]
    EmptyStack,
    #[error("ill-sorted term: {0}")]
    Sort(String),
    #[error("unsupported by this backend: {0}")]
    Unsupported(String),
    #[error("backends disagree on check #{check}: {primary} vs {oracle}")]
    Disagreement {
        check: u64,
        primary: String,
        oracle: String,
    },
}

/// A solver model that could not be decoded into an exact candidate plan.
#[derive(Debug, Clone, Error)]
#[error("model decode failed at step {step}: {msg}")]
pub struct DecodeError {
    pub step: usize,
    pub msg: String,
}

/// Top-level failure of a synthesis run.
#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("solver returned unknown at horizon {horizon} (start step {start}): {reason}")]
    Unknown {
        horizon: usize,
        start: usize,
        reason: String,
        stats: Box<SynthesisStats>,
    },
    #[error("invalid synthesis input: {0}")]
    Input(String),
}
