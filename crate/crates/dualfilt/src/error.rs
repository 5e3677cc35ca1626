//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by filtering, model evaluation, and the reference oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two multi-indices (or an index and a model) disagree on dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An operation that requires a non-empty index set received an empty one.
    #[error("empty index set")]
    EmptyIndexSet,

    /// A target index is not coordinatewise dominated by the origin.
    #[error("index {target} is not dominated by {origin}")]
    NotDominated { origin: String, target: String },

    /// A model or algorithm parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An observation fails validation against the model.
    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    /// A state-space point lies outside the signal's state space.
    #[error("point outside the state space: {0}")]
    OutOfStateSpace(String),

    /// Death rates coincide within machine tolerance, so the closed-form
    /// transition probabilities are ill-defined.
    #[error("degenerate death rates: {0}")]
    DegenerateRates(String),

    /// Every mixture component assigns zero predictive mass to an observation.
    #[error("observation has zero predictive probability under every component")]
    ImpossibleObservation,

    /// Pruning removed every component.
    #[error("pruning at threshold {0} removed every component")]
    AllComponentsPruned(f64),

    /// Observation times must be non-decreasing along a filter run.
    #[error("non-monotone observation time: {current} after {previous}")]
    NonMonotoneTime { previous: f64, current: f64 },

    /// A numerical guarantee was violated beyond repairable tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// All particle weights vanished.
    #[error("particle filter degenerated at observation {0}: all weights are zero")]
    ParticleDegeneracy(usize),

    /// The dense-matrix oracle refuses state spaces this large.
    #[error("state space too large for the dense oracle: {0} states")]
    StateSpaceTooLarge(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
