use thiserror::Error;

use crate::solution::EquilibriumSolution;
use crate::treeplex::ValidationReport;

/// Errors produced by game construction, the solvers and the learning loop.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid treeplex: {0}")]
    InvalidTreeplex(ValidationReport),

    #[error("payoff entry ({row}, {col}) out of range for a {rows}x{cols} payoff matrix")]
    PayoffOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("duplicate payoff coordinate ({row}, {col})")]
    DuplicatePayoff { row: usize, col: usize },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{what} must be strictly positive, found {value} at index {index}")]
    NonPositive {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("behavioral strategy at infoset {infoset} is invalid: {reason}")]
    InvalidBehavioral { infoset: usize, reason: String },

    #[error("sequence {sequence} has zero parent mass")]
    ZeroParentMass { sequence: usize },

    #[error("realization plan is infeasible (constraint residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("{solver} did not converge after {iterations} iterations (achieved {achieved:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        achieved: f64,
        best: Option<Box<EquilibriumSolution>>,
    },

    #[error("{solver} stalled at residual {residual:.3e}: line search could not make progress")]
    Stalled { solver: &'static str, residual: f64 },

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("observed action {action} at infoset {infoset} has zero probability")]
    InfiniteLoss { infoset: usize, action: usize },

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("game too large: {sequences} sequences exceeds the limit of {limit}")]
    SizeOverflow { sequences: u128, limit: u128 },

    #[error("training aborted: {0}")]
    TrainingAborted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
