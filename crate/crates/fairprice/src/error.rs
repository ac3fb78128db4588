//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by constructors, solvers, and the simulation drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor argument failed validation.
    #[error("invalid {name}: {reason}")]
    InvalidParam {
        /// Name of the offending parameter.
        name: &'static str,
        /// Human-readable explanation of the constraint that failed.
        reason: String,
    },

    /// A policy was asked to run against a fairness spec or instance shape it
    /// does not support.
    #[error("policy `{policy}` cannot run here: {reason}")]
    IncompatiblePolicy {
        /// Policy identifier as used on the command line.
        policy: &'static str,
        /// Why the combination is rejected.
        reason: String,
    },

    /// The fairness budget admits no feasible price vector on the search grid.
    #[error("no feasible price vector: {0}")]
    Infeasible(String),

    /// An exhaustive search was asked for more work than the guard allows.
    #[error("search too large: {0}")]
    CostGuard(String),

    /// Unknown catalog instance or unparsable instance expression.
    #[error("unknown instance `{0}` (see catalog for built-in names)")]
    UnknownInstance(String),

    /// Unknown policy name.
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    /// One or more sweep-config schema violations, collected so a bad file
    /// is reported in full rather than one key at a time. Every entry names
    /// the offending key or line.
    #[error("config rejected with {} error(s):\n  {}", .0.len(), .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand for [`Error::InvalidParam`].
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
