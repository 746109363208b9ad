//! Experiment drivers for the `simplemax` tool.
//!
//! Loads [`scenario`] files, runs the numerics from `simplemax_core` (fanning
//! Monte Carlo blocks over a rayon pool, see [`parallel`]) and writes
//! [`report::RunReport`]s as JSON or CSV. The [`validation`] module holds the
//! fixed experiments behind the acceptance suite.

pub mod commands;
pub mod experiments;
pub mod parallel;
pub mod report;
pub mod scenario;
pub mod validation;

/// Errors surfaced by the tool, each with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Malformed or out-of-range input.
    #[error("schema error: {0}")]
    Schema(String),
    /// A checked property failed (outputs were still written).
    #[error("check failed: {0}")]
    Property(String),
    /// Error from the numerics.
    #[error(transparent)]
    Core(#[from] simplemax_core::Error),
    /// Reading or writing files.
    #[error("io error: {0}")]
    Io(String),
}

impl LabError {
    /// 2 for input errors, 3 for failed checks, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Schema(_) => 2,
            LabError::Property(_) => 3,
            LabError::Core(simplemax_core::Error::EnumerationCap { .. } | simplemax_core::Error::AtomCap { .. }) => 1,
            LabError::Core(_) => 2,
            LabError::Io(_) => 1,
        }
    }
}
