use core::fmt;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong in the numeric layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A probability (report, bias, weight) fell outside its allowed range.
    OutOfRange {
        /// Which quantity was rejected.
        what: &'static str,
        /// The offending value.
        value: f64,
    },
    /// Two vectors that must have equal length did not.
    DimensionMismatch {
        /// Expected length.
        expected: usize,
        /// Length actually supplied.
        found: usize,
    },
    /// An operation needing at least one report vector got none.
    NoReports,
    /// Weights were non-positive or did not sum to one.
    InvalidWeights {
        /// Sum of the supplied weights.
        sum: f64,
    },
    /// A scalar parameter violated its precondition.
    InvalidParameter {
        /// Parameter name.
        name: &'static str,
        /// Supplied value.
        value: f64,
        /// Human readable requirement.
        requirement: &'static str,
    },
    /// Exhaustive enumeration would exceed the configured cap; use Monte Carlo instead.
    EnumerationCap {
        /// Number of binary choices the enumeration would range over.
        required_bits: u32,
        /// Configured maximum.
        cap: u32,
    },
    /// An exact convolution would exceed the atom cap.
    AtomCap {
        /// Candidate atom count.
        atoms: usize,
        /// Configured maximum.
        cap: usize,
    },
    /// A hypothesis required by a certified bound does not hold.
    ConditionViolated {
        /// Which condition.
        condition: &'static str,
        /// What failed.
        detail: &'static str,
    },
    /// A distribution with zero variance where a positive one is required.
    Degenerate,
    /// A bound's denominator is non-positive, so the bound says nothing.
    VacuousBound {
        /// Which bound.
        bound: &'static str,
    },
    /// Rejection sampling could not find a point inside the unit cube.
    EmptyIntersection,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfRange { what, value } => write!(f, "{what} = {value} is out of range"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NoReports => f.write_str("at least one report vector is required"),
            Error::InvalidWeights { sum } => {
                write!(f, "weights must be positive and sum to 1 (sum = {sum})")
            }
            Error::InvalidParameter { name, value, requirement } => {
                write!(f, "{name} = {value} violates {requirement}")
            }
            Error::EnumerationCap { required_bits, cap } => write!(
                f,
                "exact enumeration needs 2^{required_bits} states (cap 2^{cap}); use the Monte Carlo estimator"
            ),
            Error::AtomCap { atoms, cap } => {
                write!(f, "exact convolution needs {atoms} atoms (cap {cap})")
            }
            Error::ConditionViolated { condition, detail } => {
                write!(f, "{condition} does not hold: {detail}")
            }
            Error::Degenerate => f.write_str("distribution has zero variance"),
            Error::VacuousBound { bound } => write!(f, "{bound} is vacuous for these inputs"),
            Error::EmptyIntersection => f.write_str("ball does not meet the unit cube"),
        }
    }
}

impl core::error::Error for Error {}
