use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::calendar::MonthIndex;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter or configuration value is outside its documented range.
    InvalidParameter { name: &'static str, reason: String },
    /// A simulation was requested with zero periods.
    EmptyPath,
    /// An intersection or filter left no observations.
    EmptySample,
    /// Fewer observations than an operation requires.
    InsufficientData { needed: usize, got: usize },
    /// Input contains NaN or infinity at the given position.
    NonFinite { index: usize },
    /// A second observation for an existing (series, month) key.
    DuplicateKey { series: String, month: MonthIndex },
    /// A date string that is neither `YYYYMM` nor `YYYY-MM`.
    DateParse(String),
    /// Two timelines that should coincide do not.
    TimelineMismatch { months: Vec<MonthIndex> },
    /// The design matrix is rank deficient; the named columns are collinear.
    RankDeficient { columns: Vec<String> },
    /// Cluster-robust covariance needs at least two clusters.
    TooFewClusters { found: usize },
    /// A likelihood evaluation collapsed (zero density, non-finite value).
    Degenerate(String),
    /// No optimizer start converged; carries the best point found.
    EstimationFailed { best: Vec<f64>, objective: f64 },
    /// A documented precondition of the operation does not hold.
    Precondition(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::EmptyPath => write!(f, "simulation length must be positive"),
            Error::EmptySample => write!(f, "sample is empty"),
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need {needed} observations, got {got}")
            }
            Error::NonFinite { index } => write!(f, "non-finite value at position {index}"),
            Error::DuplicateKey { series, month } => {
                write!(f, "duplicate observation for ({series}, {month})")
            }
            Error::DateParse(s) => write!(f, "cannot parse date `{s}` (expected YYYYMM or YYYY-MM)"),
            Error::TimelineMismatch { months } => {
                write!(f, "timelines differ at {} month(s)", months.len())?;
                for (i, m) in months.iter().take(8).enumerate() {
                    write!(f, "{}{m}", if i == 0 { ": " } else { ", " })?;
                }
                Ok(())
            }
            Error::RankDeficient { columns } => {
                write!(f, "design matrix is rank deficient; collinear column(s): ")?;
                for (i, c) in columns.iter().enumerate() {
                    write!(f, "{}{c}", if i == 0 { "" } else { ", " })?;
                }
                Ok(())
            }
            Error::TooFewClusters { found } => {
                write!(f, "cluster-robust covariance needs at least 2 clusters, found {found}")
            }
            Error::Degenerate(msg) => write!(f, "degenerate likelihood: {msg}"),
            Error::EstimationFailed { best, objective } => {
                write!(f, "no optimizer start converged (best objective {objective}, point {best:?})")
            }
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
