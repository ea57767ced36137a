//! Error types shared across the library.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Which direction an unbounded minimizer set extends to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnboundedSide {
    Lower,
    Upper,
}

#[derive(Debug, Error)]
pub enum Error {
    /// A spend/response field was NaN or infinite.
    #[error("non-finite value in pair '{pair_id}'")]
    NonFiniteInput { pair_id: String },

    /// A pair id appeared more than once (or, for geo-level rows, did not
    /// resolve to exactly one treatment and one control row).
    #[error("invalid pair grouping for '{pair_id}': {reason}")]
    InvalidPair { pair_id: String, reason: String },

    /// Data carries no usable variation (e.g. all spend deltas identical).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Kurtosis is undefined for a zero-variance sample.
    #[error("kurtosis undefined: sample variance is zero")]
    ZeroVariance,

    /// An operation needs more pairs than the dataset provides.
    #[error("need at least {needed} pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },

    /// The effect ratio is not identified (e.g. sum of spend deltas is zero,
    /// or the test statistic is minimized on an unbounded set in both
    /// directions).
    #[error("effect ratio not identified: {0}")]
    UnidentifiedRatio(String),

    /// The |M|-minimizing set is unbounded on one side, so the midpoint
    /// estimator is not a finite ratio.
    #[error("test-statistic minimizer unbounded on the {side:?} side")]
    UnboundedEstimate { side: UnboundedSide },

    /// Duplicate spend deltas; the crossing sweep requires distinct values.
    #[error("duplicate x values; perturb ties before calling")]
    DuplicateX,

    /// Trim rate infeasible for the sample size.
    #[error("invalid trim spec: n={n}, m={m} leaves no untrimmed pairs")]
    InvalidTrimSpec { n: usize, m: usize },

    /// The trimmed-mean equation has no root. Existence is only guaranteed
    /// when the trimmed sum of sorted spend deltas is nonzero.
    #[error("trimmed-mean equation has no root (trimmed x-sum = {trimmed_x_sum})")]
    NoRoot { trimmed_x_sum: f64 },

    /// The studentized acceptance region is empty.
    #[error("degenerate confidence interval: acceptance region is empty")]
    DegenerateInterval,

    /// Every candidate trim rate produced an unusable interval.
    #[error("trim-rate selection failed: no finite interval width at any feasible trim; inspect the data")]
    SelectionFailed,

    /// Malformed input file.
    #[error("{path}:{line}: {msg}")]
    Schema {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
