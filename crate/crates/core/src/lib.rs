//! Robust estimation of the incremental return on ad spend (iROAS) from
//! randomized paired experiments.
//!
//! The central quantity is the effect ratio θ relating per-pair response
//! deltas to spend deltas through the residuals `ε_i(θ) = y_i − θ·x_i`.
//! Under a fair within-pair randomization the residuals at the true ratio
//! are symmetric about zero, which turns ratio estimation into a location
//! problem solvable by robust, distribution-free methods:
//!
//! * [`estimators`] — the empirical ratio `Σy/Σx` plus sign-test and
//!   signed-rank estimators with test-inversion confidence intervals;
//! * [`trimmed_match`] — the Trimmed Match estimator: roots of the trimmed
//!   mean of the residuals, computed exactly by an `O(n² log n)` crossing
//!   sweep, with studentized trimmed-mean confidence intervals;
//! * [`trim_rate`] — data-driven trim-rate selection by minimizing the
//!   width of an internal 50% confidence interval;
//! * [`paired_data`] — difference formation, tie perturbation, kurtosis
//!   and residual-symmetry diagnostics;
//! * [`ingest`] — CSV readers for paired and geo-level layouts;
//! * [`report`] — serializable per-method estimate reports.
//!
//! Kurtosis uses the non-excess convention throughout (a normal sample
//! gives ≈ 3, not 0).

pub mod error;
pub mod estimators;
pub mod ingest;
pub mod paired_data;
pub mod report;
pub mod signed_rank;
pub mod trim_rate;
pub mod trimmed_match;

pub use error::{Error, Result};
pub use paired_data::PairedDifference;

use serde::{Deserialize, Serialize};

/// A closed interval of effect ratios; endpoints may be ±∞ when the
/// acceptance region is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}
