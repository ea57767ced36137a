//! Baseline effect-ratio estimators: the empirical ratio and the
//! test-inversion estimators built on the binomial sign test and the
//! Wilcoxon signed-rank test.
//!
//! Both test statistics are piecewise constant in θ, so point estimates
//! and confidence intervals are computed exactly by scanning the finite
//! set of θ values where the statistic can change, never by numeric root
//! search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, UnboundedSide};
use crate::paired_data::{midranks_by_abs, PairedDifference};
use crate::signed_rank;
use crate::Interval;

/// Which symmetry statistic drives the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestStatisticKind {
    Sign,
    Rank,
}

/// Empirical effect-ratio estimate `Σy / Σx`.
pub fn empirical_estimate(diffs: &[PairedDifference]) -> Result<f64> {
    let sx: f64 = diffs.iter().map(|d| d.x).sum();
    let sy: f64 = diffs.iter().map(|d| d.y).sum();
    if sx == 0.0 {
        return Err(Error::UnidentifiedRatio(
            "sum of spend deltas is zero".into(),
        ));
    }
    Ok(sy / sx)
}

/// Sign statistic `M(θ) = Σ s_i/2` with `s_i = sgn(ε_i(θ))`.
///
/// Exact zeros contribute 0, keeping the statistic symmetric under
/// residual negation.
pub fn sign_statistic(diffs: &[PairedDifference], theta: f64) -> f64 {
    diffs
        .iter()
        .map(|d| {
            let e = d.residual(theta);
            if e > 0.0 {
                0.5
            } else if e < 0.0 {
                -0.5
            } else {
                0.0
            }
        })
        .sum()
}

/// Signed-rank statistic `Σ sgn(ε_i)·rank(|ε_i|)` with zeros dropped and
/// mid-ranks for tied magnitudes.
pub fn rank_statistic(diffs: &[PairedDifference], theta: f64) -> f64 {
    let nonzero: Vec<f64> = diffs
        .iter()
        .map(|d| d.residual(theta))
        .filter(|e| *e != 0.0)
        .collect();
    let ranks = midranks_by_abs(&nonzero);
    nonzero
        .iter()
        .zip(&ranks)
        .map(|(e, r)| if *e > 0.0 { *r } else { -*r })
        .sum()
}

/// Evaluate either statistic directly.
pub fn statistic(diffs: &[PairedDifference], theta: f64, kind: TestStatisticKind) -> f64 {
    match kind {
        TestStatisticKind::Sign => sign_statistic(diffs, theta),
        TestStatisticKind::Rank => rank_statistic(diffs, theta),
    }
}

/// `(1 − α/2)` quantile of the statistic's null distribution under random
/// pair flips.
pub fn null_quantile(kind: TestStatisticKind, n: usize, alpha: f64) -> f64 {
    match kind {
        TestStatisticKind::Rank => signed_rank::signed_statistic_quantile(n, alpha),
        TestStatisticKind::Sign => {
            // M = W − n/2 with W ~ Binomial(n, 1/2); exact quantile.
            let target = 1.0 - alpha / 2.0;
            let total = 2f64.powi(n as i32);
            let mut pmf = 1.0; // C(n,0)
            let mut cum = pmf;
            let mut k = 0usize;
            while k < n && cum / total < target - 1e-12 {
                pmf = pmf * (n - k) as f64 / (k + 1) as f64;
                cum += pmf;
                k += 1;
            }
            k as f64 - n as f64 / 2.0
        }
    }
}

/// A piecewise-constant function of θ: constant on the open intervals
/// between consecutive breakpoints, with its own value at each breakpoint
/// (where the zero/mid-rank conventions apply).
#[derive(Debug, Clone)]
pub(crate) struct PiecewiseScan {
    pub breakpoints: Vec<f64>,
    /// Values on the `breakpoints.len() + 1` open intervals.
    pub interval_values: Vec<f64>,
    /// Values at each breakpoint.
    pub point_values: Vec<f64>,
}

impl PiecewiseScan {
    /// Pieces in θ order: (value, kind). Even entries are intervals,
    /// odd entries are breakpoints.
    fn n_pieces(&self) -> usize {
        2 * self.breakpoints.len() + 1
    }

    fn piece_value(&self, p: usize) -> f64 {
        if p % 2 == 0 {
            self.interval_values[p / 2]
        } else {
            self.point_values[p / 2]
        }
    }

    /// Left θ endpoint of piece p (−∞ for the first interval).
    fn piece_left(&self, p: usize) -> f64 {
        if p == 0 {
            f64::NEG_INFINITY
        } else {
            self.breakpoints[(p - 1) / 2]
        }
    }

    /// Right θ endpoint of piece p (+∞ for the last interval).
    fn piece_right(&self, p: usize) -> f64 {
        if p == self.n_pieces() - 1 {
            f64::INFINITY
        } else {
            self.breakpoints[p / 2]
        }
    }
}

/// One event of a scan under construction: crossing `at`, the statistic
/// jumps by `jump`; `zero_index` marks a residual that vanishes exactly at
/// `at` (used for the zero-drop convention at breakpoints).
struct Event {
    at: f64,
    jump: f64,
    zero_index: Option<usize>,
}

fn build_scan(base: f64, mut events: Vec<Event>, correction: impl Fn(f64, &[Event]) -> f64) -> Option<PiecewiseScan> {
    if events.is_empty() {
        return None;
    }
    events.sort_by(|a, b| a.at.partial_cmp(&b.at).unwrap());
    let mut breakpoints = Vec::new();
    let mut interval_values = vec![base];
    let mut point_values = Vec::new();
    let mut value = base;
    let mut i = 0;
    while i < events.len() {
        let mut j = i;
        while j + 1 < events.len() && events[j + 1].at == events[i].at {
            j += 1;
        }
        let group = &events[i..=j];
        let group_jump: f64 = group.iter().map(|e| e.jump).sum();
        let at = events[i].at;
        let at_point = value + group_jump / 2.0 + correction(at, group);
        value += group_jump;
        breakpoints.push(at);
        point_values.push(at_point);
        interval_values.push(value);
        i = j + 1;
    }
    Some(PiecewiseScan {
        breakpoints,
        interval_values,
        point_values,
    })
}

/// Scan of the sign statistic: changes only at `θ = y_i/x_i` (x_i ≠ 0).
pub(crate) fn sign_scan(diffs: &[PairedDifference]) -> Option<PiecewiseScan> {
    let mut base = 0.0;
    let mut events = Vec::new();
    for d in diffs {
        if d.x > 0.0 {
            base += 0.5;
            events.push(Event {
                at: d.y / d.x,
                jump: -1.0,
                zero_index: None,
            });
        } else if d.x < 0.0 {
            base -= 0.5;
            events.push(Event {
                at: d.y / d.x,
                jump: 1.0,
                zero_index: None,
            });
        } else {
            base += 0.5 * sgn(d.y);
        }
    }
    build_scan(base, events, |_, _| 0.0)
}

/// Scan of the signed-rank statistic.
///
/// Via the Walsh-sum identity `Σ sgn(ε_i)·rank(|ε_i|) = Σ_{i≤j} sgn(ε_i+ε_j)`,
/// the statistic changes only where some pairwise sum changes sign, i.e. at
/// `θ = (y_i+y_j)/(x_i+x_j)` for `i ≤ j` with nonzero x-sum (the diagonal
/// i = j gives the sign-flip points `y_i/x_i`). Order swaps between
/// same-signed residuals permute ranks without changing the sum, so they
/// generate no breakpoints. At a breakpoint itself, residuals that vanish
/// there are excluded from the ranking, which shifts the remaining ranks
/// down; the closed form is `M_drop = M_pratt − z·S` with `z` the number of
/// vanishing residuals and `S` the sign sum of the others.
pub(crate) fn rank_scan(diffs: &[PairedDifference]) -> Option<PiecewiseScan> {
    // Pairs with x = y = 0 have ε ≡ 0 and are always dropped.
    let active: Vec<PairedDifference> = diffs
        .iter()
        .copied()
        .filter(|d| !(d.x == 0.0 && d.y == 0.0))
        .collect();
    let n = active.len();
    let mut base = 0.0;
    let mut events = Vec::new();
    for i in 0..n {
        for j in i..n {
            let sx = active[i].x + active[j].x;
            let sy = active[i].y + active[j].y;
            if sx > 0.0 {
                base += 1.0;
                events.push(Event {
                    at: sy / sx,
                    jump: -2.0,
                    zero_index: (i == j).then_some(i),
                });
            } else if sx < 0.0 {
                base -= 1.0;
                events.push(Event {
                    at: sy / sx,
                    jump: 2.0,
                    zero_index: (i == j).then_some(i),
                });
            } else {
                base += sgn(sy);
            }
        }
    }
    build_scan(base, events, move |at, group| {
        let zeros: Vec<usize> = group.iter().filter_map(|e| e.zero_index).collect();
        if zeros.is_empty() {
            return 0.0;
        }
        let sign_sum: f64 = active
            .iter()
            .enumerate()
            .filter(|(k, _)| !zeros.contains(k))
            .map(|(_, d)| sgn(d.residual(at)))
            .sum();
        -(zeros.len() as f64) * sign_sum
    })
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn scan_for(diffs: &[PairedDifference], kind: TestStatisticKind) -> Result<PiecewiseScan> {
    let scan = match kind {
        TestStatisticKind::Sign => sign_scan(diffs),
        TestStatisticKind::Rank => rank_scan(diffs),
    };
    scan.ok_or_else(|| {
        Error::UnidentifiedRatio("statistic is constant in θ (no nonzero spend deltas)".into())
    })
}

/// Hull of `{θ : |M(θ)| ≤ threshold}` in the interval-first semantic.
///
/// The statistic is constant on the open intervals between breakpoints; a
/// residual that vanishes exactly at a breakpoint is dropped there, which
/// can pull |M| under the threshold at that isolated θ only. Such
/// measure-zero dips are invisible to any evaluation off the exact
/// breakpoint and are not part of the classical inversion, so the hull is
/// taken over the closures of the accepted intervals; accepted
/// breakpoints stand in only when no interval qualifies (degenerate data
/// such as exact proportionality).
fn accepted_hull(scan: &PiecewiseScan, threshold: f64) -> Option<(f64, f64)> {
    let mut lower = None;
    let mut upper = None;
    for p in (0..scan.n_pieces()).step_by(2) {
        if scan.piece_value(p).abs() <= threshold {
            if lower.is_none() {
                lower = Some(scan.piece_left(p));
            }
            upper = Some(scan.piece_right(p));
        }
    }
    if lower.is_none() {
        for p in (1..scan.n_pieces()).step_by(2) {
            if scan.piece_value(p).abs() <= threshold {
                if lower.is_none() {
                    lower = Some(scan.piece_left(p));
                }
                upper = Some(scan.piece_right(p));
            }
        }
    }
    lower.zip(upper)
}

/// Point estimate: midpoint of the smallest and largest θ minimizing |M(θ)|.
pub fn test_based_estimate(diffs: &[PairedDifference], kind: TestStatisticKind) -> Result<f64> {
    if diffs.len() < 2 {
        return Err(Error::TooFewPairs {
            needed: 2,
            got: diffs.len(),
        });
    }
    let scan = scan_for(diffs, kind)?;
    let min_intervals = (0..scan.n_pieces())
        .step_by(2)
        .map(|p| scan.piece_value(p).abs())
        .fold(f64::INFINITY, f64::min);
    let min_points = (1..scan.n_pieces())
        .step_by(2)
        .map(|p| scan.piece_value(p).abs())
        .fold(f64::INFINITY, f64::min);
    // A breakpoint governs only when it is strictly better than every
    // interval (the zero-drop convention at an exact residual root, as
    // with exactly proportional data).
    let min_abs = if min_points < min_intervals - 1e-12 {
        min_points
    } else {
        min_intervals
    };
    let (lo, hi) = accepted_hull(&scan, min_abs).expect("minimum is attained");
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => Ok((lo + hi) / 2.0),
        (false, false) => Err(Error::UnidentifiedRatio(
            "|M| minimized on an unbounded set in both directions".into(),
        )),
        (false, true) => Err(Error::UnboundedEstimate {
            side: UnboundedSide::Lower,
        }),
        (true, false) => Err(Error::UnboundedEstimate {
            side: UnboundedSide::Upper,
        }),
    }
}

/// Minimal interval containing `{θ : |M(θ)| ≤ q_{1−α/2}}`, in the
/// interval-first semantic of [`accepted_hull`].
///
/// Unbounded sides are reported as infinite endpoints.
pub fn test_based_ci(
    diffs: &[PairedDifference],
    kind: TestStatisticKind,
    alpha: f64,
) -> Result<Interval> {
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::InvalidParameter("alpha must be in (0, 1)".into()));
    }
    let scan = scan_for(diffs, kind)?;
    let q = null_quantile(kind, diffs.len(), alpha);
    match accepted_hull(&scan, q + 1e-12) {
        Some((lower, upper)) => Ok(Interval { lower, upper }),
        None => Err(Error::DegenerateInterval),
    }
}
