//! Data-driven trim-rate selection: pick the trim count whose confidence
//! interval at a fixed internal level (α₀ = 0.5 by default) is narrowest.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::paired_data::PairedDifference;
use crate::report::{Diagnostics, EstimateReport, Method};
use crate::trimmed_match::{
    select_root, solve_on, studentized_interval_on, SweepContext, TrimSpec,
};

/// Internal confidence level driving the width comparison.
pub const DEFAULT_ALPHA0: f64 = 0.5;

/// Default cap on the trim-rate search. The selection rule itself never
/// bounds λ; unbounded trimming at small n degenerates toward one-point
/// estimates, so the search stops at this rate unless overridden.
pub const DEFAULT_LAMBDA_MAX: f64 = 0.25;

/// Outcome of the trim-rate search.
#[derive(Debug, Clone, Serialize)]
pub struct TrimRateChoice {
    pub lambda_hat: f64,
    pub m_hat: usize,
    /// (m, CI width) for every candidate; degenerate or unbounded
    /// intervals are recorded as +∞.
    pub ci_width_by_m: Vec<(usize, f64)>,
    pub alpha0: f64,
}

/// Width of the CI at trim count m, or +∞ when the interval is
/// unbounded or degenerate.
fn width_at(ctx: &SweepContext, n: usize, m: usize, alpha0: f64) -> f64 {
    let spec = match TrimSpec::from_m(n, m) {
        Ok(s) => s,
        Err(_) => return f64::INFINITY,
    };
    if spec.kept() < 2 {
        return f64::INFINITY;
    }
    match studentized_interval_on(ctx, &spec, alpha0) {
        Ok(ci) if ci.lower.is_finite() && ci.upper.is_finite() => ci.upper - ci.lower,
        _ => f64::INFINITY,
    }
}

fn select_on(ctx: &SweepContext, n: usize, alpha0: f64, lambda_max: f64) -> Result<TrimRateChoice> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(Error::InvalidParameter("alpha0 must be in (0, 1)".into()));
    }
    if !(0.0..0.5).contains(&lambda_max) {
        return Err(Error::InvalidParameter(
            "lambda_max must be in [0, 0.5)".into(),
        ));
    }
    let m_cap = ((n as f64 * lambda_max).floor() as usize).min((n - 2) / 2);
    let mut table = Vec::with_capacity(m_cap + 1);
    let mut best: Option<(usize, f64)> = None;
    for m in 0..=m_cap {
        let width = width_at(ctx, n, m, alpha0);
        table.push((m, width));
        let better = match best {
            None => width.is_finite(),
            Some((_, w)) => width < w,
        };
        if better {
            best = Some((m, width));
        }
    }
    match best {
        Some((m_hat, _)) => Ok(TrimRateChoice {
            lambda_hat: m_hat as f64 / n as f64,
            m_hat,
            ci_width_by_m: table,
            alpha0,
        }),
        None => Err(Error::SelectionFailed),
    }
}

/// Choose the trim count minimizing the 100(1−α₀)% CI width.
///
/// Every feasible `m ∈ {0, …, min(⌊n·λ_max⌋, ⌊(n−2)/2⌋)}` is evaluated
/// against one shared crossing schedule; ties in width break toward
/// smaller m (least data discarded). The reported rate is `λ̂ = m̂/n`.
pub fn select_trim_rate(
    diffs: &[PairedDifference],
    alpha0: f64,
    lambda_max: f64,
) -> Result<TrimRateChoice> {
    let n = diffs.len();
    if n < 5 {
        return Err(Error::TooFewPairs { needed: 5, got: n });
    }
    let ctx = SweepContext::new(diffs)?;
    select_on(&ctx, n, alpha0, lambda_max)
}

/// Full auto-trim pipeline: select λ̂ at α₀ = 0.5, then report the point
/// estimate and the CI at the caller's confidence level with that trim.
pub fn estimate_with_auto_trim(diffs: &[PairedDifference], alpha: f64) -> Result<EstimateReport> {
    let n = diffs.len();
    if n < 5 {
        return Err(Error::TooFewPairs { needed: 5, got: n });
    }
    let ctx = SweepContext::new(diffs)?;
    let choice = select_on(&ctx, n, DEFAULT_ALPHA0, DEFAULT_LAMBDA_MAX)?;
    let spec = TrimSpec::from_m(n, choice.m_hat)?;
    let est = select_root(solve_on(&ctx, &spec, diffs)?);
    let ci = studentized_interval_on(&ctx, &spec, alpha)?;
    Ok(EstimateReport {
        method: Method::TrimmedMatch,
        point: est.theta,
        ci_lower: ci.lower,
        ci_upper: ci.upper,
        confidence: 1.0 - alpha,
        trim_rate: Some(choice.lambda_hat),
        untrimmed_indices: Some(est.untrimmed),
        diagnostics: Option::<Diagnostics>::None,
    })
}
