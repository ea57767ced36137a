//! The Trimmed Match estimator.
//!
//! Point estimation solves the trimmed-mean residual equation
//! `ε̄_{nλ}(θ) = 0` exactly with an `O(n² log n)` sweep over the pairwise
//! crossing ratios at which the residual ordering changes, breaking ties
//! between multiple roots with the symmetry-deviation statistic. Confidence
//! intervals invert the studentized trimmed mean `|T(θ)| ≤ c`: between
//! consecutive crossings the untrimmed set is fixed, making the condition a
//! quadratic inequality in θ that is solved in closed form per interval.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};
use crate::paired_data::PairedDifference;
use crate::Interval;

/// Relative tolerance for accepting a candidate root on the boundary of
/// its validity interval.
const ROOT_BOUNDARY_TOL: f64 = 1e-12;

/// Trim rate λ together with the per-tail trim count `m = ⌈nλ⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimSpec {
    lambda: f64,
    m: usize,
    n: usize,
}

impl TrimSpec {
    /// Build from a trim rate. `m` is the smallest integer ≥ nλ (with a
    /// snap for values within 1e-9 of an integer, so e.g. n=50, λ=0.10
    /// yields m=5 despite floating-point representation).
    pub fn from_lambda(n: usize, lambda: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&lambda) {
            return Err(Error::InvalidParameter(format!(
                "trim rate must be in [0, 0.5), got {lambda}"
            )));
        }
        let t = n as f64 * lambda;
        let r = t.round();
        let m = if (t - r).abs() < 1e-9 {
            r as usize
        } else {
            t.ceil() as usize
        };
        Self::validate(n, m, lambda)
    }

    /// Build from an explicit per-tail trim count; λ is reported as m/n.
    pub fn from_m(n: usize, m: usize) -> Result<Self> {
        Self::validate(n, m, m as f64 / n as f64)
    }

    fn validate(n: usize, m: usize, lambda: f64) -> Result<Self> {
        if n == 0 || n < 2 * m + 1 {
            return Err(Error::InvalidTrimSpec { n, m });
        }
        Ok(Self { lambda, m, n })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of untrimmed pairs `n − 2m`.
    pub fn kept(&self) -> usize {
        self.n - 2 * self.m
    }

    fn check_len(&self, diffs: &[PairedDifference]) -> Result<()> {
        if diffs.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "trim spec built for n={} but got {} pairs",
                self.n,
                diffs.len()
            )));
        }
        Ok(())
    }
}

/// The ratio at which residuals of pairs `i` and `j` exchange order:
/// `ε_i(θ) < ε_j(θ) ⇔ θ < theta` for `x_i < x_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingPoint {
    /// Index (into the input slice) of the pair with the smaller x.
    pub i: usize,
    /// Index of the pair with the larger x.
    pub j: usize,
    pub theta: f64,
}

/// All `n(n−1)/2` pairwise crossings, sorted by θ.
pub fn candidate_crossings(diffs: &[PairedDifference]) -> Result<Vec<CrossingPoint>> {
    let n = diffs.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            let (i, j) = if diffs[a].x < diffs[b].x {
                (a, b)
            } else if diffs[b].x < diffs[a].x {
                (b, a)
            } else {
                return Err(Error::DuplicateX);
            };
            out.push(CrossingPoint {
                i,
                j,
                theta: (diffs[j].y - diffs[i].y) / (diffs[j].x - diffs[i].x),
            });
        }
    }
    out.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());
    Ok(out)
}

/// Trimmed mean of the residuals at θ: sorts `ε_i(θ)` and averages the
/// entries from m+1 to n−m.
pub fn trimmed_mean_residual(
    diffs: &[PairedDifference],
    theta: f64,
    spec: &TrimSpec,
) -> Result<f64> {
    spec.check_len(diffs)?;
    let mut eps: Vec<f64> = diffs.iter().map(|d| d.residual(theta)).collect();
    eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let kept = &eps[spec.m..spec.n - spec.m];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Symmetry-deviation statistic
/// `D(θ) = (1/(n−2m)) Σ |ε_(i)(θ) + ε_(n−i+1)(θ)|` over the untrimmed range.
pub fn symmetry_deviation(diffs: &[PairedDifference], theta: f64, spec: &TrimSpec) -> Result<f64> {
    spec.check_len(diffs)?;
    let mut eps: Vec<f64> = diffs.iter().map(|d| d.residual(theta)).collect();
    eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (n, m) = (spec.n, spec.m);
    let sum: f64 = (m..n - m).map(|i| (eps[i] + eps[n - 1 - i]).abs()).sum();
    Ok(sum / spec.kept() as f64)
}

/// One root of the trimmed-mean equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Root {
    pub theta: f64,
    /// Symmetry deviation `D(θ)` at this root.
    pub symmetry_deviation: f64,
    /// Original indices of the untrimmed pairs; `theta` equals
    /// `Σ y_i / Σ x_i` over exactly this set.
    pub untrimmed: Vec<usize>,
}

/// All roots of `ε̄_{nλ}(θ) = 0`, sorted by θ.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Root>,
}

impl RootSet {
    pub fn thetas(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.theta).collect()
    }
}

/// Pairs sorted by spend delta together with the sorted crossing schedule.
/// Built once per dataset and reused across trim counts.
pub(crate) struct SweepContext {
    /// x values, ascending.
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Sorted position → original index.
    orig: Vec<usize>,
    /// Crossings (i, j are sorted positions, i < j), ascending in θ.
    crossings: Vec<(f64, u32, u32)>,
}

impl SweepContext {
    pub(crate) fn new(diffs: &[PairedDifference]) -> Result<Self> {
        let n = diffs.len();
        let mut orig: Vec<usize> = (0..n).collect();
        orig.sort_by(|&a, &b| diffs[a].x.partial_cmp(&diffs[b].x).unwrap());
        let xs: Vec<f64> = orig.iter().map(|&k| diffs[k].x).collect();
        let ys: Vec<f64> = orig.iter().map(|&k| diffs[k].y).collect();
        if xs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DuplicateX);
        }
        let mut crossings = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let theta = (ys[j] - ys[i]) / (xs[j] - xs[i]);
                crossings.push((theta, i as u32, j as u32));
            }
        }
        crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(Self {
            xs,
            ys,
            orig,
            crossings,
        })
    }

    fn n(&self) -> usize {
        self.xs.len()
    }

    /// Sum of the x values in the initial (sorted-order) trim window;
    /// nonzero value guarantees at least one root.
    fn trimmed_x_sum(&self, m: usize) -> f64 {
        self.xs[m..self.n() - m].iter().sum()
    }
}

fn candidate_in(cand: f64, lo: f64, hi: f64) -> bool {
    if !cand.is_finite() {
        return false;
    }
    let tol_lo = if lo.is_finite() {
        ROOT_BOUNDARY_TOL * lo.abs().max(1.0)
    } else {
        0.0
    };
    let tol_hi = if hi.is_finite() {
        ROOT_BOUNDARY_TOL * hi.abs().max(1.0)
    } else {
        0.0
    };
    cand >= lo - tol_lo && cand <= hi + tol_hi
}

/// All roots of the trimmed-mean equation via the crossing sweep.
///
/// The sweep walks the sorted crossings maintaining the untrimmed index
/// window and its running sums `a = Σy`, `b = Σx`. Each configuration's
/// candidate `a/b` is a root iff it lies inside the θ interval on which
/// that configuration is in effect; the configuration before the first
/// membership swap is checked as well (closed intervals, with a 1e-12
/// relative boundary tolerance). Accepted roots are recomputed as fresh
/// ratios over the untrimmed set, so the ratio identity holds exactly.
pub fn solve_trimmed_mean_equation(
    diffs: &[PairedDifference],
    spec: &TrimSpec,
) -> Result<RootSet> {
    spec.check_len(diffs)?;
    let ctx = SweepContext::new(diffs)?;
    solve_on(&ctx, spec, diffs)
}

pub(crate) fn solve_on(
    ctx: &SweepContext,
    spec: &TrimSpec,
    diffs: &[PairedDifference],
) -> Result<RootSet> {
    let n = ctx.n();
    let m = spec.m;
    let mut in_window = vec![false; n];
    let mut a = 0.0;
    let mut b = 0.0;
    for i in m..n - m {
        in_window[i] = true;
        a += ctx.ys[i];
        b += ctx.xs[i];
    }

    let mut roots: Vec<Root> = Vec::new();
    let mut from = f64::NEG_INFINITY;

    let close_config =
        |a: f64, b: f64, from: f64, to: f64, in_window: &[bool], roots: &mut Vec<Root>| {
            let cand = a / b;
            let accept = if b != 0.0 {
                candidate_in(cand, from, to)
            } else if a == 0.0 {
                // ε̄ ≡ 0 on the whole configuration interval; report one
                // representative point of the root interval.
                true
            } else {
                false
            };
            if !accept {
                return;
            }
            // Summing in ascending original-index order makes the reported
            // ratio bit-reproducible from the untrimmed list.
            let mut untrimmed: Vec<usize> = (0..n)
                .filter(|&i| in_window[i])
                .map(|i| ctx.orig[i])
                .collect();
            untrimmed.sort_unstable();
            let sy: f64 = untrimmed.iter().map(|&k| diffs[k].y).sum();
            let sx: f64 = untrimmed.iter().map(|&k| diffs[k].x).sum();
            let theta = if sx != 0.0 {
                sy / sx
            } else {
                // degenerate flat configuration: pick a point inside
                if from <= 0.0 && to >= 0.0 {
                    0.0
                } else if from > 0.0 {
                    from
                } else {
                    to
                }
            };
            if let Some(last) = roots.last() {
                if (theta - last.theta).abs() <= 1e-9 * theta.abs().max(1.0) {
                    return; // boundary root already recorded
                }
            }
            roots.push(Root {
                theta,
                symmetry_deviation: 0.0, // filled in below
                untrimmed,
            });
        };

    for &(theta_c, iu, ju) in &ctx.crossings {
        let (i, j) = (iu as usize, ju as usize);
        if in_window[i] != in_window[j] {
            close_config(a, b, from, theta_c, &in_window, &mut roots);
            if in_window[i] {
                a += ctx.ys[j] - ctx.ys[i];
                b += ctx.xs[j] - ctx.xs[i];
            } else {
                a += ctx.ys[i] - ctx.ys[j];
                b += ctx.xs[i] - ctx.xs[j];
            }
            in_window[i] = !in_window[i];
            in_window[j] = !in_window[j];
            from = theta_c;
        }
    }
    close_config(a, b, from, f64::INFINITY, &in_window, &mut roots);

    if roots.is_empty() {
        return Err(Error::NoRoot {
            trimmed_x_sum: ctx.trimmed_x_sum(m),
        });
    }
    for root in &mut roots {
        root.symmetry_deviation = symmetry_deviation(diffs, root.theta, spec)?;
    }
    Ok(RootSet { roots })
}

/// Point estimate with its untrimmed set.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimate {
    pub theta: f64,
    pub symmetry_deviation: f64,
    /// Original indices of the untrimmed pairs.
    pub untrimmed: Vec<usize>,
}

/// Trimmed Match point estimate: the root minimizing the symmetry
/// deviation; near-ties (within 1e-12) go to the smaller |θ|, then the
/// smaller θ.
pub fn point_estimate(diffs: &[PairedDifference], spec: &TrimSpec) -> Result<PointEstimate> {
    let roots = solve_trimmed_mean_equation(diffs, spec)?;
    Ok(select_root(roots))
}

pub(crate) fn select_root(set: RootSet) -> PointEstimate {
    let best = set
        .roots
        .into_iter()
        .min_by(|a, b| {
            let d = a.symmetry_deviation - b.symmetry_deviation;
            if d.abs() >= 1e-12 {
                return d.partial_cmp(&0.0).unwrap();
            }
            (a.theta.abs(), a.theta)
                .partial_cmp(&(b.theta.abs(), b.theta))
                .unwrap()
        })
        .expect("non-empty root set");
    PointEstimate {
        theta: best.theta,
        symmetry_deviation: best.symmetry_deviation,
        untrimmed: best.untrimmed,
    }
}

/// Winsorized mean and variance of the residuals at θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WinsorizedMoments {
    pub mean: f64,
    pub variance: f64,
    /// True when a slightly negative variance was clamped to zero.
    pub clamped: bool,
}

/// Winsorized moments per the studentized trimmed-mean construction:
/// `w̄ = [m·ε_(m+1) + Σ_{m+1}^{n−m} ε_(i) + m·ε_(n−m)]/n` and
/// `σ̂² = [m·ε²_(m+1) + Σ ε²_(i) + m·ε²_(n−m) − n·w̄²]/(n−2m)`.
pub fn winsorized_moments(
    diffs: &[PairedDifference],
    theta: f64,
    spec: &TrimSpec,
) -> Result<WinsorizedMoments> {
    spec.check_len(diffs)?;
    let mut eps: Vec<f64> = diffs.iter().map(|d| d.residual(theta)).collect();
    eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(winsorized_from_sorted(&eps, spec.m))
}

pub(crate) fn winsorized_from_sorted(eps: &[f64], m: usize) -> WinsorizedMoments {
    let n = eps.len();
    let mf = m as f64;
    let lo = eps[m];
    let hi = eps[n - 1 - m];
    let kept = &eps[m..n - m];
    let sum: f64 = kept.iter().sum();
    let sumsq: f64 = kept.iter().map(|e| e * e).sum();
    let mean = (mf * (lo + hi) + sum) / n as f64;
    let raw = (mf * (lo * lo + hi * hi) + sumsq - n as f64 * mean * mean) / kept.len() as f64;
    let clamped = raw < 0.0;
    WinsorizedMoments {
        mean,
        variance: raw.max(0.0),
        clamped,
    }
}

/// Studentized trimmed mean `T(θ) = ε̄(θ) / (σ̂(θ)/√(n−2m−1))`.
///
/// When σ̂ = 0: returns 0 if ε̄ = 0, otherwise ±∞ with the sign of ε̄.
pub fn studentized_statistic(
    diffs: &[PairedDifference],
    theta: f64,
    spec: &TrimSpec,
) -> Result<f64> {
    spec.check_len(diffs)?;
    if spec.kept() < 2 {
        return Err(Error::InvalidParameter(
            "studentization needs n − 2m − 1 ≥ 1".into(),
        ));
    }
    let mut eps: Vec<f64> = diffs.iter().map(|d| d.residual(theta)).collect();
    eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(studentized_from_sorted(&eps, spec.m))
}

pub(crate) fn studentized_from_sorted(eps: &[f64], m: usize) -> f64 {
    let n = eps.len();
    let kept = &eps[m..n - m];
    let trimmed_mean = kept.iter().sum::<f64>() / kept.len() as f64;
    let mom = winsorized_from_sorted(eps, m);
    let df = (kept.len() - 1) as f64;
    let sigma = mom.variance.sqrt();
    if sigma == 0.0 {
        if trimmed_mean == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(trimmed_mean)
        }
    } else {
        trimmed_mean / (sigma / df.sqrt())
    }
}

/// How the acceptance threshold c for `|T(θ)| ≤ c` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CiThreshold {
    /// `(1 − α/2)` quantile of Student's t with n−2m−1 degrees of freedom.
    StudentT,
    /// Randomization threshold: residuals at the point estimate are
    /// sign-flipped `resamples` times and c is the (1 − α) quantile of the
    /// resampled |T| values.
    Randomization { resamples: usize, seed: u64 },
}

/// Trimmed Match confidence interval with the default t threshold.
pub fn confidence_interval(
    diffs: &[PairedDifference],
    spec: &TrimSpec,
    alpha: f64,
) -> Result<Interval> {
    confidence_interval_with(diffs, spec, alpha, CiThreshold::StudentT)
}

/// Point estimate and t-threshold interval from one shared crossing
/// schedule.
pub fn estimate_with_interval(
    diffs: &[PairedDifference],
    spec: &TrimSpec,
    alpha: f64,
) -> Result<(PointEstimate, Interval)> {
    spec.check_len(diffs)?;
    let ctx = SweepContext::new(diffs)?;
    let est = select_root(solve_on(&ctx, spec, diffs)?);
    let ci = studentized_interval_on(&ctx, spec, alpha)?;
    Ok((est, ci))
}

/// Trimmed Match confidence interval with an explicit threshold rule.
pub fn confidence_interval_with(
    diffs: &[PairedDifference],
    spec: &TrimSpec,
    alpha: f64,
    threshold: CiThreshold,
) -> Result<Interval> {
    spec.check_len(diffs)?;
    let ctx = SweepContext::new(diffs)?;
    let c = threshold_value(diffs, spec, alpha, threshold, &ctx)?;
    invert_studentized(&ctx, spec, c)
}

/// t-threshold interval on a prebuilt crossing schedule; the schedule does
/// not depend on the trim count, so callers evaluating many trims reuse it.
pub(crate) fn studentized_interval_on(
    ctx: &SweepContext,
    spec: &TrimSpec,
    alpha: f64,
) -> Result<Interval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must be in (0, 1)".into()));
    }
    if spec.kept() < 2 {
        return Err(Error::InvalidParameter(
            "confidence interval needs n − 2m − 1 ≥ 1".into(),
        ));
    }
    let df = (spec.kept() - 1) as f64;
    let t = statrs::distribution::StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    invert_studentized(ctx, spec, t.inverse_cdf(1.0 - alpha / 2.0))
}

fn threshold_value(
    diffs: &[PairedDifference],
    spec: &TrimSpec,
    alpha: f64,
    threshold: CiThreshold,
    ctx: &SweepContext,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must be in (0, 1)".into()));
    }
    if spec.kept() < 2 {
        return Err(Error::InvalidParameter(
            "confidence interval needs n − 2m − 1 ≥ 1".into(),
        ));
    }
    match threshold {
        CiThreshold::StudentT => {
            let df = (spec.kept() - 1) as f64;
            let t = statrs::distribution::StudentsT::new(0.0, 1.0, df)
                .expect("valid t distribution");
            Ok(t.inverse_cdf(1.0 - alpha / 2.0))
        }
        CiThreshold::Randomization { resamples, seed } => {
            if resamples == 0 {
                return Err(Error::InvalidParameter("resamples must be ≥ 1".into()));
            }
            let point = select_root(solve_on(ctx, spec, diffs)?);
            let eps: Vec<f64> = diffs.iter().map(|d| d.residual(point.theta)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut stats = Vec::with_capacity(resamples);
            let mut flipped = vec![0.0; eps.len()];
            for _ in 0..resamples {
                for (dst, &e) in flipped.iter_mut().zip(&eps) {
                    *dst = if rng.random::<bool>() { e } else { -e };
                }
                flipped.sort_by(|a, b| a.partial_cmp(b).unwrap());
                stats.push(studentized_from_sorted(&flipped, spec.m).abs());
            }
            stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let k = ((1.0 - alpha) * resamples as f64).ceil() as usize;
            Ok(stats[k.clamp(1, resamples) - 1])
        }
    }
}

/// Hull accumulator for the acceptance set, with per-piece clipping.
#[derive(Default)]
struct Hull {
    range: Option<(f64, f64)>,
}

impl Hull {
    /// Intersect the solution range with the piece [lo_t, hi_t] and absorb.
    fn add_clipped(&mut self, lo_t: f64, hi_t: f64, sol_lo: f64, sol_hi: f64) {
        let lo = sol_lo.max(lo_t);
        let hi = sol_hi.min(hi_t);
        if lo <= hi {
            self.range = Some(match self.range {
                None => (lo, hi),
                Some((l, h)) => (l.min(lo), h.max(hi)),
            });
        }
    }
}

/// Running state of the studentized inversion on one ordering interval.
struct PieceSums {
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

/// Exact inversion of `|T(θ)| ≤ c`.
///
/// Walks the crossing schedule maintaining the residual ordering and the
/// window sums; on each inter-crossing interval the trimmed mean is affine
/// and the winsorized variance quadratic in θ, so the acceptance condition
/// reduces to `Aθ² + Bθ + C ≤ 0`, solved in closed form and intersected
/// with the interval. Returns the hull of the acceptance set.
fn invert_studentized(ctx: &SweepContext, spec: &TrimSpec, c: f64) -> Result<Interval> {
    let n = ctx.n();
    let m = spec.m;
    let n2m = spec.kept() as f64;
    let df = n2m - 1.0;
    let c2 = c * c;

    // position p holds sorted-x index ord[p]; below every crossing the
    // residual order equals the x order.
    let mut ord: Vec<u32> = (0..n as u32).collect();
    let mut pos: Vec<u32> = (0..n as u32).collect();

    let mut sums = PieceSums {
        sx: 0.0,
        sy: 0.0,
        sxx: 0.0,
        sxy: 0.0,
        syy: 0.0,
    };
    for p in m..n - m {
        let k = ord[p] as usize;
        let (x, y) = (ctx.xs[k], ctx.ys[k]);
        sums.sx += x;
        sums.sy += y;
        sums.sxx += x * x;
        sums.sxy += x * y;
        sums.syy += y * y;
    }

    let mut hull = Hull::default();
    let solve_piece = |lo_t: f64, hi_t: f64, ord: &[u32], s: &PieceSums, hull: &mut Hull| {
        let mf = m as f64;
        let lo_i = ord[m] as usize;
        let hi_i = ord[n - m - 1] as usize;
        let (xl, yl) = (ctx.xs[lo_i], ctx.ys[lo_i]);
        let (xh, yh) = (ctx.xs[hi_i], ctx.ys[hi_i]);
        let wx = mf * (xl + xh) + s.sx;
        let wy = mf * (yl + yh) + s.sy;
        let qxx = mf * (xl * xl + xh * xh) + s.sxx;
        let qxy = mf * (xl * yl + xh * yh) + s.sxy;
        let qyy = mf * (yl * yl + yh * yh) + s.syy;
        let nf = n as f64;
        let vxx = qxx - wx * wx / nf;
        let vxy = qxy - wx * wy / nf;
        let vyy = qyy - wy * wy / nf;

        let a = df * s.sx * s.sx - c2 * n2m * vxx;
        let b = -2.0 * df * s.sx * s.sy + 2.0 * c2 * n2m * vxy;
        let cc = df * s.sy * s.sy - c2 * n2m * vyy;

        let scale_a = df * s.sx * s.sx + c2 * n2m * vxx.abs();
        if a.abs() <= 1e-12 * scale_a.max(f64::MIN_POSITIVE) {
            // winsorized variance θ-independent here: affine inequality
            let scale_b = 2.0 * df * (s.sx * s.sy).abs() + 2.0 * c2 * n2m * vxy.abs();
            if b.abs() <= 1e-12 * scale_b.max(f64::MIN_POSITIVE) {
                if cc <= 0.0 {
                    hull.add_clipped(lo_t, hi_t, f64::NEG_INFINITY, f64::INFINITY);
                }
            } else {
                let r = -cc / b;
                if b > 0.0 {
                    hull.add_clipped(lo_t, hi_t, f64::NEG_INFINITY, r);
                } else {
                    hull.add_clipped(lo_t, hi_t, r, f64::INFINITY);
                }
            }
            return;
        }

        let disc = b * b - 4.0 * a * cc;
        if disc < 0.0 {
            if a < 0.0 {
                hull.add_clipped(lo_t, hi_t, f64::NEG_INFINITY, f64::INFINITY);
            }
            return;
        }
        let sq = disc.sqrt();
        let q = -0.5 * (b + sq.copysign(if b == 0.0 { 1.0 } else { b }));
        let (mut r1, mut r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, cc / q) };
        if r1 > r2 {
            std::mem::swap(&mut r1, &mut r2);
        }
        if a > 0.0 {
            hull.add_clipped(lo_t, hi_t, r1, r2);
        } else {
            hull.add_clipped(lo_t, hi_t, f64::NEG_INFINITY, r1);
            hull.add_clipped(lo_t, hi_t, r2, f64::INFINITY);
        }
    };

    let mut prev_t = f64::NEG_INFINITY;
    for &(theta_c, iu, ju) in &ctx.crossings {
        let (i, j) = (iu as usize, ju as usize);
        solve_piece(prev_t, theta_c, &ord, &sums, &mut hull);
        let (pi, pj) = (pos[i] as usize, pos[j] as usize);
        let i_in = (m..n - m).contains(&pi);
        let j_in = (m..n - m).contains(&pj);
        if i_in != j_in {
            let (leave, enter) = if i_in { (i, j) } else { (j, i) };
            let (xo, yo) = (ctx.xs[leave], ctx.ys[leave]);
            let (xi, yi) = (ctx.xs[enter], ctx.ys[enter]);
            sums.sx += xi - xo;
            sums.sy += yi - yo;
            sums.sxx += xi * xi - xo * xo;
            sums.sxy += xi * yi - xo * yo;
            sums.syy += yi * yi - yo * yo;
        }
        ord.swap(pi, pj);
        pos.swap(i, j);
        prev_t = theta_c;
    }
    solve_piece(prev_t, f64::INFINITY, &ord, &sums, &mut hull);

    match hull.range {
        Some((lower, upper)) => Ok(Interval { lower, upper }),
        None => Err(Error::DegenerateInterval),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::empirical_estimate;
    use rand::Rng;

    fn diffs(pairs: &[(f64, f64)]) -> Vec<PairedDifference> {
        pairs.iter().map(|&(x, y)| PairedDifference::new(x, y)).collect()
    }

    #[test]
    fn trim_spec_rounding() {
        let s = TrimSpec::from_lambda(50, 0.10).unwrap();
        assert_eq!(s.m(), 5);
        let s = TrimSpec::from_lambda(10, 0.11).unwrap();
        assert_eq!(s.m(), 2); // ceil(1.1)
        assert!(TrimSpec::from_lambda(3, 0.4).is_err()); // m=2, n−2m<1
        assert!(TrimSpec::from_m(5, 2).is_ok()); // n−2m = 1
        assert!(TrimSpec::from_m(4, 2).is_err());
    }

    #[test]
    fn crossings_examples() {
        let d = diffs(&[(0.0, 0.0), (1.0, 3.0)]);
        let c = candidate_crossings(&d).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].theta, 3.0);
        assert_eq!((c[0].i, c[0].j), (0, 1));
        // ordering flip law around the crossing
        assert!(d[0].residual(2.0) < d[1].residual(2.0));
        assert!(d[0].residual(4.0) > d[1].residual(4.0));

        let d = diffs(&[(1.0, 2.0), (3.0, 10.0)]);
        assert_eq!(candidate_crossings(&d).unwrap()[0].theta, 4.0);

        let d = diffs(&[(1.0, 2.0), (1.0, 5.0)]);
        assert!(matches!(candidate_crossings(&d), Err(Error::DuplicateX)));
    }

    #[test]
    fn trimmed_mean_residual_examples() {
        let d = diffs(&[(1.0, 1.0), (2.0, 6.0), (3.0, 3.0)]);
        let spec0 = TrimSpec::from_m(3, 0).unwrap();
        let all = trimmed_mean_residual(&d, 1.0, &spec0).unwrap();
        assert!((all - (0.0 + 4.0 + 0.0) / 3.0).abs() < 1e-15);
        let spec1 = TrimSpec::from_m(3, 1).unwrap();
        // ε(θ=2): (−1, 2, −3) sorted (−3, −1, 2): median −1
        assert!((trimmed_mean_residual(&d, 2.0, &spec1).unwrap() + 1.0).abs() < 1e-15);
        // median of three: ε = y at θ = 0
        let d = diffs(&[(0.0, -5.0), (0.0, 0.0), (0.0, 7.0)]);
        assert_eq!(trimmed_mean_residual(&d, 0.0, &spec1).unwrap(), 0.0);
    }

    #[test]
    fn crossings_satisfy_ordering_flip_law() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let d: Vec<PairedDifference> = (0..6)
                .map(|_| {
                    PairedDifference::new(
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-4.0..4.0),
                    )
                })
                .collect();
            let Ok(crossings) = candidate_crossings(&d) else {
                continue;
            };
            assert_eq!(crossings.len(), 15);
            for c in &crossings {
                assert!(d[c.i].x < d[c.j].x);
                let below = c.theta - 1e-6;
                let above = c.theta + 1e-6;
                assert!(d[c.i].residual(below) < d[c.j].residual(below), "below {c:?}");
                assert!(d[c.i].residual(above) > d[c.j].residual(above), "above {c:?}");
            }
            for w in crossings.windows(2) {
                assert!(w[0].theta <= w[1].theta);
            }
        }
    }

    #[test]
    fn studentized_matches_direct_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(88);
        for _ in 0..20 {
            let n = 8;
            let d: Vec<PairedDifference> = (0..n)
                .map(|_| {
                    PairedDifference::new(
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-4.0..4.0),
                    )
                })
                .collect();
            let theta = rng.random_range(-3.0..3.0);
            for m in [1usize, 2] {
                let spec = TrimSpec::from_m(n, m).unwrap();
                let got = studentized_statistic(&d, theta, &spec).unwrap();
                // direct evaluation of the definition
                let mut eps: Vec<f64> = d.iter().map(|p| p.y - theta * p.x).collect();
                eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let kept = &eps[m..n - m];
                let tm: f64 = kept.iter().sum::<f64>() / kept.len() as f64;
                let wbar = (m as f64 * (eps[m] + eps[n - 1 - m])
                    + kept.iter().sum::<f64>())
                    / n as f64;
                let var = (m as f64 * (eps[m].powi(2) + eps[n - 1 - m].powi(2))
                    + kept.iter().map(|e| e * e).sum::<f64>()
                    - n as f64 * wbar * wbar)
                    / kept.len() as f64;
                let want = tm / (var.sqrt() / ((kept.len() - 1) as f64).sqrt());
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "m={m}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn symmetry_deviation_examples() {
        // ε = y at θ=0
        let d = diffs(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]);
        let spec = TrimSpec::from_m(3, 0).unwrap();
        assert!((symmetry_deviation(&d, 0.0, &spec).unwrap() - 4.0).abs() < 1e-15);
        // antisymmetric untrimmed part → 0
        let d = diffs(&[(0.0, -2.0), (1.0, 2.0)]);
        let spec = TrimSpec::from_m(2, 0).unwrap();
        assert_eq!(symmetry_deviation(&d, 0.0, &spec).unwrap(), 0.0);
        // invariant under negating all residuals
        let d1 = diffs(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]);
        let d2 = diffs(&[(0.0, -1.0), (-1.0, -2.0), (-2.0, -3.0)]);
        let spec = TrimSpec::from_m(3, 1).unwrap();
        assert_eq!(
            symmetry_deviation(&d1, 0.0, &spec).unwrap(),
            symmetry_deviation(&d2, 0.0, &spec).unwrap()
        );
    }

    #[test]
    fn untrimmed_root_is_empirical_ratio() {
        let d = diffs(&[(1.0, 3.0), (2.5, 4.0), (4.0, -1.0), (0.5, 2.0)]);
        let spec = TrimSpec::from_m(4, 0).unwrap();
        let roots = solve_trimmed_mean_equation(&d, &spec).unwrap();
        assert_eq!(roots.roots.len(), 1);
        let emp = empirical_estimate(&d).unwrap();
        assert!((roots.roots[0].theta - emp).abs() <= 1e-12 * emp.abs().max(1.0));
    }

    #[test]
    fn hand_example_single_root_on_boundary() {
        let d = diffs(&[(1.0, 1.0), (2.0, 6.0), (3.0, 3.0)]);
        let spec = TrimSpec::from_m(3, 1).unwrap();
        let roots = solve_trimmed_mean_equation(&d, &spec).unwrap();
        assert_eq!(roots.thetas(), vec![1.0]);
        let est = point_estimate(&d, &spec).unwrap();
        assert_eq!(est.theta, 1.0);
        // ratio identity over the untrimmed set
        let sy: f64 = est.untrimmed.iter().map(|&i| d[i].y).sum();
        let sx: f64 = est.untrimmed.iter().map(|&i| d[i].x).sum();
        assert_eq!(est.theta, sy / sx);
    }

    #[test]
    fn linear_data_with_outlier_recovers_slope() {
        let mut d: Vec<PairedDifference> = (1..=7)
            .map(|i| PairedDifference::new(i as f64, 3.0 * i as f64))
            .collect();
        d.push(PairedDifference::new(8.0, 200.0));
        let spec = TrimSpec::from_m(8, 1).unwrap();
        let est = point_estimate(&d, &spec).unwrap();
        assert_eq!(est.theta, 3.0);
        assert!(!est.untrimmed.contains(&7)); // outlier trimmed
    }

    #[test]
    fn winsorized_moments_hand_values() {
        // m = 0: ε = (−1, 0, 1) → mean 0, variance 2/3
        let d = diffs(&[(0.0, -1.0), (0.0, 0.0), (0.0, 1.0)]);
        let spec = TrimSpec::from_m(3, 0).unwrap();
        let mom = winsorized_moments(&d, 0.0, &spec).unwrap();
        assert_eq!(mom.mean, 0.0);
        assert!((mom.variance - 2.0 / 3.0).abs() < 1e-15);

        // m = 1: ε = (−10, −1, 0, 1, 10) → w̄ = 0, σ̂² = 4/3
        let d = diffs(&[
            (0.0, -10.0),
            (0.0, -1.0),
            (0.0, 0.0),
            (0.0, 1.0),
            (0.0, 10.0),
        ]);
        let spec = TrimSpec::from_m(5, 1).unwrap();
        let mom = winsorized_moments(&d, 0.0, &spec).unwrap();
        assert_eq!(mom.mean, 0.0);
        assert!((mom.variance - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn winsorized_translation_invariance() {
        let base = [-3.0_f64, -0.5, 0.2, 1.4, 9.0, -1.1, 0.3];
        let c = 2.75;
        let d0 = diffs(&base.iter().map(|&y| (0.0, y)).collect::<Vec<_>>());
        let d1 = diffs(&base.iter().map(|&y| (0.0, y + c)).collect::<Vec<_>>());
        let spec = TrimSpec::from_m(7, 2).unwrap();
        let m0 = winsorized_moments(&d0, 0.0, &spec).unwrap();
        let m1 = winsorized_moments(&d1, 0.0, &spec).unwrap();
        assert!((m1.mean - (m0.mean + c)).abs() < 1e-12);
        assert!((m1.variance - m0.variance).abs() < 1e-12);
    }

    #[test]
    fn studentized_zero_at_root() {
        let d = diffs(&[(1.0, 1.0), (2.0, 6.0), (3.0, 3.0), (5.0, 4.0), (0.5, 2.0)]);
        let spec = TrimSpec::from_m(5, 1).unwrap();
        let est = point_estimate(&d, &spec).unwrap();
        let t = studentized_statistic(&d, est.theta, &spec).unwrap();
        assert!(t.abs() < 1e-9, "T at root = {t}");
    }

    #[test]
    fn ci_contains_point_and_nests() {
        let d = diffs(&[
            (1.0, 2.2),
            (2.0, 3.8),
            (3.0, 6.5),
            (1.5, 3.2),
            (2.5, 4.4),
            (0.5, 1.3),
            (3.5, 7.6),
            (4.0, 7.4),
        ]);
        let spec = TrimSpec::from_m(8, 1).unwrap();
        let est = point_estimate(&d, &spec).unwrap();
        let narrow = confidence_interval(&d, &spec, 0.5).unwrap();
        let wide = confidence_interval(&d, &spec, 0.1).unwrap();
        assert!(narrow.lower <= est.theta && est.theta <= narrow.upper);
        assert!(wide.lower <= narrow.lower && narrow.upper <= wide.upper);
    }

    #[test]
    fn randomization_threshold_is_deterministic() {
        let d = diffs(&[
            (1.0, 2.2),
            (2.0, 3.8),
            (3.0, 6.5),
            (1.5, 3.2),
            (2.5, 4.4),
            (0.5, 1.3),
            (3.5, 7.6),
            (4.0, 7.4),
        ]);
        let spec = TrimSpec::from_m(8, 1).unwrap();
        let t = CiThreshold::Randomization {
            resamples: 2000,
            seed: 9,
        };
        let a = confidence_interval_with(&d, &spec, 0.1, t).unwrap();
        let b = confidence_interval_with(&d, &spec, 0.1, t).unwrap();
        assert_eq!(a, b);
        assert!(a.lower < a.upper);
    }

    #[test]
    fn global_flip_preserves_roots() {
        let d = diffs(&[(1.0, 2.2), (2.0, 3.8), (3.0, 6.5), (1.5, 3.2), (2.5, 4.4)]);
        let flipped: Vec<PairedDifference> =
            d.iter().map(|p| PairedDifference::new(-p.x, -p.y)).collect();
        let spec = TrimSpec::from_m(5, 1).unwrap();
        let r0 = solve_trimmed_mean_equation(&d, &spec).unwrap();
        let r1 = solve_trimmed_mean_equation(&flipped, &spec).unwrap();
        assert_eq!(r0.thetas().len(), r1.thetas().len());
        for (a, b) in r0.thetas().iter().zip(r1.thetas()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
        assert_eq!(
            select_root(r0).theta,
            select_root(r1).theta
        );
    }
}
