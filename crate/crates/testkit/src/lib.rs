//! Brute-force oracles and dataset generators used by the test suites.
//!
//! Everything here recomputes quantities from first principles —
//! re-sorting residuals per interval, dense grid scans — independently of
//! the sweep and closed-form inversion code paths it is used to check.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trimmed_match::PairedDifference;

/// Deterministic RNG for a test stream.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random dataset with distinct x values and mildly heavy-tailed y.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize) -> Vec<PairedDifference> {
    loop {
        let d: Vec<PairedDifference> = (0..n)
            .map(|_| {
                let x = rng.random_range(-3.0..3.0);
                let y = rng.random_range(-5.0..5.0) + x * rng.random_range(-2.0..4.0);
                PairedDifference::new(x, y)
            })
            .collect();
        let mut xs: Vec<f64> = d.iter().map(|p| p.x).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if xs.windows(2).all(|w| (w[1] - w[0]).abs() > 1e-9) {
            return d;
        }
    }
}

/// All roots of the trimmed-mean equation by explicit per-interval search:
/// sort the crossing ratios, re-sort the residuals inside each interval,
/// and solve the linear equation of the fixed untrimmed window.
pub fn trimmed_root_oracle(diffs: &[PairedDifference], m: usize) -> Vec<f64> {
    let n = diffs.len();
    let mut crossings = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if diffs[i].x != diffs[j].x {
                crossings.push((diffs[j].y - diffs[i].y) / (diffs[j].x - diffs[i].x));
            }
        }
    }
    crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    crossings.dedup();
    let span = if crossings.is_empty() {
        1.0
    } else {
        1.0 + crossings[crossings.len() - 1] - crossings[0]
    };

    // interval k spans [bounds[k], bounds[k+1]]
    let mut bounds = vec![f64::NEG_INFINITY];
    bounds.extend(&crossings);
    bounds.push(f64::INFINITY);

    let mut roots: Vec<f64> = Vec::new();
    for k in 0..bounds.len() - 1 {
        let (lo, hi) = (bounds[k], bounds[k + 1]);
        let probe = if lo.is_infinite() {
            hi - span
        } else if hi.is_infinite() {
            lo + span
        } else {
            (lo + hi) / 2.0
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            diffs[a]
                .residual(probe)
                .partial_cmp(&diffs[b].residual(probe))
                .unwrap()
        });
        let window = &order[m..n - m];
        let sy: f64 = window.iter().map(|&i| diffs[i].y).sum();
        let sx: f64 = window.iter().map(|&i| diffs[i].x).sum();
        if sx == 0.0 {
            continue;
        }
        let cand = sy / sx;
        let tol_lo = if lo.is_finite() { 1e-12 * lo.abs().max(1.0) } else { 0.0 };
        let tol_hi = if hi.is_finite() { 1e-12 * hi.abs().max(1.0) } else { 0.0 };
        if cand >= lo - tol_lo && cand <= hi + tol_hi {
            let dup = roots
                .iter()
                .any(|r| (r - cand).abs() <= 1e-9 * cand.abs().max(1.0));
            if !dup {
                roots.push(cand);
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

/// Hull of `{θ on the grid : accept(θ)}`.
pub fn grid_accept_hull(
    lo: f64,
    hi: f64,
    step: f64,
    accept: impl Fn(f64) -> bool,
) -> Option<(f64, f64)> {
    let mut first = None;
    let mut last = None;
    let steps = ((hi - lo) / step).round() as usize;
    for k in 0..=steps {
        let theta = lo + k as f64 * step;
        if accept(theta) {
            if first.is_none() {
                first = Some(theta);
            }
            last = Some(theta);
        }
    }
    first.zip(last)
}

/// Midpoint of the grid argmin set of |f|.
pub fn grid_argmin_midpoint(lo: f64, hi: f64, step: f64, f: impl Fn(f64) -> f64) -> f64 {
    let steps = ((hi - lo) / step).round() as usize;
    let mut best = f64::INFINITY;
    let mut first = 0.0;
    let mut last = 0.0;
    for k in 0..=steps {
        let theta = lo + k as f64 * step;
        let v = f(theta).abs();
        if v < best - 1e-15 {
            best = v;
            first = theta;
            last = theta;
        } else if v <= best + 1e-15 {
            last = theta;
        }
    }
    (first + last) / 2.0
}

/// Compare two sorted root lists with relative tolerance.
pub fn roots_match(a: &[f64], b: &[f64], rel_tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= rel_tol * x.abs().max(1.0))
}
