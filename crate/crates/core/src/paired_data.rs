//! Paired-experiment observations, treatment-minus-control differences,
//! residuals, and distributional diagnostics.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signed_rank;

/// Raw observations for one matched pair: spend and response for both
/// units plus the randomized assignment.
///
/// `assignment = +1` means the first unit received treatment; `-1` means
/// the second did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoPairOutcome {
    pub pair_id: String,
    pub spend_first: f64,
    pub response_first: f64,
    pub spend_second: f64,
    pub response_second: f64,
    pub assignment: i8,
}

/// Per-pair treatment-minus-control deltas: `x` for spend, `y` for response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub x: f64,
    pub y: f64,
}

impl PairedDifference {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Residual `y − θ·x`.
    #[inline]
    pub fn residual(&self, theta: f64) -> f64 {
        self.y - theta * self.x
    }
}

/// Residuals of every pair at a fixed ratio θ.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    pub values: Vec<f64>,
    pub theta: f64,
}

/// Form per-pair differences from raw outcomes.
///
/// `x_i = (spend_first − spend_second)·assignment`, and likewise for the
/// responses. Output order matches input order.
pub fn compute_differences(outcomes: &[GeoPairOutcome]) -> Result<Vec<PairedDifference>> {
    outcomes
        .iter()
        .map(|o| {
            if o.assignment != 1 && o.assignment != -1 {
                return Err(Error::InvalidPair {
                    pair_id: o.pair_id.clone(),
                    reason: format!("assignment must be +1 or -1, got {}", o.assignment),
                });
            }
            let fields = [
                o.spend_first,
                o.spend_second,
                o.response_first,
                o.response_second,
            ];
            if fields.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput {
                    pair_id: o.pair_id.clone(),
                });
            }
            let a = o.assignment as f64;
            Ok(PairedDifference::new(
                (o.spend_first - o.spend_second) * a,
                (o.response_first - o.response_second) * a,
            ))
        })
        .collect()
}

/// Residuals `ε_i(θ) = y_i − θ·x_i` for every pair.
pub fn residuals(diffs: &[PairedDifference], theta: f64) -> ResidualVector {
    ResidualVector {
        values: diffs.iter().map(|d| d.residual(theta)).collect(),
        theta,
    }
}

/// Default perturbation magnitude relative to the x range.
pub const DEFAULT_PERTURB_SCALE: f64 = 1e-10;

/// Break ties in the spend deltas (and in the induced pairwise crossing
/// ratios) with a negligible seeded perturbation.
///
/// Tie-free inputs are returned unchanged; the output is deterministic for
/// a fixed seed.
pub fn perturb_ties(
    diffs: &[PairedDifference],
    relative_scale: f64,
    seed: u64,
) -> Result<Vec<PairedDifference>> {
    if relative_scale <= 0.0 {
        return Err(Error::InvalidParameter(
            "perturbation scale must be positive".into(),
        ));
    }
    let n = diffs.len();
    if n < 2 {
        return Ok(diffs.to_vec());
    }
    let (min_x, max_x) = diffs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
        (lo.min(d.x), hi.max(d.x))
    });
    let range = max_x - min_x;
    if range == 0.0 {
        return Err(Error::DegenerateData(
            "all spend deltas identical; crossing ratios undefined".into(),
        ));
    }
    let mut out = diffs.to_vec();
    if tie_free(&out) {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let magnitude = relative_scale * range;
    for _ in 0..64 {
        jitter_offenders(&mut out, magnitude, &mut rng);
        if tie_free(&out) {
            return Ok(out);
        }
    }
    Err(Error::DegenerateData(
        "could not break ties by perturbation".into(),
    ))
}

/// True when all x are distinct and all pairwise crossing ratios are
/// distinct.
fn tie_free(diffs: &[PairedDifference]) -> bool {
    let n = diffs.len();
    let mut xs: Vec<f64> = diffs.iter().map(|d| d.x).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    let mut thetas = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            thetas.push((diffs[j].y - diffs[i].y) / (diffs[j].x - diffs[i].x));
        }
    }
    thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    !thetas.windows(2).any(|w| w[0] == w[1])
}

/// Shift the later entry of every tied x group, and one side of every tied
/// crossing, by a fresh draw in (0, magnitude].
fn jitter_offenders(diffs: &mut [PairedDifference], magnitude: f64, rng: &mut ChaCha8Rng) {
    let n = diffs.len();
    let mut offenders = vec![false; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if diffs[i].x == diffs[j].x {
                offenders[j] = true;
            }
        }
    }
    // Crossing ties: shared slope between two index pairs. Jitter one
    // participant of the second pair.
    let mut slopes: Vec<(f64, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            if diffs[i].x != diffs[j].x {
                slopes.push(((diffs[j].y - diffs[i].y) / (diffs[j].x - diffs[i].x), j));
            }
        }
    }
    slopes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in slopes.windows(2) {
        if w[0].0 == w[1].0 {
            offenders[w[1].1] = true;
        }
    }
    for (i, flagged) in offenders.iter().enumerate() {
        if *flagged {
            let u: f64 = rng.random::<f64>();
            diffs[i].x += (u - 0.5) * 2.0 * magnitude;
        }
    }
}

/// Sample kurtosis `m₄/m₂²` with population central moments.
///
/// This is the non-excess convention: a normal sample gives ≈ 3. Many
/// libraries subtract 3 by default; values here are directly comparable
/// against 3 as the normal benchmark.
pub fn sample_kurtosis(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 4 {
        return Err(Error::TooFewPairs { needed: 4, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
    if m2 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(m4 / (m2 * m2))
}

/// Two-sided Wilcoxon signed-rank test of symmetry about 0.
///
/// Zeros are dropped before ranking and ties get mid-ranks. The null
/// distribution is exact for up to 25 nonzero residuals and a normal
/// approximation with continuity correction beyond.
pub fn residual_symmetry_test(res: &ResidualVector) -> Result<f64> {
    let n_all = res.values.len();
    if n_all < 5 {
        return Err(Error::TooFewPairs {
            needed: 5,
            got: n_all,
        });
    }
    if res.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite residual".into()));
    }
    let nonzero: Vec<f64> = res.values.iter().copied().filter(|v| *v != 0.0).collect();
    if nonzero.is_empty() {
        return Ok(1.0); // perfectly symmetric by convention
    }
    let n = nonzero.len();
    let ranks = midranks_by_abs(&nonzero);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| *r)
        .sum();
    if n <= signed_rank::EXACT_CUTOFF {
        Ok(signed_rank::exact_two_sided_p(n, w_plus))
    } else {
        Ok(signed_rank::normal_two_sided_p(n, w_plus))
    }
}

/// Mid-ranks of |values|, 1-based.
pub(crate) fn midranks_by_abs(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].abs().partial_cmp(&values[b].abs()).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]].abs() == values[order[i]].abs() {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = midrank;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(id: &str, s1: f64, r1: f64, s2: f64, r2: f64, a: i8) -> GeoPairOutcome {
        GeoPairOutcome {
            pair_id: id.into(),
            spend_first: s1,
            response_first: r1,
            spend_second: s2,
            response_second: r2,
            assignment: a,
        }
    }

    #[test]
    fn differences_follow_assignment() {
        let out = compute_differences(&[outcome("p1", 3.0, 10.0, 1.0, 4.0, 1)]).unwrap();
        assert_eq!(out[0], PairedDifference::new(2.0, 6.0));
        let out = compute_differences(&[outcome("p1", 3.0, 10.0, 1.0, 4.0, -1)]).unwrap();
        assert_eq!(out[0], PairedDifference::new(-2.0, -6.0));
    }

    #[test]
    fn flipping_all_assignments_negates_differences() {
        let base = vec![
            outcome("a", 3.0, 10.0, 1.0, 4.0, 1),
            outcome("b", 2.0, 8.0, 5.0, 9.0, -1),
        ];
        let flipped: Vec<GeoPairOutcome> = base
            .iter()
            .map(|o| {
                let mut o = o.clone();
                o.assignment = -o.assignment;
                o
            })
            .collect();
        let d0 = compute_differences(&base).unwrap();
        let d1 = compute_differences(&flipped).unwrap();
        for (a, b) in d0.iter().zip(&d1) {
            assert_eq!(a.x, -b.x);
            assert_eq!(a.y, -b.y);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let err = compute_differences(&[outcome("bad", f64::NAN, 1.0, 0.0, 0.0, 1)]).unwrap_err();
        match err {
            Error::NonFiniteInput { pair_id } => assert_eq!(pair_id, "bad"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn residuals_examples() {
        let r = residuals(&[PairedDifference::new(1.0, 2.0)], 2.0);
        assert_eq!(r.values, vec![0.0]);
        let d = vec![
            PairedDifference::new(1.0, 2.0),
            PairedDifference::new(2.0, 4.0),
            PairedDifference::new(3.0, 7.0),
        ];
        assert_eq!(residuals(&d, 2.0).values, vec![0.0, 0.0, 1.0]);
        assert_eq!(residuals(&d, 0.0).values, vec![2.0, 4.0, 7.0]);
    }

    #[test]
    fn perturb_is_noop_when_tie_free() {
        let d = vec![
            PairedDifference::new(1.0, 5.0),
            PairedDifference::new(2.0, 1.0),
            PairedDifference::new(3.0, 9.0),
        ];
        let out = perturb_ties(&d, DEFAULT_PERTURB_SCALE, 7).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn perturb_breaks_x_ties_deterministically() {
        let d = vec![
            PairedDifference::new(1.0, 5.0),
            PairedDifference::new(1.0, 1.0),
            PairedDifference::new(2.0, 9.0),
        ];
        let a = perturb_ties(&d, DEFAULT_PERTURB_SCALE, 42).unwrap();
        let b = perturb_ties(&d, DEFAULT_PERTURB_SCALE, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].x, a[1].x);
        assert!((a[1].x - d[1].x).abs() <= 2.0 * DEFAULT_PERTURB_SCALE * 1.0 + 1e-18);
        // first occurrence untouched
        assert_eq!(a[0].x, 1.0);
    }

    #[test]
    fn perturb_breaks_collinear_crossing_ties() {
        // Collinear data: every pairwise slope equals 2.
        let d: Vec<PairedDifference> = (1..=4)
            .map(|i| PairedDifference::new(i as f64, 2.0 * i as f64))
            .collect();
        let out = perturb_ties(&d, DEFAULT_PERTURB_SCALE, 3).unwrap();
        assert!(tie_free(&out));
        for (orig, new) in d.iter().zip(&out) {
            assert!((orig.x - new.x).abs() < 1e-6);
        }
    }

    #[test]
    fn perturb_rejects_constant_x() {
        let d = vec![
            PairedDifference::new(1.0, 5.0),
            PairedDifference::new(1.0, 1.0),
        ];
        assert!(matches!(
            perturb_ties(&d, DEFAULT_PERTURB_SCALE, 1),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn kurtosis_hand_value() {
        let k = sample_kurtosis(&[-1.0, 1.0, -1.0, 1.0]).unwrap();
        assert!((k - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kurtosis_zero_variance_errors() {
        assert!(matches!(
            sample_kurtosis(&[0.0, 0.0, 0.0, 0.0]),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn kurtosis_normal_sample_near_three() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sample: Vec<f64> = (0..100_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let k = sample_kurtosis(&sample).unwrap();
        assert!((k - 3.0).abs() < 0.1, "kurtosis {k}");
    }

    #[test]
    fn symmetry_test_antisymmetric_is_one() {
        let res = ResidualVector {
            values: vec![-1.0, 1.0, -2.5, 2.5, -0.3, 0.3],
            theta: 0.0,
        };
        let p = residual_symmetry_test(&res).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetry_test_all_positive_exact_tail() {
        let res = ResidualVector {
            values: (1..=10).map(|i| i as f64).collect(),
            theta: 0.0,
        };
        let p = residual_symmetry_test(&res).unwrap();
        assert!((p - 2.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn symmetry_test_invariant_to_relabeling() {
        let mut values = vec![0.4, -1.2, 3.1, -0.2, 2.2, -5.0, 0.9];
        let p0 = residual_symmetry_test(&ResidualVector {
            values: values.clone(),
            theta: 0.0,
        })
        .unwrap();
        values.reverse();
        values.swap(1, 4);
        let p1 = residual_symmetry_test(&ResidualVector { values, theta: 0.0 }).unwrap();
        assert_eq!(p0, p1);
    }

    #[test]
    fn symmetry_test_all_zero_is_one() {
        let res = ResidualVector {
            values: vec![0.0; 6],
            theta: 1.0,
        };
        assert_eq!(residual_symmetry_test(&res).unwrap(), 1.0);
    }
}
