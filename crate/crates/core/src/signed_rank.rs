//! Exact null distribution of the Wilcoxon signed-rank statistic.
//!
//! Under the null, the positive-rank sum `W = Σ_{i=1}^{n} i·I_i` with
//! independent fair indicators `I_i` has a distribution computable by the
//! polynomial convolution `Π (1 + z^i)`. The signed statistic
//! `M = Σ sgn·rank = 2W − n(n+1)/2` is symmetric about 0.

/// Largest n for which the exact table is used; beyond this the normal
/// approximation with a 0.5 continuity correction takes over.
pub const EXACT_CUTOFF: usize = 25;

/// Counts of `W = w` for `w = 0..=n(n+1)/2` under random signs.
///
/// Total mass is `2^n`; counts fit comfortably in u64 for n ≤ 25.
pub fn exact_counts(n: usize) -> Vec<u64> {
    let max_w = n * (n + 1) / 2;
    let mut counts = vec![0u64; max_w + 1];
    counts[0] = 1;
    for i in 1..=n {
        for w in (i..=max_w).rev() {
            counts[w] += counts[w - i];
        }
    }
    counts
}

/// Two-sided p-value `P(|W − μ| ≥ |w_obs − μ|)` from the exact table.
///
/// `w_obs` may be half-integral when mid-ranks were assigned to ties.
pub fn exact_two_sided_p(n: usize, w_obs: f64) -> f64 {
    let counts = exact_counts(n);
    let mu = n as f64 * (n as f64 + 1.0) / 4.0;
    let d = (w_obs - mu).abs() - 1e-9;
    let mut tail = 0u64;
    for (w, &c) in counts.iter().enumerate() {
        if (w as f64 - mu).abs() >= d {
            tail += c;
        }
    }
    tail as f64 / 2f64.powi(n as i32)
}

/// Two-sided p-value via the normal approximation with continuity correction.
pub fn normal_two_sided_p(n: usize, w_obs: f64) -> f64 {
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0).sqrt();
    if sigma == 0.0 {
        return 1.0;
    }
    let z = ((w_obs - mu).abs() - 0.5).max(0.0) / sigma;
    (2.0 * standard_normal_sf(z)).min(1.0)
}

/// `(1 − α/2)` quantile of the signed statistic `M = 2W − n(n+1)/2`.
///
/// Exact for `n ≤ EXACT_CUTOFF`; otherwise normal approximation with a 0.5
/// continuity correction on the W scale.
pub fn signed_statistic_quantile(n: usize, alpha: f64) -> f64 {
    let target = 1.0 - alpha / 2.0;
    let total_rank = (n * (n + 1) / 2) as f64;
    if n <= EXACT_CUTOFF {
        let counts = exact_counts(n);
        let total = 2f64.powi(n as i32);
        let mut cum = 0.0;
        for (w, &c) in counts.iter().enumerate() {
            cum += c as f64;
            if cum / total >= target - 1e-12 {
                return 2.0 * w as f64 - total_rank;
            }
        }
        total_rank
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0).sqrt();
        let z = standard_normal_quantile(target);
        let w_q = mu + z * sigma + 0.5;
        2.0 * w_q - total_rank
    }
}

/// Standard normal survival function.
pub fn standard_normal_sf(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).unwrap();
    normal.sf(z)
}

/// Standard normal quantile function.
pub fn standard_normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).unwrap();
    normal.inverse_cdf(p)
}
