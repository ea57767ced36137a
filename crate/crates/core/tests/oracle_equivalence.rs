//! The crossing sweep against the brute-force per-interval oracle, plus the
//! existence guarantee and the no-trimming reduction. The acceptance suite
//! runs these at full scale; this keeps a faster spread for development.

use tm_testkit::{random_dataset, rng, roots_match, trimmed_root_oracle};
use trimmed_match::estimators::empirical_estimate;
use trimmed_match::trimmed_match::{
    point_estimate, solve_trimmed_mean_equation, TrimSpec,
};

#[test]
fn sweep_matches_oracle_across_sizes_and_trims() {
    let mut r = rng(0x5eed);
    for n in 3..=10 {
        for _ in 0..40 {
            let d = random_dataset(&mut r, n);
            for m in 0..=(n - 1) / 2 {
                let spec = TrimSpec::from_m(n, m).unwrap();
                let expected = trimmed_root_oracle(&d, m);
                match solve_trimmed_mean_equation(&d, &spec) {
                    Ok(set) => {
                        let got = set.thetas();
                        assert!(
                            roots_match(&got, &expected, 1e-9),
                            "n={n} m={m}\n d={d:?}\n sweep={got:?}\n oracle={expected:?}"
                        );
                    }
                    Err(e) => {
                        assert!(
                            expected.is_empty(),
                            "n={n} m={m}: sweep errored ({e}) but oracle found {expected:?}\n d={d:?}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn root_exists_whenever_trimmed_x_sum_is_nonzero() {
    let mut r = rng(0xacce);
    let mut checked = 0;
    while checked < 300 {
        let n = 3 + (checked % 10);
        let d = random_dataset(&mut r, n);
        let m = checked % ((n - 1) / 2 + 1);
        let spec = TrimSpec::from_m(n, m).unwrap();
        let mut xs: Vec<f64> = d.iter().map(|p| p.x).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let trimmed_sum: f64 = xs[m..n - m].iter().sum();
        if trimmed_sum.abs() < 1e-9 {
            continue;
        }
        let set = solve_trimmed_mean_equation(&d, &spec)
            .unwrap_or_else(|e| panic!("no root (n={n}, m={m}): {e}\n d={d:?}"));
        assert!(!set.roots.is_empty());
        checked += 1;
    }
}

#[test]
fn no_trimming_reduces_to_empirical_ratio() {
    let mut r = rng(0x1a6da0);
    for _ in 0..300 {
        let n = 3 + (r.random::<u32>() % 20) as usize;
        let d = random_dataset(&mut r, n);
        let emp = match empirical_estimate(&d) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let spec = TrimSpec::from_m(n, 0).unwrap();
        let est = point_estimate(&d, &spec).unwrap();
        assert!(
            (est.theta - emp).abs() <= 1e-12 * emp.abs().max(1.0),
            "trimmed λ=0 {} vs empirical {}",
            est.theta,
            emp
        );
    }
}

#[test]
fn interpretation_identity_holds_exactly() {
    let mut r = rng(0x1d);
    for _ in 0..100 {
        let n = 5 + (r.random::<u32>() % 8) as usize;
        let d = random_dataset(&mut r, n);
        for m in 0..=(n - 1) / 2 {
            let spec = TrimSpec::from_m(n, m).unwrap();
            if let Ok(est) = point_estimate(&d, &spec) {
                let sy: f64 = est.untrimmed.iter().map(|&i| d[i].y).sum();
                let sx: f64 = est.untrimmed.iter().map(|&i| d[i].x).sum();
                assert_eq!(est.untrimmed.len(), spec.kept());
                assert_eq!(est.theta, sy / sx, "n={n} m={m}");
            }
        }
    }
}

use rand::Rng;
