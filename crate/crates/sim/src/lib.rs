//! Monte Carlo evaluation of paired-experiment effect-ratio estimators.
//!
//! A synthetic geo population is built from a heavy-tail-controllable size
//! distribution; geos are paired by size; each replicate randomizes the
//! within-pair assignment and allocates a fixed total incremental budget
//! across the treatment group proportionally to control spend, which makes
//! each geo's observed spend depend on the whole assignment vector. The
//! assignment draw is the only source of randomness, so results are fully
//! reproducible from the scenario seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use trimmed_match::estimators::{
    empirical_estimate, test_based_ci, test_based_estimate, TestStatisticKind,
};
use trimmed_match::paired_data::{perturb_ties, PairedDifference, DEFAULT_PERTURB_SCALE};
use trimmed_match::trim_rate::estimate_with_auto_trim;
use trimmed_match::trimmed_match::{confidence_interval, estimate_with_interval, TrimSpec};
use trimmed_match::{Error, Interval, Result};

pub mod config;
pub mod output;

/// Geo-size distribution controlling population heterogeneity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeDistribution {
    HalfNormal,
    LogNormal,
    HalfCauchy,
}

impl SizeDistribution {
    /// Quantile function at p ∈ (0, 1), unit scale.
    pub fn quantile(&self, p: f64) -> f64 {
        let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
        match self {
            SizeDistribution::HalfNormal => normal.inverse_cdf((1.0 + p) / 2.0),
            SizeDistribution::LogNormal => normal.inverse_cdf(p).exp(),
            SizeDistribution::HalfCauchy => (std::f64::consts::PI * p / 2.0).tan(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SizeDistribution::HalfNormal => "half-normal",
            SizeDistribution::LogNormal => "log-normal",
            SizeDistribution::HalfCauchy => "half-cauchy",
        }
    }
}

/// One simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Number of geo pairs (population has 2n geos).
    pub n: usize,
    pub distribution: SizeDistribution,
    /// Common effect-ratio scale θ₀.
    pub theta0: f64,
    /// Incremental spend intensity r > 0.
    pub r: f64,
    /// Per-geo effect-ratio dispersion δ ∈ [0, 1].
    pub delta: f64,
    /// Replicates per scenario.
    pub replicates: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter("n must be ≥ 2".into()));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidParameter("replicates must be ≥ 1".into()));
        }
        if !(self.r > 0.0) {
            return Err(Error::InvalidParameter("r must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::InvalidParameter("delta must be in [0, 1]".into()));
        }
        if !self.theta0.is_finite() {
            return Err(Error::InvalidParameter("theta0 must be finite".into()));
        }
        Ok(())
    }
}

/// Fixed (assignment-independent) attributes of the 2n geos, indexed by
/// g = 1..=2n in size order.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoPopulation {
    pub sizes: Vec<f64>,
    pub control_spend: Vec<f64>,
    pub control_response: Vec<f64>,
    pub geo_iroas: Vec<f64>,
    /// Pre-specified total incremental spend budget.
    pub budget: f64,
}

/// +1 for even g (1-based), −1 for odd: the alternating factor in the
/// spend and effect-ratio profiles.
#[inline]
fn parity(g1: usize) -> f64 {
    if g1 % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Deterministic population: sizes are the distribution quantiles at
/// `g/(2n+1)`, control spend is 1% of size with a ±25% alternation,
/// control response equals size, per-geo ratios are `θ₀(1 + δ·(−1)^g)`,
/// and the budget is `0.25·r·Σ control spend`.
pub fn generate_population(config: &ScenarioConfig) -> Result<GeoPopulation> {
    config.validate()?;
    let g_total = 2 * config.n;
    let mut sizes = Vec::with_capacity(g_total);
    let mut control_spend = Vec::with_capacity(g_total);
    let mut control_response = Vec::with_capacity(g_total);
    let mut geo_iroas = Vec::with_capacity(g_total);
    for g1 in 1..=g_total {
        let p = g1 as f64 / (g_total as f64 + 1.0);
        let z = config.distribution.quantile(p);
        sizes.push(z);
        control_spend.push(0.01 * z * (1.0 + 0.25 * parity(g1)));
        control_response.push(z);
        geo_iroas.push(config.theta0 * (1.0 + config.delta * parity(g1)));
    }
    let budget = 0.25 * config.r * control_spend.iter().sum::<f64>();
    Ok(GeoPopulation {
        sizes,
        control_spend,
        control_response,
        geo_iroas,
        budget,
    })
}

/// Pair geos by size: the two largest form a pair, the next two the next
/// pair, and so on. Each pair is (larger geo, smaller geo) by 0-based
/// population index; the result is invariant to input order.
pub fn make_pairs(population: &GeoPopulation) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..population.sizes.len()).collect();
    order.sort_by(|&a, &b| {
        population.sizes[b]
            .partial_cmp(&population.sizes[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    order.chunks(2).map(|c| (c[0], c[1])).collect()
}

/// Observations from one randomized assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateData {
    /// Per-pair assignment: +1 ⇒ first (larger) geo treated.
    pub assignments: Vec<i8>,
    /// Observed spend per geo.
    pub observed_spend: Vec<f64>,
    /// Observed response per geo.
    pub observed_response: Vec<f64>,
    /// Treatment-minus-control deltas per pair.
    pub diffs: Vec<PairedDifference>,
}

/// Draw one assignment vector and materialize the observations.
///
/// Control geos observe their control outcomes untouched; each treated geo
/// receives incremental spend proportional to its control spend, scaled so
/// the treatment group exactly exhausts the budget, and its response rises
/// by its own ratio times that increment.
pub fn run_replicate(
    population: &GeoPopulation,
    pairs: &[(usize, usize)],
    rng: &mut impl Rng,
) -> ReplicateData {
    let assignments: Vec<i8> = (0..pairs.len())
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    materialize_replicate(population, pairs, &assignments)
}

/// Deterministic core of `run_replicate`, reusable for fixed assignments.
pub fn materialize_replicate(
    population: &GeoPopulation,
    pairs: &[(usize, usize)],
    assignments: &[i8],
) -> ReplicateData {
    let mut observed_spend = population.control_spend.clone();
    let mut observed_response = population.control_response.clone();
    let treated: Vec<usize> = pairs
        .iter()
        .zip(assignments)
        .map(|(&(first, second), &a)| if a == 1 { first } else { second })
        .collect();
    let treated_control_spend: f64 = treated.iter().map(|&g| population.control_spend[g]).sum();
    for &g in &treated {
        let delta_spend = population.control_spend[g] * population.budget / treated_control_spend;
        observed_spend[g] += delta_spend;
        observed_response[g] += population.geo_iroas[g] * delta_spend;
    }
    let diffs = pairs
        .iter()
        .zip(assignments)
        .map(|(&(first, second), &a)| {
            let af = a as f64;
            PairedDifference::new(
                (observed_spend[first] - observed_spend[second]) * af,
                (observed_response[first] - observed_response[second]) * af,
            )
        })
        .collect();
    ReplicateData {
        assignments: assignments.to_vec(),
        observed_spend,
        observed_response,
        diffs,
    }
}

/// The target ratio of the scenario.
///
/// With δ = 0 every geo shares θ₀. Otherwise the target is defined through
/// a virtual all-treated experiment with doubled budget, which reduces to
/// `θ* = θ₀ + δ·θ₀ · Σ z_g(0.25 + (−1)^g) / Σ z_g(1 + 0.25(−1)^g)`.
pub fn true_theta(population: &GeoPopulation, config: &ScenarioConfig) -> f64 {
    if config.delta == 0.0 {
        return config.theta0;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (idx, &z) in population.sizes.iter().enumerate() {
        let s = parity(idx + 1);
        num += z * (0.25 + s);
        den += z * (1.0 + 0.25 * s);
    }
    config.theta0 + config.delta * config.theta0 * num / den
}

/// Estimator variants evaluated by the harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    Empirical,
    Sign,
    Rank,
    TrimmedFixed(f64),
    TrimmedAuto,
}

impl EstimatorKind {
    pub fn label(&self) -> String {
        match self {
            EstimatorKind::Empirical => "empirical".into(),
            EstimatorKind::Sign => "sign".into(),
            EstimatorKind::Rank => "rank".into(),
            EstimatorKind::TrimmedFixed(l) => format!("trimmed-{l}"),
            EstimatorKind::TrimmedAuto => "trimmed-auto".into(),
        }
    }

    /// The default comparison set: the baselines, a fixed 10% trim, and
    /// the data-driven trim.
    pub fn standard_set() -> Vec<EstimatorKind> {
        vec![
            EstimatorKind::Empirical,
            EstimatorKind::Sign,
            EstimatorKind::Rank,
            EstimatorKind::TrimmedFixed(0.10),
            EstimatorKind::TrimmedAuto,
        ]
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(EstimatorKind::Empirical),
            "sign" => Ok(EstimatorKind::Sign),
            "rank" => Ok(EstimatorKind::Rank),
            "trimmed-auto" => Ok(EstimatorKind::TrimmedAuto),
            other => {
                if let Some(rate) = other.strip_prefix("trimmed-") {
                    let lambda: f64 = rate.parse().map_err(|_| {
                        Error::InvalidParameter(format!("bad trim rate in estimator '{other}'"))
                    })?;
                    Ok(EstimatorKind::TrimmedFixed(lambda))
                } else {
                    Err(Error::InvalidParameter(format!(
                        "unknown estimator '{other}'"
                    )))
                }
            }
        }
    }
}

/// Point estimate and CI for one estimator on one replicate.
fn estimate_one(
    kind: EstimatorKind,
    diffs: &[PairedDifference],
    alpha: f64,
    tie_seed: u64,
) -> Result<(f64, Interval)> {
    // The crossing machinery needs distinct spend deltas; simulated data
    // collides only through exact float coincidence, but stay safe.
    let with_distinct = |f: &dyn Fn(&[PairedDifference]) -> Result<(f64, Interval)>| {
        match f(diffs) {
            Err(Error::DuplicateX) => {
                let jittered = perturb_ties(diffs, DEFAULT_PERTURB_SCALE, tie_seed)?;
                f(&jittered)
            }
            other => other,
        }
    };
    match kind {
        EstimatorKind::Empirical => with_distinct(&|d| {
            let point = empirical_estimate(d)?;
            let spec = TrimSpec::from_m(d.len(), 0)?;
            let ci = confidence_interval(d, &spec, alpha)?;
            Ok((point, ci))
        }),
        EstimatorKind::Sign => {
            let point = test_based_estimate(diffs, TestStatisticKind::Sign)?;
            let ci = test_based_ci(diffs, TestStatisticKind::Sign, alpha)?;
            Ok((point, ci))
        }
        EstimatorKind::Rank => {
            let point = test_based_estimate(diffs, TestStatisticKind::Rank)?;
            let ci = test_based_ci(diffs, TestStatisticKind::Rank, alpha)?;
            Ok((point, ci))
        }
        EstimatorKind::TrimmedFixed(lambda) => with_distinct(&|d| {
            let spec = TrimSpec::from_lambda(d.len(), lambda)?;
            let (est, ci) = estimate_with_interval(d, &spec, alpha)?;
            Ok((est.theta, ci))
        }),
        EstimatorKind::TrimmedAuto => with_distinct(&|d| {
            let report = estimate_with_auto_trim(d, alpha)?;
            Ok((
                report.point,
                Interval {
                    lower: report.ci_lower,
                    upper: report.ci_upper,
                },
            ))
        }),
    }
}

/// Aggregated operating characteristics of one estimator in one scenario.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub rmse: f64,
    pub bias: f64,
    pub power: f64,
    pub coverage: f64,
    /// Replicates where the estimator produced both a point and an
    /// interval; failures are excluded from every metric.
    pub replicates_used: usize,
    pub failures: usize,
    /// Set when the exclusion rate reaches 1%.
    pub exclusion_flagged: bool,
}

/// Results of one scenario across all requested estimators.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioSummary {
    pub distribution: String,
    pub n: usize,
    pub theta0: f64,
    pub r: f64,
    pub delta: f64,
    pub replicates: usize,
    pub seed: u64,
    pub confidence: f64,
    pub theta_star: f64,
    pub estimators: Vec<EstimatorSummary>,
}

impl ScenarioSummary {
    pub fn estimator(&self, label: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == label)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Independent stream for replicate k: a counter-based key derivation, so
/// parallel execution order cannot affect the draws.
pub fn replicate_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut state = seed ^ k.wrapping_mul(0xA24BAED4963EE407);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Run one scenario: K replicates, each estimator's point and CI, reduced
/// to RMSE/bias/power/coverage against θ*.
///
/// Replicates run in parallel; per-replicate results are collected in
/// replicate order and reduced sequentially, so summaries are identical
/// for any worker count.
pub fn run_scenario(
    config: &ScenarioConfig,
    estimators: &[EstimatorKind],
    alpha: f64,
) -> Result<ScenarioSummary> {
    config.validate()?;
    let population = generate_population(config)?;
    let pairs = make_pairs(&population);
    let theta_star = true_theta(&population, config);

    let per_replicate: Vec<Vec<Option<(f64, Interval)>>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(config.seed, k);
            let rep = run_replicate(&population, &pairs, &mut rng);
            let tie_seed = splitmix64(&mut (config.seed ^ k));
            estimators
                .iter()
                .map(|&e| estimate_one(e, &rep.diffs, alpha, tie_seed).ok())
                .collect()
        })
        .collect();

    let estimators_summary = estimators
        .iter()
        .enumerate()
        .map(|(col, kind)| {
            let mut used = 0usize;
            let mut sq_sum = 0.0;
            let mut sum = 0.0;
            let mut powered = 0usize;
            let mut covered = 0usize;
            for row in &per_replicate {
                if let Some((point, ci)) = &row[col] {
                    used += 1;
                    sq_sum += (point - theta_star).powi(2);
                    sum += point;
                    if ci.lower > 0.0 {
                        powered += 1;
                    }
                    if ci.lower < theta_star && theta_star < ci.upper {
                        covered += 1;
                    }
                }
            }
            let failures = config.replicates - used;
            EstimatorSummary {
                estimator: kind.label(),
                rmse: if used > 0 {
                    (sq_sum / used as f64).sqrt()
                } else {
                    f64::NAN
                },
                bias: if used > 0 {
                    sum / used as f64 - theta_star
                } else {
                    f64::NAN
                },
                power: if used > 0 {
                    powered as f64 / used as f64
                } else {
                    f64::NAN
                },
                coverage: if used > 0 {
                    covered as f64 / used as f64
                } else {
                    f64::NAN
                },
                replicates_used: used,
                failures,
                exclusion_flagged: failures as f64 >= 0.01 * config.replicates as f64,
            }
        })
        .collect();

    Ok(ScenarioSummary {
        distribution: config.distribution.label().to_string(),
        n: config.n,
        theta0: config.theta0,
        r: config.r,
        delta: config.delta,
        replicates: config.replicates,
        seed: config.seed,
        confidence: 1.0 - alpha,
        theta_star,
        estimators: estimators_summary,
    })
}

/// Run the scenario at each dispersion level in `deltas` (all other
/// parameters fixed), for ratio-sensitivity curves.
pub fn sensitivity_sweep(
    base: &ScenarioConfig,
    deltas: &[f64],
    estimators: &[EstimatorKind],
    alpha: f64,
) -> Result<Vec<ScenarioSummary>> {
    deltas
        .iter()
        .map(|&delta| {
            let cfg = ScenarioConfig {
                delta,
                ..*base
            };
            run_scenario(&cfg, estimators, alpha)
        })
        .collect()
}
