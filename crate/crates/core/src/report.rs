//! Estimate reports: one row per method with point estimate, confidence
//! interval, and optional residual diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::{
    empirical_estimate, test_based_ci, test_based_estimate, TestStatisticKind,
};
use crate::paired_data::{
    residual_symmetry_test, residuals, sample_kurtosis, PairedDifference,
};
use crate::trim_rate::estimate_with_auto_trim;
use crate::trimmed_match::{confidence_interval, estimate_with_interval, TrimSpec};

/// Estimation method behind a report row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Empirical,
    Sign,
    Rank,
    TrimmedMatch,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Empirical => "empirical",
            Method::Sign => "sign",
            Method::Rank => "rank",
            Method::TrimmedMatch => "trimmed_match",
        }
    }
}

/// Residual diagnostics attached to a report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Diagnostics {
    pub kurtosis_x: Option<f64>,
    pub kurtosis_y: Option<f64>,
    pub kurtosis_residual: Option<f64>,
    pub symmetry_p: Option<f64>,
}

/// One estimator's output. Unbounded interval endpoints serialize as null.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimateReport {
    pub method: Method,
    pub point: f64,
    #[serde(with = "finite_or_null")]
    pub ci_lower: f64,
    #[serde(with = "finite_or_null")]
    pub ci_upper: f64,
    pub confidence: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trim_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub untrimmed_indices: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostics: Option<Diagnostics>,
}

/// Serialize non-finite endpoints as null so the JSON stays standard.
mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let opt = Option::<f64>::deserialize(d)?;
        Ok(opt.unwrap_or(f64::NAN))
    }
}

/// Trim choice for the trimmed-match method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrimChoice {
    /// Data-driven selection at α₀ = 0.5.
    Auto,
    /// Fixed trim rate λ.
    Fixed(f64),
}

/// Compute one method's report (no diagnostics attached).
pub fn compute_report(
    diffs: &[PairedDifference],
    method: Method,
    trim: TrimChoice,
    alpha: f64,
) -> Result<EstimateReport> {
    let confidence = 1.0 - alpha;
    match method {
        Method::Empirical => {
            let point = empirical_estimate(diffs)?;
            // The trimmed-match interval at λ = 0 studentizes the untrimmed
            // residual mean, which is the natural interval for this ratio.
            let spec = TrimSpec::from_m(diffs.len(), 0)?;
            let ci = confidence_interval(diffs, &spec, alpha)?;
            Ok(EstimateReport {
                method,
                point,
                ci_lower: ci.lower,
                ci_upper: ci.upper,
                confidence,
                trim_rate: None,
                untrimmed_indices: None,
                diagnostics: None,
            })
        }
        Method::Sign | Method::Rank => {
            let kind = if method == Method::Sign {
                TestStatisticKind::Sign
            } else {
                TestStatisticKind::Rank
            };
            let point = test_based_estimate(diffs, kind)?;
            let ci = test_based_ci(diffs, kind, alpha)?;
            Ok(EstimateReport {
                method,
                point,
                ci_lower: ci.lower,
                ci_upper: ci.upper,
                confidence,
                trim_rate: None,
                untrimmed_indices: None,
                diagnostics: None,
            })
        }
        Method::TrimmedMatch => match trim {
            TrimChoice::Auto => {
                let mut report = estimate_with_auto_trim(diffs, alpha)?;
                report.confidence = confidence;
                Ok(report)
            }
            TrimChoice::Fixed(lambda) => {
                let spec = TrimSpec::from_lambda(diffs.len(), lambda)?;
                let (est, ci) = estimate_with_interval(diffs, &spec, alpha)?;
                Ok(EstimateReport {
                    method,
                    point: est.theta,
                    ci_lower: ci.lower,
                    ci_upper: ci.upper,
                    confidence,
                    trim_rate: Some(spec.lambda()),
                    untrimmed_indices: Some(est.untrimmed),
                    diagnostics: None,
                })
            }
        },
    }
}

/// Attach kurtosis and symmetry diagnostics evaluated at the report's
/// point estimate.
pub fn attach_diagnostics(report: &mut EstimateReport, diffs: &[PairedDifference]) {
    let xs: Vec<f64> = diffs.iter().map(|d| d.x).collect();
    let ys: Vec<f64> = diffs.iter().map(|d| d.y).collect();
    let res = residuals(diffs, report.point);
    report.diagnostics = Some(Diagnostics {
        kurtosis_x: sample_kurtosis(&xs).ok(),
        kurtosis_y: sample_kurtosis(&ys).ok(),
        kurtosis_residual: sample_kurtosis(&res.values).ok(),
        symmetry_p: residual_symmetry_test(&res).ok(),
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diffs(pairs: &[(f64, f64)]) -> Vec<PairedDifference> {
        pairs.iter().map(|&(x, y)| PairedDifference::new(x, y)).collect()
    }

    #[test]
    fn empirical_report_on_exact_data() {
        let d = diffs(&[(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)]);
        let r = compute_report(&d, Method::Empirical, TrimChoice::Auto, 0.10).unwrap();
        assert_eq!(r.point, 2.0);
        assert!(r.ci_lower <= r.point && r.point <= r.ci_upper);
        assert!(r.trim_rate.is_none());
    }

    #[test]
    fn report_json_round_trip() {
        let d = diffs(&[
            (1.0, 2.2),
            (2.0, 3.9),
            (3.0, 6.5),
            (4.0, 8.1),
            (5.0, 9.6),
            (6.0, 12.3),
        ]);
        let mut r =
            compute_report(&d, Method::TrimmedMatch, TrimChoice::Fixed(0.2), 0.10).unwrap();
        attach_diagnostics(&mut r, &d);
        let json = serde_json::to_string(&r).unwrap();
        let back: EstimateReport = serde_json::from_str(&json).unwrap();
        let json2 = serde_json::to_string(&back).unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn infinite_endpoints_serialize_as_null() {
        let r = EstimateReport {
            method: Method::Sign,
            point: 1.0,
            ci_lower: f64::NEG_INFINITY,
            ci_upper: 2.0,
            confidence: 0.9,
            trim_rate: None,
            untrimmed_indices: None,
            diagnostics: None,
        };
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"ci_lower\":null"));
    }
}
