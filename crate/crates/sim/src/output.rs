//! Summary emission: plot-ready CSV, JSON, and fixed-width console tables.
//!
//! All writers format deterministically; identical summaries yield
//! byte-identical output.

use crate::ScenarioSummary;

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "".into()
    } else {
        format!("{v:.6}")
    }
}

/// One row per scenario × estimator with RMSE and bias.
pub fn rmse_bias_csv(summaries: &[ScenarioSummary]) -> String {
    let mut out =
        String::from("distribution,n,theta0,r,delta,estimator,rmse,bias,failures,replicates_used\n");
    for s in summaries {
        for e in &s.estimators {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                s.distribution,
                s.n,
                s.theta0,
                s.r,
                s.delta,
                e.estimator,
                fmt(e.rmse),
                fmt(e.bias),
                e.failures,
                e.replicates_used,
            ));
        }
    }
    out
}

/// One row per scenario × estimator with power and coverage.
pub fn power_coverage_csv(summaries: &[ScenarioSummary]) -> String {
    let mut out =
        String::from("distribution,n,theta0,r,delta,confidence,estimator,power,coverage\n");
    for s in summaries {
        for e in &s.estimators {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.distribution,
                s.n,
                s.theta0,
                s.r,
                s.delta,
                s.confidence,
                e.estimator,
                fmt(e.power),
                fmt(e.coverage),
            ));
        }
    }
    out
}

/// Sensitivity-sweep table: raw RMSE plus RMSE/θ* per δ (scaling for
/// plots is left to the plot layer).
pub fn sweep_csv(summaries: &[ScenarioSummary]) -> String {
    let mut out = String::from(
        "distribution,r,delta,theta_star,estimator,rmse,rmse_over_theta_star,bias,power,coverage\n",
    );
    for s in summaries {
        for e in &s.estimators {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                s.distribution,
                s.r,
                s.delta,
                fmt(s.theta_star),
                e.estimator,
                fmt(e.rmse),
                fmt(e.rmse / s.theta_star),
                fmt(e.bias),
                fmt(e.power),
                fmt(e.coverage),
            ));
        }
    }
    out
}

/// Pretty-printed JSON of the full summaries.
pub fn summary_json(summaries: &[ScenarioSummary]) -> String {
    serde_json::to_string_pretty(summaries).expect("summaries serialize")
}

/// Console table in the RMSE (bias) layout, one scenario per row.
pub fn render_rmse_table(summaries: &[ScenarioSummary]) -> String {
    let labels: Vec<String> = summaries
        .first()
        .map(|s| s.estimators.iter().map(|e| e.estimator.clone()).collect())
        .unwrap_or_default();
    let mut out = format!("{:<14}{:>6}{:>7}", "distribution", "r", "delta");
    for l in &labels {
        out.push_str(&format!("{l:>22}"));
    }
    out.push('\n');
    for s in summaries {
        out.push_str(&format!("{:<14}{:>6}{:>7}", s.distribution, s.r, s.delta));
        for e in &s.estimators {
            let cell = if e.rmse.is_nan() {
                "-".to_string()
            } else {
                format!("{:.2} ({:.2})", e.rmse, e.bias)
            };
            out.push_str(&format!("{cell:>22}"));
        }
        out.push('\n');
    }
    out
}

/// Console table in the power (coverage) layout, percentages.
pub fn render_power_table(summaries: &[ScenarioSummary]) -> String {
    let labels: Vec<String> = summaries
        .first()
        .map(|s| s.estimators.iter().map(|e| e.estimator.clone()).collect())
        .unwrap_or_default();
    let mut out = format!("{:<14}{:>6}{:>7}", "distribution", "r", "delta");
    for l in &labels {
        out.push_str(&format!("{l:>22}"));
    }
    out.push('\n');
    for s in summaries {
        out.push_str(&format!("{:<14}{:>6}{:>7}", s.distribution, s.r, s.delta));
        for e in &s.estimators {
            let cell = if e.power.is_nan() {
                "-".to_string()
            } else {
                format!("{:.0} ({:.0})", 100.0 * e.power, 100.0 * e.coverage)
            };
            out.push_str(&format!("{cell:>22}"));
        }
        out.push('\n');
    }
    out
}
