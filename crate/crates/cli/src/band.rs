//! The band subcommand: point estimate and CI as a function of the trim
//! rate, with the data-driven selection marked.

use std::io::Write;

use trimmed_match::ingest::{read_csv_path, Dataset};
use trimmed_match::paired_data::{perturb_ties, PairedDifference, DEFAULT_PERTURB_SCALE};
use trimmed_match::trim_rate::{select_trim_rate, DEFAULT_ALPHA0};
use trimmed_match::trimmed_match::{confidence_interval, point_estimate, TrimSpec};
use trimmed_match::{Error, Result};

use crate::analyze::csv_schema;
use crate::SchemaArg;

pub struct Args {
    pub input: std::path::PathBuf,
    pub schema: SchemaArg,
    pub lambda_max: f64,
    pub confidence: f64,
    pub seed: u64,
    pub output: Option<std::path::PathBuf>,
}

/// One band row; estimation failures leave the fields empty.
fn row(diffs: &[PairedDifference], n: usize, m: usize, alpha: f64, selected: bool) -> String {
    let lambda = m as f64 / n as f64;
    let spec = match TrimSpec::from_m(n, m) {
        Ok(s) => s,
        Err(_) => return format!("{lambda},{m},,,,{selected}\n"),
    };
    let point = point_estimate(diffs, &spec)
        .map(|e| format!("{}", e.theta))
        .unwrap_or_default();
    let (lo, hi) = match confidence_interval(diffs, &spec, alpha) {
        Ok(ci) if ci.is_bounded() => (format!("{}", ci.lower), format!("{}", ci.upper)),
        Ok(ci) => (
            if ci.lower.is_finite() {
                format!("{}", ci.lower)
            } else {
                String::new()
            },
            if ci.upper.is_finite() {
                format!("{}", ci.upper)
            } else {
                String::new()
            },
        ),
        Err(_) => (String::new(), String::new()),
    };
    format!("{lambda},{m},{point},{lo},{hi},{selected}\n")
}

pub fn render(diffs: &[PairedDifference], lambda_max: f64, alpha: f64, seed: u64) -> Result<String> {
    if !(0.0..0.5).contains(&lambda_max) {
        return Err(Error::InvalidParameter(
            "--lambda-max must be in [0, 0.5)".into(),
        ));
    }
    let (diffs, choice) = match select_trim_rate(diffs, DEFAULT_ALPHA0, lambda_max) {
        Err(Error::DuplicateX) => {
            let jittered = perturb_ties(diffs, DEFAULT_PERTURB_SCALE, seed)?;
            let choice = select_trim_rate(&jittered, DEFAULT_ALPHA0, lambda_max)?;
            (jittered, choice)
        }
        Err(e) => return Err(e),
        Ok(choice) => (diffs.to_vec(), choice),
    };
    let n = diffs.len();
    let m_cap = ((n as f64 * lambda_max).floor() as usize).min((n.saturating_sub(2)) / 2);
    let mut out = String::from("lambda,m,point,ci_lower,ci_upper,selected\n");
    for m in 0..=m_cap {
        out.push_str(&row(&diffs, n, m, alpha, m == choice.m_hat));
    }
    Ok(out)
}

pub fn run(args: Args) -> Result<()> {
    if !(args.confidence > 0.0 && args.confidence < 1.0) {
        return Err(Error::InvalidParameter(
            "--confidence must be in (0, 1)".into(),
        ));
    }
    let Dataset { diffs, .. } = read_csv_path(&args.input, csv_schema(args.schema))?;
    let csv = render(&diffs, args.lambda_max, 1.0 - args.confidence, args.seed)?;
    match &args.output {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            f.write_all(csv.as_bytes())?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}
