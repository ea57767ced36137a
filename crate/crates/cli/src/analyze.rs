//! The analyze subcommand: per-method estimate reports with residual
//! diagnostics.

use trimmed_match::ingest::{read_csv_path, CsvSchema, Dataset};
use trimmed_match::paired_data::{perturb_ties, PairedDifference, DEFAULT_PERTURB_SCALE};
use trimmed_match::report::{attach_diagnostics, compute_report, EstimateReport, Method, TrimChoice};
use trimmed_match::{Error, Result};

use crate::{FormatArg, MethodArg, SchemaArg};

pub struct Args {
    pub input: std::path::PathBuf,
    pub schema: SchemaArg,
    pub method: MethodArg,
    pub trim: String,
    pub confidence: f64,
    pub format: FormatArg,
    pub seed: u64,
    pub rescale_by_point: bool,
}

pub fn csv_schema(arg: SchemaArg) -> CsvSchema {
    match arg {
        SchemaArg::Paired => CsvSchema::Paired,
        SchemaArg::GeoLevel => CsvSchema::GeoLevel,
    }
}

fn parse_trim(trim: &str, n: usize) -> Result<TrimChoice> {
    if trim == "auto" {
        return Ok(TrimChoice::Auto);
    }
    let lambda: f64 = trim
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("--trim must be 'auto' or a rate, got '{trim}'")))?;
    let m = trimmed_match::trimmed_match::TrimSpec::from_lambda(n, lambda)?.m();
    if n < 2 * m + 2 {
        return Err(Error::InvalidParameter(format!(
            "fixed trim rate {lambda} leaves fewer than 2 untrimmed pairs (n = {n})"
        )));
    }
    Ok(TrimChoice::Fixed(lambda))
}

/// Retry once with perturbed ties when the crossing machinery rejects
/// duplicate spend deltas.
pub fn report_with_retry(
    diffs: &[PairedDifference],
    method: Method,
    trim: TrimChoice,
    alpha: f64,
    seed: u64,
) -> Result<EstimateReport> {
    match compute_report(diffs, method, trim, alpha) {
        Err(Error::DuplicateX) => {
            let jittered = perturb_ties(diffs, DEFAULT_PERTURB_SCALE, seed)?;
            let mut report = compute_report(&jittered, method, trim, alpha)?;
            attach_diagnostics(&mut report, &jittered);
            Ok(report)
        }
        Ok(mut report) => {
            attach_diagnostics(&mut report, diffs);
            Ok(report)
        }
        Err(e) => Err(e),
    }
}

fn rescale(report: &mut EstimateReport, divisor: f64) {
    report.point /= divisor;
    report.ci_lower /= divisor;
    report.ci_upper /= divisor;
    if divisor < 0.0 {
        std::mem::swap(&mut report.ci_lower, &mut report.ci_upper);
    }
}

fn render_table(reports: &[EstimateReport]) -> String {
    let mut out = format!(
        "{:<14}{:>12}{:>12}{:>12}{:>8}{:>8}\n",
        "method", "point", "ci_lower", "ci_upper", "conf", "trim"
    );
    for r in reports {
        let bound = |v: f64| {
            if v.is_finite() {
                format!("{v:.6}")
            } else {
                "-".into()
            }
        };
        out.push_str(&format!(
            "{:<14}{:>12.6}{:>12}{:>12}{:>8.2}{:>8}\n",
            r.method.label(),
            r.point,
            bound(r.ci_lower),
            bound(r.ci_upper),
            r.confidence,
            r.trim_rate.map_or("-".into(), |l| format!("{l:.3}")),
        ));
    }
    if let Some(d) = reports.iter().find_map(|r| r.diagnostics.as_ref()) {
        let show = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.3}"));
        out.push_str(&format!(
            "\ndiagnostics: kurtosis_x={} kurtosis_y={} kurtosis_residual={} symmetry_p={}\n",
            show(d.kurtosis_x),
            show(d.kurtosis_y),
            show(d.kurtosis_residual),
            show(d.symmetry_p),
        ));
    }
    out
}

pub fn run(args: Args) -> Result<()> {
    if !(args.confidence > 0.0 && args.confidence < 1.0) {
        return Err(Error::InvalidParameter(
            "--confidence must be in (0, 1)".into(),
        ));
    }
    let Dataset { diffs, .. } = read_csv_path(&args.input, csv_schema(args.schema))?;
    let alpha = 1.0 - args.confidence;
    let trim = parse_trim(&args.trim, diffs.len())?;

    let methods: Vec<Method> = match args.method {
        MethodArg::Auto => vec![
            Method::Empirical,
            Method::Sign,
            Method::Rank,
            Method::TrimmedMatch,
        ],
        MethodArg::Empirical => vec![Method::Empirical],
        MethodArg::Sign => vec![Method::Sign],
        MethodArg::Rank => vec![Method::Rank],
        MethodArg::Trimmed => vec![Method::TrimmedMatch],
    };

    let mut reports = Vec::with_capacity(methods.len());
    for method in methods {
        reports.push(report_with_retry(&diffs, method, trim, alpha, args.seed)?);
    }

    if args.rescale_by_point {
        // Table-style anonymization: divide every ratio by the trimmed
        // match point when present, else by the row's own point.
        let divisor = reports
            .iter()
            .find(|r| r.method == Method::TrimmedMatch)
            .map(|r| r.point);
        for r in &mut reports {
            let d = divisor.unwrap_or(r.point);
            if d != 0.0 {
                rescale(r, d);
            }
        }
    }

    match args.format {
        FormatArg::Json => {
            let json = if reports.len() == 1 {
                serde_json::to_string_pretty(&reports[0]).expect("report serializes")
            } else {
                serde_json::to_string_pretty(&reports).expect("reports serialize")
            };
            println!("{json}");
        }
        FormatArg::Table => print!("{}", render_table(&reports)),
    }
    Ok(())
}
