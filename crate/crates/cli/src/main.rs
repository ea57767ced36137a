//! Command-line front end: analyze experiment data, trace the trim-rate
//! band, and run the simulation harness.
//!
//! Exit codes: 0 success, 2 data/configuration error, 3 estimation failure.

use clap::{Parser, Subcommand, ValueEnum};
use trimmed_match::Error;

mod analyze;
mod band;
mod simulate;

#[derive(Parser)]
#[command(
    name = "trimmed-match",
    version,
    about = "Robust effect-ratio (iROAS) estimation for randomized paired experiments",
    after_help = "Examples:\n  \
        trimmed-match analyze --input pairs.csv --method auto\n  \
        trimmed-match analyze --input geos.csv --schema geo-level --method trimmed --trim 0.1 --format json\n  \
        trimmed-match band --input pairs.csv --lambda-max 0.25 > band.csv\n  \
        trimmed-match simulate --config scenarios.toml --out-dir results/"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemaArg {
    /// One row per pair: header `pair,x,y`.
    Paired,
    /// Two rows per pair: header `geo,pair,assignment,spend,response`.
    GeoLevel,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// All four estimators, one report each.
    Auto,
    Empirical,
    Sign,
    Rank,
    Trimmed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Table,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the effect ratio from experiment data, with diagnostics.
    Analyze {
        /// Input CSV path.
        #[arg(long)]
        input: std::path::PathBuf,
        #[arg(long, value_enum, default_value = "paired")]
        schema: SchemaArg,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        /// Trim rate for the trimmed-match method: `auto` or a fixed rate
        /// like `0.1` (requires n − 2⌈nλ⌉ ≥ 2).
        #[arg(long, default_value = "auto")]
        trim: String,
        /// Confidence level for intervals.
        #[arg(long, default_value_t = 0.90)]
        confidence: f64,
        #[arg(long, value_enum, default_value = "table")]
        format: FormatArg,
        /// Seed for tie perturbation.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Divide reported ratios by the point estimate (anonymized
        /// presentation).
        #[arg(long)]
        rescale_by_point: bool,
    },
    /// Trimmed-match point estimate and CI for every feasible trim rate.
    Band {
        #[arg(long)]
        input: std::path::PathBuf,
        #[arg(long, value_enum, default_value = "paired")]
        schema: SchemaArg,
        /// Largest trim rate to tabulate.
        #[arg(long, default_value_t = 0.25)]
        lambda_max: f64,
        #[arg(long, default_value_t = 0.90)]
        confidence: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        output: Option<std::path::PathBuf>,
    },
    /// Run simulation scenarios from a TOML config.
    Simulate {
        #[arg(long)]
        config: std::path::PathBuf,
        /// Directory for the emitted CSV/JSON files.
        #[arg(long)]
        out_dir: std::path::PathBuf,
        /// Dispersion grid, e.g. `0,0.25,0.5,0.75,1`; runs the sweep mode.
        #[arg(long)]
        sweep_delta: Option<String>,
        /// Worker threads (0 = automatic). Results are identical for any
        /// value.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::UnidentifiedRatio(_)
        | Error::UnboundedEstimate { .. }
        | Error::NoRoot { .. }
        | Error::DegenerateInterval
        | Error::SelectionFailed
        | Error::ZeroVariance => 3,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze {
            input,
            schema,
            method,
            trim,
            confidence,
            format,
            seed,
            rescale_by_point,
        } => analyze::run(analyze::Args {
            input,
            schema,
            method,
            trim,
            confidence,
            format,
            seed,
            rescale_by_point,
        }),
        Command::Band {
            input,
            schema,
            lambda_max,
            confidence,
            seed,
            output,
        } => band::run(band::Args {
            input,
            schema,
            lambda_max,
            confidence,
            seed,
            output,
        }),
        Command::Simulate {
            config,
            out_dir,
            sweep_delta,
            threads,
        } => simulate::run(simulate::Args {
            config,
            out_dir,
            sweep_delta,
            threads,
        }),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code_for(&err));
    }
}
