//! The simulate subcommand: run the scenario grid (or the δ sweep) and
//! write summary files.

use std::io::Write;

use tm_sim::config::SimConfigFile;
use tm_sim::output;
use tm_sim::{run_scenario, sensitivity_sweep, ScenarioSummary};
use trimmed_match::{Error, Result};

pub struct Args {
    pub config: std::path::PathBuf,
    pub out_dir: std::path::PathBuf,
    pub sweep_delta: Option<String>,
    pub threads: usize,
}

fn parse_deltas(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|tok| {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad delta value '{tok}'")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "delta must be in [0, 1], got {v}"
                )));
            }
            Ok(v)
        })
        .collect()
}

fn write_file(dir: &std::path::Path, name: &str, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(dir.join(name))?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

pub fn run(args: Args) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let request = SimConfigFile::parse(&text)?.expand()?;
    let deltas = args.sweep_delta.as_deref().map(parse_deltas).transpose()?;
    std::fs::create_dir_all(&args.out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;

    let summaries: Vec<ScenarioSummary> = pool.install(|| -> Result<_> {
        let mut all = Vec::new();
        for scenario in &request.scenarios {
            match &deltas {
                Some(grid) => {
                    all.extend(sensitivity_sweep(
                        scenario,
                        grid,
                        &request.estimators,
                        request.alpha,
                    )?);
                }
                None => all.push(run_scenario(scenario, &request.estimators, request.alpha)?),
            }
        }
        Ok(all)
    })?;

    write_file(&args.out_dir, "rmse_bias.csv", &output::rmse_bias_csv(&summaries))?;
    write_file(
        &args.out_dir,
        "power_coverage.csv",
        &output::power_coverage_csv(&summaries),
    )?;
    write_file(&args.out_dir, "summary.json", &output::summary_json(&summaries))?;
    if deltas.is_some() {
        write_file(&args.out_dir, "sweep.csv", &output::sweep_csv(&summaries))?;
    }

    print!("{}", output::render_rmse_table(&summaries));
    println!();
    print!("{}", output::render_power_table(&summaries));
    Ok(())
}
