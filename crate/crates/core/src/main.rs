use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fixedpoint::cli::{
    self, compare_csv, oracle_request, run_suites, RunOverrides, SuiteOutcome,
};

/// Anchored fixed-point iteration toolkit.
#[derive(Parser)]
#[command(name = "fixedpoint", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonRunArgs {
    /// Problem spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for trace and summary files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed recorded in reports and used by any sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the problem file's step budget.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Override the problem file's target tolerance (distance to the oracle limit).
    #[arg(long)]
    tol: Option<f64>,
    /// Override the problem file's iterate snapshot stride.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a problem spec and write trace.csv plus summary.json.
    Run(CommonRunArgs),
    /// Run a named verification suite (sns, nst, lemmas, oracle-crosscheck, all).
    Verify {
        /// Suite name.
        suite: String,
        /// Directory to drop one JSON report per suite into.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Probe seed.
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Sweep anchor-coefficient schedules over one problem.
    Compare {
        /// Problem spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Schedule spec (JSON), repeatable.
        #[arg(long = "schedule", required = true)]
        schedules: Vec<String>,
        /// Where to write the comparison matrix CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Step budget per schedule.
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Answer an oracle request (projection or scalar resolvent).
    Oracle {
        /// Request file (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Optional path for the JSON result (stdout either way).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FIXEDPOINT_LOG")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> fixedpoint::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let overrides = RunOverrides {
                seed: args.seed,
                max_iters: args.max_iters,
                tol: args.tol,
                stride: args.stride,
            };
            let outcome = cli::run(&args.spec, &args.out, &overrides)?;
            let summary = outcome.trace.summary();
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(ExitCode::from(outcome.exit_code as u8))
        }
        Command::Verify { suite, out, seed } => {
            let outcomes = run_suites(&suite, seed)?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
            }
            let mut all_pass = true;
            for outcome in &outcomes {
                print_suite(outcome);
                all_pass &= outcome.pass;
                if let Some(dir) = &out {
                    let path = dir.join(format!("verify_{}.json", outcome.suite));
                    std::fs::write(&path, serde_json::to_string_pretty(outcome)?)?;
                }
            }
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Compare { spec, schedules, out, max_iters } => {
            let rows = cli::compare(&spec, &schedules, max_iters)?;
            let csv = compare_csv(&rows);
            print!("{csv}");
            if let Some(path) = out {
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
                std::fs::write(path, csv)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { spec, out } => {
            let result = oracle_request(&spec)?;
            let json = serde_json::to_string_pretty(&result)?;
            println!("{json}");
            if let Some(path) = out {
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
                std::fs::write(path, json)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_suite(outcome: &SuiteOutcome) {
    println!(
        "suite {}: {}",
        outcome.suite,
        if outcome.pass { "PASS" } else { "FAIL" }
    );
    for entry in &outcome.entries {
        let status = match (entry.report.pass, entry.expected_pass) {
            (true, true) => "pass",
            (false, false) => "fail (as required)",
            (true, false) => "PASSED BUT EXPECTED TO FAIL",
            (false, true) => "FAIL",
        };
        println!(
            "  {:<55} {:<28} worst {:.3e} (tol {:.3e})",
            entry.report.property, status, entry.report.worst_violation, entry.report.tolerance
        );
    }
}
