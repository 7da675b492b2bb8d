use std::path::PathBuf;
use std::process::ExitCode;

use amls::job::{self, JobOutcome, Outcome, RunOptions};
use amls::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "verify", version, about = "Estimate how often a network property is violated")]
struct Cli {
    /// Override the seed in the job file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (defaults to the job file's `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the job described by a job file.
    Run { config: PathBuf },
    /// Run a sweep job file.
    Sweep { config: PathBuf },
    /// Check both estimators against the built-in oracle problems.
    Selftest,
    /// Print JSON schemas for the weight file and the job file.
    ExportSchema,
}

fn report(outcome: &JobOutcome, quiet: bool) {
    match outcome {
        JobOutcome::Run { report, out_dir } => {
            if quiet {
                return;
            }
            match report.outcome {
                Outcome::Estimate {
                    log_estimate,
                    log10_estimate,
                } => println!(
                    "{}: ln I = {log_estimate:.6}, log10 I = {log10_estimate:.6}",
                    report.problem
                ),
                Outcome::UnsatBelowThreshold => {
                    println!("{}: unsat-below-threshold", report.problem)
                }
                Outcome::Diverged => println!("{}: diverged", report.problem),
            }
            if let Some(k) = report.n_levels {
                println!("levels: {k}");
            }
            println!(
                "property evaluations: {}, wall time {:.2}s",
                report.property_evaluations, report.wall_time_secs
            );
            println!("wrote {}", out_dir.join(job::REPORT_FILE).display());
        }
        JobOutcome::Sweep(s) => {
            if !quiet {
                println!(
                    "{} runs over {} cells, {} diverged",
                    s.rows.len(),
                    s.cells.len(),
                    s.diverged
                );
            }
        }
        JobOutcome::Selftest(s) => {
            if !quiet {
                for line in s.lines() {
                    println!("{line}");
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        seed: cli.seed,
        out_dir: cli.out.clone(),
    };
    let result = match &cli.command {
        Command::Run { config } => job::run_job(config, &opts),
        Command::Sweep { config } => match job::JobConfig::load(config) {
            Ok(cfg) if cfg.job != job::JobKind::Sweep => Err(Error::Config(
                "job: `verify sweep` needs a job file with \"job\": \"sweep\"".into(),
            )),
            Ok(_) => job::run_job(config, &opts),
            Err(e) => Err(e),
        },
        Command::Selftest => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let amls = job::default_selftest_amls();
            job::run_selftest(
                &Default::default(),
                &amls,
                &Default::default(),
                cli.seed.unwrap_or(0),
            )
            .and_then(|s| {
                std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                    path: out.clone(),
                    source: e,
                })?;
                s.write(&out)?;
                Ok(JobOutcome::Selftest(s))
            })
        }
        Command::ExportSchema => {
            println!(
                "{}",
                serde_json::to_string_pretty(&job::schema::all_schemas()).expect("schema serializes")
            );
            return ExitCode::SUCCESS;
        }
    };
    match result {
        Ok(outcome) => {
            report(&outcome, cli.quiet);
            if outcome.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Diverged(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
