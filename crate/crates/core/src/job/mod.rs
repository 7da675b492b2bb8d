//! Config-driven jobs behind the `verify` command: single AMLS or naive Monte
//! Carlo runs, parameter sweeps, and the oracle self-test.

mod config;
mod report;
pub mod schema;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    InputModelDecl, JobConfig, JobKind, LinearTerm, NaiveMcSettings, OutputSettings, ProblemDecl,
    PropertyDecl, ResolvedProblem, SelftestSettings, SweepCell, SweepSettings, JOB_FORMAT_VERSION,
};
pub use report::{
    emit_counterexamples, read_counterexamples, EstimatorKind, NaiveSummary, Outcome, RunReport,
    REPORT_FORMAT_VERSION,
};

use crate::error::{Error, Result};
use crate::estimator::{amls_run, naive_mc, AmlsConfig};
use crate::oracle::OracleDecl;
use crate::seed::{derive_seed, stream};

pub const REPORT_FILE: &str = "report.json";
pub const COUNTEREXAMPLE_FILE: &str = "counterexamples.txt";
pub const SWEEP_TABLE_FILE: &str = "sweep_trace.csv";
pub const SELFTEST_FILE: &str = "selftest.txt";

/// Command-line overrides applied on top of a job file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum JobOutcome {
    Run { report: RunReport, out_dir: PathBuf },
    Sweep(SweepOutcome),
    Selftest(SelftestOutcome),
}

impl JobOutcome {
    /// False when a sweep cell diverged or a self-test check failed.
    pub fn success(&self) -> bool {
        match self {
            JobOutcome::Run { .. } => true,
            JobOutcome::Sweep(s) => s.diverged == 0,
            JobOutcome::Selftest(s) => s.all_passed(),
        }
    }
}

/// Loads, validates and executes the job in `config_path`, writing its
/// artifacts. A diverged single run writes its partial report and then
/// returns [`Error::Diverged`].
pub fn run_job(config_path: impl AsRef<Path>, opts: &RunOptions) -> Result<JobOutcome> {
    let config_path = config_path.as_ref();
    let mut cfg = JobConfig::load(config_path)?;
    let base_dir = config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out_dir = match &opts.out_dir {
        Some(d) => d.clone(),
        None => base_dir.join(&cfg.output.dir),
    };
    cfg.validate(&base_dir)?;
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    match cfg.job {
        JobKind::Amls => run_amls_job(cfg, &base_dir, &out_dir),
        JobKind::NaiveMc => run_naive_job(cfg, &base_dir, &out_dir),
        JobKind::Sweep => run_sweep(&cfg, &base_dir, &out_dir).map(JobOutcome::Sweep),
        JobKind::OracleSelftest => {
            let settings = cfg.selftest.clone().unwrap_or_default();
            let outcome = run_selftest(&settings, &cfg.amls, &cfg.naive_mc, cfg.seed)?;
            outcome.write(&out_dir)?;
            Ok(JobOutcome::Selftest(outcome))
        }
    }
}

fn run_amls_job(mut cfg: JobConfig, base_dir: &Path, out_dir: &Path) -> Result<JobOutcome> {
    let problem = cfg.build_problem(base_dir, None)?;
    cfg.amls = cfg.amls.resolved(&problem.model);
    let amls = AmlsConfig {
        seed: cfg.seed,
        ..cfg.amls.clone()
    };
    let start = Instant::now();
    let result = amls_run(&problem.model, &problem.spec, &amls);
    let elapsed = start.elapsed().as_secs_f64();
    let report_path = out_dir.join(REPORT_FILE);
    match result {
        Ok(result) => {
            let mut report = RunReport::for_amls(&problem.name, cfg, &result, elapsed);
            if result.counterexamples.is_some() {
                emit_counterexamples(&result, out_dir.join(COUNTEREXAMPLE_FILE))?;
                report.counterexamples = Some(COUNTEREXAMPLE_FILE.to_string());
            }
            report::write_json(&report_path, &report)?;
            Ok(JobOutcome::Run {
                report,
                out_dir: out_dir.to_path_buf(),
            })
        }
        Err(Error::Diverged(trace)) => {
            let report = RunReport::for_diverged(&problem.name, cfg, &trace, elapsed);
            report::write_json(&report_path, &report)?;
            Err(Error::Diverged(trace))
        }
        Err(e) => Err(e),
    }
}

fn run_naive_job(cfg: JobConfig, base_dir: &Path, out_dir: &Path) -> Result<JobOutcome> {
    let problem = cfg.build_problem(base_dir, None)?;
    let start = Instant::now();
    let result = naive_mc(
        &problem.model,
        &problem.spec,
        cfg.naive_mc.samples,
        cfg.naive_mc.batch_size,
        &mut stream(cfg.seed),
    )?;
    let report = RunReport::for_naive(&problem.name, cfg, &result, start.elapsed().as_secs_f64());
    report::write_json(&out_dir.join(REPORT_FILE), &report)?;
    Ok(JobOutcome::Run {
        report,
        out_dir: out_dir.to_path_buf(),
    })
}

/// One line of the long-format sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub quantile: f64,
    pub mh_steps: usize,
    pub n_chains: usize,
    pub radius: Option<f64>,
    pub repeat: usize,
    pub outcome: Outcome,
    pub n_levels: usize,
    pub evaluations: u64,
}

impl SweepRow {
    pub fn log10_estimate(&self) -> Option<f64> {
        self.outcome.log10()
    }

    fn csv_line(&self) -> String {
        let estimate = match self.outcome {
            Outcome::Estimate { log10_estimate, .. } => log10_estimate.to_string(),
            Outcome::UnsatBelowThreshold => "unsat".into(),
            Outcome::Diverged => "diverged".into(),
        };
        format!(
            "{},{},{},{},{},{},{},{}",
            self.quantile,
            self.mh_steps,
            self.n_chains,
            self.radius.map(|r| r.to_string()).unwrap_or_default(),
            self.repeat,
            estimate,
            self.n_levels,
            self.evaluations
        )
    }
}

pub const SWEEP_TABLE_HEADER: &str =
    "rho,mh_steps,n_chains,epsilon,repeat,log10_estimate,levels,evaluations";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: SweepCell,
    pub runs: Vec<RunReport>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellReport>,
    pub diverged: usize,
    /// Natural-log truth when the problem is an oracle.
    pub log_true_prob: Option<f64>,
}

impl SweepOutcome {
    pub fn table(&self) -> String {
        let mut out = String::from(SWEEP_TABLE_HEADER);
        out.push('\n');
        for row in &self.rows {
            writeln!(out, "{}", row.csv_line()).expect("writing to a String");
        }
        out
    }
}

/// Runs every cell of the sweep grid `repeats` times. Each run gets a seed
/// derived from the job seed, the cell index and the repeat number; reports
/// are written after all runs finish.
pub fn run_sweep(cfg: &JobConfig, base_dir: &Path, out_dir: &Path) -> Result<SweepOutcome> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep: required for sweep jobs".into()))?;
    let cells = cfg.sweep_cells();
    let problems = cells
        .iter()
        .map(|c| cfg.build_problem(base_dir, c.radius))
        .collect::<Result<Vec<_>>>()?;
    let log_true_prob = problems.first().and_then(|p| p.log_true_prob);

    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..sweep.repeats).map(move |r| (c, r)))
        .collect();
    let runs = tasks
        .par_iter()
        .map(|&(c, repeat)| {
            let cell = &cells[c];
            let problem = &problems[c];
            let seed = derive_seed(cfg.seed, &[cell.index as u64, repeat as u64]);
            let amls = cell.amls_config(&cfg.amls, seed);
            let mut echo = cfg.clone();
            echo.job = JobKind::Amls;
            echo.sweep = None;
            echo.seed = seed;
            echo.amls = amls.resolved(&problem.model);
            if let (Some(r), Some(ProblemDecl::Custom { input_model, .. })) =
                (cell.radius, echo.problem.as_mut())
            {
                if let InputModelDecl::UniformLinfBall { radius, .. } = input_model {
                    *radius = r;
                }
            }
            let start = Instant::now();
            let result = amls_run(&problem.model, &problem.spec, &amls);
            let elapsed = start.elapsed().as_secs_f64();
            match result {
                Ok(r) => Ok(RunReport::for_amls(&problem.name, echo, &r, elapsed)),
                Err(Error::Diverged(t)) => Ok(RunReport::for_diverged(&problem.name, echo, &t, elapsed)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<RunReport>>>()?;

    let mut rows = Vec::with_capacity(runs.len());
    let mut cell_reports: Vec<CellReport> = cells
        .iter()
        .map(|&cell| CellReport {
            cell,
            runs: Vec::new(),
        })
        .collect();
    let mut diverged = 0;
    for (&(c, repeat), report) in tasks.iter().zip(runs) {
        let cell = &cells[c];
        if report.outcome == Outcome::Diverged {
            diverged += 1;
        }
        rows.push(SweepRow {
            quantile: cell.quantile,
            mh_steps: cell.mh_steps,
            n_chains: cell.n_chains,
            radius: cell.radius,
            repeat,
            outcome: report.outcome,
            n_levels: report.n_levels.unwrap_or(0),
            evaluations: report.property_evaluations,
        });
        cell_reports[c].runs.push(report);
    }
    let outcome = SweepOutcome {
        rows,
        cells: cell_reports,
        diverged,
        log_true_prob,
    };
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for cell in &outcome.cells {
        report::write_json(&out_dir.join(format!("cell_{:03}.json", cell.cell.index)), cell)?;
    }
    let table_path = out_dir.join(SWEEP_TABLE_FILE);
    fs::write(&table_path, outcome.table()).map_err(|e| Error::io(&table_path, e))?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub oracle: String,
    pub log10_truth: Option<f64>,
    pub amls: Outcome,
    pub naive_mc: Option<NaiveSummary>,
    pub passed: bool,
    pub detail: String,
}

impl OracleCheck {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.oracle,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestOutcome {
    pub checks: Vec<OracleCheck>,
}

impl SelftestOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks.iter().map(OracleCheck::line).collect()
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(SELFTEST_FILE);
        let mut text = self.lines().join("\n");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Settings used by `verify selftest` when no job file is given.
pub fn default_selftest_amls() -> AmlsConfig {
    AmlsConfig::new(2000, 100, 0.1, (1e-30f64).ln(), 0)
}

/// Checks both estimators against every oracle in `settings` (the full
/// roster when empty).
///
/// AMLS must land within `log10_tolerance` of the truth, or return the
/// floor verdict for impossible events. Naive MC must land within
/// `naive_sigmas` standard errors on oracles with probability at least
/// `naive_min_prob`, and hit nothing on impossible ones.
pub fn run_selftest(
    settings: &SelftestSettings,
    amls: &AmlsConfig,
    naive: &NaiveMcSettings,
    seed: u64,
) -> Result<SelftestOutcome> {
    let oracles = if settings.oracles.is_empty() {
        OracleDecl::roster()
    } else {
        settings.oracles.clone()
    };
    let mut checks = Vec::with_capacity(oracles.len());
    for (i, decl) in oracles.iter().enumerate() {
        let problem = decl.build()?;
        let truth = problem.log_true_prob;
        let run_cfg = AmlsConfig {
            seed: derive_seed(seed, &[i as u64, 0]),
            ..amls.clone()
        };
        let outcome: Outcome = match amls_run(&problem.model, &problem.spec, &run_cfg) {
            Ok(r) => r.log_estimate.into(),
            Err(Error::Diverged(_)) => Outcome::Diverged,
            Err(e) => return Err(e),
        };
        let mut passed;
        let mut detail;
        let log10_truth = truth.is_finite().then(|| truth / std::f64::consts::LN_10);
        match (log10_truth, outcome) {
            (None, Outcome::UnsatBelowThreshold) => {
                passed = true;
                detail = "amls unsat below threshold (truth: impossible)".to_string();
            }
            (Some(t), Outcome::Estimate { log10_estimate, .. }) => {
                let err = (log10_estimate - t).abs();
                passed = err <= settings.log10_tolerance;
                detail = format!("amls log10 {log10_estimate:.4} vs truth {t:.4} (|err| {err:.4})");
            }
            (t, o) => {
                passed = false;
                detail = format!("amls outcome {o:?} does not match truth {t:?}");
            }
        }

        let true_prob = truth.exp();
        let naive_summary = if truth == f64::NEG_INFINITY || true_prob >= settings.naive_min_prob {
            let r = naive_mc(
                &problem.model,
                &problem.spec,
                naive.samples,
                naive.batch_size,
                &mut stream(derive_seed(seed, &[i as u64, 1])),
            )?;
            if truth == f64::NEG_INFINITY {
                let ok = r.hits == 0;
                passed &= ok;
                write!(detail, "; naive {} hits", r.hits).expect("writing to a String");
            } else {
                let se = (true_prob * (1.0 - true_prob) / r.samples as f64).sqrt();
                let z = (r.estimate() - true_prob) / se;
                passed &= z.abs() <= settings.naive_sigmas;
                write!(detail, "; naive {:.6e} vs {:.6e} ({z:+.2} se)", r.estimate(), true_prob)
                    .expect("writing to a String");
            }
            Some(NaiveSummary::from(&r))
        } else {
            None
        };
        checks.push(OracleCheck {
            oracle: problem.name,
            log10_truth,
            amls: outcome,
            naive_mc: naive_summary,
            passed,
            detail,
        });
    }
    Ok(SelftestOutcome { checks })
}
