//! Batch runs over problems, policies and seeds.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::Context;
use dqlos_core::host::make_host;
use dqlos_core::indicators::{HV_SENTINEL, IGD_PLUS_SENTINEL};
use dqlos_core::problems::{nondominated_filter, BuiltinProblem};
use dqlos_core::{make_problem, run, PolicyMode, RunResult};
use rayon::prelude::*;

use crate::config::SuiteConfig;
use crate::output::{objective_header, point_rows, trace_rows, write_csv, Cell, TRACE_HEADER};
use crate::stats::{average_ranks, iqr, median};

pub const SUMMARY_HEADER: [&str; 9] = [
    "problem",
    "policy",
    "runs",
    "failures",
    "igd_plus_median",
    "igd_plus_iqr",
    "hv_median",
    "hv_iqr",
    "rank",
];

pub const RUNS_HEADER: [&str; 9] = [
    "problem", "policy", "seed", "status", "igd_plus", "hv", "ga_uses", "de_uses", "sessions",
];

/// Label of the aggregate rows in the summary.
pub const ALL_PROBLEMS: &str = "ALL";

/// File-name friendly policy label (`fixed:ga` becomes `fixed-ga`).
pub fn policy_slug(policy: PolicyMode) -> String {
    policy.to_string().replace(':', "-")
}

pub fn run_stem(problem: BuiltinProblem, policy: PolicyMode, seed: u64) -> String {
    format!("{problem}_{}_seed{seed}", policy_slug(policy))
}

/// Final metrics of one suite cell.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub problem: BuiltinProblem,
    pub policy: PolicyMode,
    pub seed: u64,
    /// Final IGD+ with the no-feasible sentinel substituted.
    pub igd_plus: f64,
    pub hv: f64,
    pub usage: [usize; 2],
    pub sessions: usize,
    pub elapsed: Duration,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub problem: String,
    pub policy: PolicyMode,
    pub runs: usize,
    pub failures: usize,
    pub igd_median: f64,
    pub igd_iqr: f64,
    pub hv_median: f64,
    pub hv_iqr: f64,
    pub rank: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub outcomes: Vec<RunOutcome>,
    pub summary: Vec<SummaryRow>,
    /// Sum of per-run wall times, i.e. the single-core cost of the suite.
    pub total_run_time: Duration,
    pub out_dir: PathBuf,
}

impl SuiteReport {
    /// Average rank across problems of `policy`.
    pub fn average_rank(&self, policy: PolicyMode) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.problem == ALL_PROBLEMS && r.policy == policy)
            .map(|r| r.rank)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RunOutcome> {
        self.outcomes.iter().filter(|o| o.error.is_some())
    }
}

/// Runs one cell and returns the result with its final nondominated feasible front.
pub fn run_single(
    cfg: &SuiteConfig,
    problem: BuiltinProblem,
    policy: PolicyMode,
    seed: u64,
) -> anyhow::Result<(RunResult, Vec<Vec<f64>>)> {
    let spec = make_problem(problem.name(), cfg.dim)?;
    let mut host = make_host(&cfg.host)?;
    let result = run(host.as_mut(), &spec, &cfg.run_config(policy, seed))?;
    let front = nondominated_filter(result.final_population.feasible_objectives());
    Ok((result, front))
}

fn final_metrics(result: &RunResult) -> (f64, f64) {
    let last = result.trace.last();
    let igd = last.map_or(f64::NAN, |r| r.igd_plus);
    let hv = last.map_or(f64::NAN, |r| r.hv);
    (
        if igd.is_nan() { IGD_PLUS_SENTINEL } else { igd },
        if hv.is_nan() { HV_SENTINEL } else { hv },
    )
}

fn execute(cfg: &SuiteConfig, out: &Path, problem: BuiltinProblem, policy: PolicyMode, seed: u64) -> RunOutcome {
    let start = Instant::now();
    let stem = run_stem(problem, policy, seed);
    let attempt = run_single(cfg, problem, policy, seed).and_then(|(result, front)| {
        write_csv(&out.join("traces").join(format!("{stem}.csv")), &TRACE_HEADER, &trace_rows(&result.trace))?;
        let header = objective_header(2);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(&out.join("fronts").join(format!("{stem}.csv")), &header, &point_rows(&front))?;
        Ok(result)
    });
    let mut outcome = RunOutcome {
        problem,
        policy,
        seed,
        igd_plus: IGD_PLUS_SENTINEL,
        hv: HV_SENTINEL,
        usage: [0, 0],
        sessions: 0,
        elapsed: Duration::ZERO,
        error: None,
    };
    match attempt {
        Ok(result) => {
            (outcome.igd_plus, outcome.hv) = final_metrics(&result);
            outcome.usage = result.usage;
            outcome.sessions = result.training_sessions;
        }
        Err(e) => outcome.error = Some(format!("{e:#}")),
    }
    outcome.elapsed = start.elapsed();
    outcome
}

/// Medians, IQRs and per-problem ranks, followed by one aggregate row per policy.
pub fn summarize(cfg: &SuiteConfig, outcomes: &[RunOutcome]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    let mut rank_sums = vec![0.0; cfg.policies.len()];
    for &problem in &cfg.problems {
        let start = rows.len();
        for &policy in &cfg.policies {
            let cell: Vec<&RunOutcome> = outcomes
                .iter()
                .filter(|o| o.problem == problem && o.policy == policy)
                .collect();
            let ok: Vec<&RunOutcome> = cell.iter().copied().filter(|o| o.error.is_none()).collect();
            let igd: Vec<f64> = ok.iter().map(|o| o.igd_plus).collect();
            let hv: Vec<f64> = ok.iter().map(|o| o.hv).collect();
            rows.push(SummaryRow {
                problem: problem.to_string(),
                policy,
                runs: cell.len(),
                failures: cell.len() - ok.len(),
                igd_median: median(&igd),
                igd_iqr: iqr(&igd),
                hv_median: median(&hv),
                hv_iqr: iqr(&hv),
                rank: f64::NAN,
            });
        }
        let medians: Vec<f64> = rows[start..].iter().map(|r| r.igd_median).collect();
        for (k, rank) in average_ranks(&medians).into_iter().enumerate() {
            rows[start + k].rank = rank;
            rank_sums[k] += rank;
        }
    }
    for (k, &policy) in cfg.policies.iter().enumerate() {
        let mine: Vec<&SummaryRow> = rows.iter().filter(|r| r.policy == policy).collect();
        rows.push(SummaryRow {
            problem: ALL_PROBLEMS.to_string(),
            policy,
            runs: mine.iter().map(|r| r.runs).sum(),
            failures: mine.iter().map(|r| r.failures).sum(),
            igd_median: f64::NAN,
            igd_iqr: f64::NAN,
            hv_median: f64::NAN,
            hv_iqr: f64::NAN,
            rank: rank_sums[k] / cfg.problems.len() as f64,
        });
    }
    rows
}

fn summary_cells(rows: &[SummaryRow]) -> Vec<Vec<Cell>> {
    rows.iter()
        .map(|r| {
            vec![
                r.problem.clone().into(),
                r.policy.to_string().into(),
                r.runs.into(),
                r.failures.into(),
                r.igd_median.into(),
                r.igd_iqr.into(),
                r.hv_median.into(),
                r.hv_iqr.into(),
                r.rank.into(),
            ]
        })
        .collect()
}

fn run_cells(outcomes: &[RunOutcome]) -> Vec<Vec<Cell>> {
    outcomes
        .iter()
        .map(|o| {
            vec![
                o.problem.to_string().into(),
                o.policy.to_string().into(),
                Cell::Int(o.seed),
                o.error.as_deref().map_or("ok".to_string(), |e| format!("failed: {e}")).into(),
                o.igd_plus.into(),
                o.hv.into(),
                o.usage[0].into(),
                o.usage[1].into(),
                o.sessions.into(),
            ]
        })
        .collect()
}

/// Runs every (problem, policy, seed) cell on the current rayon pool and
/// writes traces, fronts, `runs.csv` and `summary.csv` under `cfg.out`.
pub fn run_suite(cfg: &SuiteConfig) -> anyhow::Result<SuiteReport> {
    cfg.validate()?;
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let jobs: Vec<(BuiltinProblem, PolicyMode, u64)> = cfg
        .problems
        .iter()
        .flat_map(|&p| cfg.policies.iter().flat_map(move |&q| cfg.seeds.iter().map(move |&s| (p, q, s))))
        .collect();
    let outcomes: Vec<RunOutcome> = jobs
        .par_iter()
        .map(|&(problem, policy, seed)| execute(cfg, &out, problem, policy, seed))
        .collect();
    let summary = summarize(cfg, &outcomes);
    write_csv(&out.join("runs.csv"), &RUNS_HEADER, &run_cells(&outcomes))?;
    write_csv(&out.join("summary.csv"), &SUMMARY_HEADER, &summary_cells(&summary))?;
    Ok(SuiteReport {
        total_run_time: outcomes.iter().map(|o| o.elapsed).sum(),
        outcomes,
        summary,
        out_dir: out,
    })
}
