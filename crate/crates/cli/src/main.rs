use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dqlos_cli::output::{trace_rows, write_csv, write_points, TRACE_HEADER};
use dqlos_cli::suite::run_stem;
use dqlos_cli::{parse_config, run_single, run_suite, SuiteConfig};
use dqlos_core::problems::BuiltinProblem;
use dqlos_core::qnet::{gradient_check_with_step, init_network, GRADIENT_CHECK_STEP};
use dqlos_core::{analytic_front, grid_oracle_front, make_problem, PolicyMode, RunRng};
use rand::{Rng, SeedableRng};

#[derive(Parser)]
#[command(name = "dqlos", version, about = "Q-learning operator selection for constrained multi-objective evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem with one policy and seed.
    Run(RunArgs),
    /// Run every problem, policy and seed of a configuration.
    Suite(SuiteArgs),
    /// Write a reference front as CSV.
    Oracle(OracleArgs),
    /// Compare backpropagation with finite differences on random networks.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "CP1")]
    problem: BuiltinProblem,
    #[arg(long)]
    host: Option<String>,
    /// drl, random, fixed:ga or fixed:de
    #[arg(long, default_value = "drl")]
    policy: PolicyMode,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    gens: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    dim: Option<usize>,
    /// Configuration file supplying the remaining knobs.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the trace and front CSVs; the trace goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the final network weights to this file.
    #[arg(long)]
    dump_net: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value = "CP1")]
    problem: BuiltinProblem,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Grid points per dimension.
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Sample the analytic front instead of enumerating a grid.
    #[arg(long)]
    analytic: bool,
    /// Output file; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 10)]
    configs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn load_config(path: Option<&PathBuf>) -> Result<SuiteConfig> {
    match path {
        None => Ok(SuiteConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            parse_config(&text).with_context(|| format!("in {}", p.display()))
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(host) = args.host {
        cfg.host = host;
    }
    if let Some(pop) = args.pop {
        cfg.pop_size = pop;
    }
    if let Some(gens) = args.gens {
        cfg.generations = gens;
    }
    if let Some(dim) = args.dim {
        cfg.dim = dim;
    }
    let (result, front) = run_single(&cfg, args.problem, args.policy, args.seed)?;
    match &args.out {
        Some(dir) => {
            let stem = run_stem(args.problem, args.policy, args.seed);
            write_csv(&dir.join(format!("{stem}_trace.csv")), &TRACE_HEADER, &trace_rows(&result.trace))?;
            let mut file = fs::File::create(dir.join(format!("{stem}_front.csv")))?;
            write_points(&mut file, &front, 2)?;
        }
        None => dqlos_cli::output::write_rows(io::stdout().lock(), &TRACE_HEADER, &trace_rows(&result.trace))?,
    }
    if let Some(path) = &args.dump_net {
        match &result.model {
            Some(model) => fs::write(path, model.network.dump())?,
            None => bail!("no network was trained in this run"),
        }
    }
    let last = result.trace.last().expect("at least one generation");
    eprintln!(
        "{} {} seed {}: igd+ {} hv {} | GA {} DE {} | {} training sessions",
        args.problem,
        args.policy,
        args.seed,
        last.igd_plus,
        last.hv,
        result.usage[0],
        result.usage[1],
        result.training_sessions
    );
    Ok(())
}

fn cmd_suite(args: SuiteArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(out) = args.out {
        cfg.out = out;
    }
    let report = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| run_suite(&cfg))?,
        None => run_suite(&cfg)?,
    };
    let mut err = io::stderr().lock();
    for f in report.failures() {
        writeln!(err, "failed: {} {} seed {}: {}", f.problem, f.policy, f.seed, f.error.as_deref().unwrap_or(""))?;
    }
    for &policy in &cfg.policies {
        if let Some(rank) = report.average_rank(policy) {
            writeln!(err, "{policy:>10}  average rank {rank:.3}")?;
        }
    }
    writeln!(
        err,
        "{} runs, {:.1} s of run time, results in {}",
        report.outcomes.len(),
        report.total_run_time.as_secs_f64(),
        report.out_dir.display()
    )?;
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let spec = make_problem(args.problem.name(), args.dim)?;
    let front = if args.analytic {
        analytic_front(&spec, args.points)?
    } else {
        grid_oracle_front(&spec, args.points)?
    };
    match args.out {
        Some(path) => write_points(fs::File::create(&path)?, &front.points, 2)?,
        None => write_points(io::stdout().lock(), &front.points, 2)?,
    }
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<bool> {
    let mut rng = RunRng::seed_from_u64(args.seed);
    let mut worst: f64 = 0.0;
    for i in 0..args.configs {
        let net = init_network(&mut rng);
        let input: Vec<f64> = (0..4).map(|_| rng.gen()).collect();
        let target: f64 = rng.gen_range(-1.0..1.0);
        let report = gradient_check_with_step(&net, &input, target, GRADIENT_CHECK_STEP);
        println!(
            "config {i}: max relative error {:.3e} ({} checked, {} skipped at kinks)",
            report.max_relative_error, report.checked, report.skipped
        );
        worst = worst.max(report.max_relative_error);
    }
    let ok = worst < args.tolerance;
    println!("worst {worst:.3e}: {}", if ok { "pass" } else { "FAIL" });
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Suite(a) => cmd_suite(a).map(|_| true),
        Command::Oracle(a) => cmd_oracle(a).map(|_| true),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
