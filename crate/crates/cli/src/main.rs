use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coalsim_core::harness::acceptance::{run_acceptance, DEFAULT_SEED};
use coalsim_core::harness::{run, write_outputs, ExperimentConfig, ExperimentKind, Row, TestReport};
use coalsim_core::Error;

#[derive(Parser)]
#[command(name = "coalsim", version, about = "Run coalescing-superprocess experiments and write results.csv and summary.json")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Feller or squared Bessel sampler against its exact law.
    Sample(RunArgs),
    /// Forward vs backward lattice walks and the exact array law.
    DualityLattice(RunArgs),
    /// Forward vs backward coalescing Brownian motions.
    DualityBm(RunArgs),
    /// Laplace functional of the particle system against its dual.
    ScsmLaplace(RunArgs),
    /// First and second moments against the dual expressions.
    Moments(RunArgs),
    /// Evaluate a closed-form law, optionally against a reference or the particle system.
    ClosedForm(RunArgs),
    /// Hitting statistics along paths against the laws of T, tau and F.
    PathStats(RunArgs),
    /// Flow construction against the particle system.
    FlowCompare(RunArgs),
    /// Avoidance probability against the dual.
    CoxAvoidance(RunArgs),
    /// BESQ-driven system against its finite and limiting duals.
    BesqDuality(RunArgs),
    /// Run every acceptance criterion.
    Acceptance(AcceptanceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Output directory; overrides the config. Defaults to `coalsim-out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    workers: Option<usize>,
    /// Leave the `seconds` column empty so that reruns give byte-identical CSV.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct AcceptanceArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "coalsim-out")]
    out: PathBuf,
    /// Comma-separated subset, e.g. `AC-1,AC-4`.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Command {
    fn kind(&self) -> Option<ExperimentKind> {
        Some(match self {
            Command::Sample(_) => ExperimentKind::Sample,
            Command::DualityLattice(_) => ExperimentKind::DualityLattice,
            Command::DualityBm(_) => ExperimentKind::DualityBm,
            Command::ScsmLaplace(_) => ExperimentKind::ScsmLaplace,
            Command::Moments(_) => ExperimentKind::Moments,
            Command::ClosedForm(_) => ExperimentKind::ClosedForm,
            Command::PathStats(_) => ExperimentKind::PathStats,
            Command::FlowCompare(_) => ExperimentKind::FlowCompare,
            Command::CoxAvoidance(_) => ExperimentKind::CoxAvoidance,
            Command::BesqDuality(_) => ExperimentKind::BesqDuality,
            Command::Acceptance(_) => return None,
        })
    }
}

fn set_workers(workers: Option<usize>) -> Result<(), Error> {
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidState(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn print_rows(rows: &[Row]) {
    for r in rows {
        println!(
            "{:<5} {:<58} a={:<10.6} b={:<10} stat={:<10.4} thr={:.4}",
            if r.pass { "ok" } else { "FAIL" },
            r.comparison,
            r.estimate_a,
            fmt_opt(r.estimate_b),
            r.statistic,
            r.threshold
        );
    }
}

fn run_experiment(kind: ExperimentKind, a: &RunArgs) -> Result<TestReport, Error> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| Error::Config { path: "config".into(), message: format!("{}: {e}", a.config.display()) })?;
    let mut cfg = ExperimentConfig::from_json(Some(kind), &text)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.replicates {
        if n < 2 {
            return Err(Error::Config { path: "replicates".into(), message: format!("must be >= 2, got {n}") });
        }
        cfg.replicates = n;
    }
    cfg.out = Some(a.out.clone().or(cfg.out).unwrap_or_else(|| "coalsim-out".into()));
    cfg.timing = !a.no_timing;
    set_workers(a.workers)?;
    run(&cfg)
}

fn run_suite(a: &AcceptanceArgs) -> Result<bool, Error> {
    set_workers(a.workers)?;
    let results = run_acceptance(a.seed, &a.only, |r| println!("{}", r.line()));
    if results.is_empty() {
        return Err(Error::Config { path: "only".into(), message: "no criterion matches".into() });
    }
    let reports: Vec<TestReport> = results.iter().map(|r| r.report(a.seed)).collect();
    write_outputs(&a.out, &reports)?;
    let passed = results.iter().filter(|r| r.pass()).count();
    println!("{passed} of {} criteria passed; results in {}", results.len(), a.out.display());
    Ok(passed == results.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match (&cli.command, cli.command.kind()) {
        (Command::Acceptance(a), _) => run_suite(a),
        (
            Command::Sample(a)
            | Command::DualityLattice(a)
            | Command::DualityBm(a)
            | Command::ScsmLaplace(a)
            | Command::Moments(a)
            | Command::ClosedForm(a)
            | Command::PathStats(a)
            | Command::FlowCompare(a)
            | Command::CoxAvoidance(a)
            | Command::BesqDuality(a),
            Some(kind),
        ) => run_experiment(kind, a).map(|r| {
            print_rows(&r.rows);
            r.pass()
        }),
        _ => unreachable!("every experiment subcommand has a kind"),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
