use clap::{Args, Parser, Subcommand};
use mdsearch::harness::{
    compare_suite, load_config, parse_seed_list, run_experiment, selftest, Algorithm,
};
use mdsearch::MdsError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mdsearch",
    about = "Mirror-descent search optimizers with a PI2 baseline on via-point tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run(RunArgs),
    /// Run G-AMDS, G-MDS and PI2 on a task with shared seeds and emit a
    /// final-cost table.
    Compare(CompareArgs),
    /// Run the built-in oracle property suites.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `experiment.output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list (overrides `experiment.seeds`).
    #[arg(long)]
    seeds: Option<String>,
    /// Algorithm name (overrides `algorithm.name`).
    #[arg(long)]
    algo: Option<String>,
    /// Task name: point, arm10, arm50 (overrides `task.name`).
    #[arg(long)]
    task: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    /// Task name: point, arm10 or arm50.
    #[arg(long)]
    task: String,
    /// Output directory for CSVs, plots and the table.
    #[arg(long)]
    out: PathBuf,
}

fn run(args: &RunArgs) -> Result<(), MdsError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    if let Some(seeds) = &args.seeds {
        cfg.seeds = parse_seed_list(seeds).map_err(|e| MdsError::Config {
            issues: vec![format!("--seeds: {e}")],
        })?;
    }
    if let Some(algo) = &args.algo {
        cfg.algorithm = Algorithm::parse(algo).ok_or_else(|| MdsError::Config {
            issues: vec![format!("--algo: unknown algorithm `{algo}`")],
        })?;
    }
    if let Some(task) = &args.task {
        let replacement =
            mdsearch::harness::ExperimentConfig::defaults_for(task, cfg.algorithm)?;
        cfg.task = replacement.task;
    }
    cfg.validate()?;

    let curve = run_experiment(&cfg)?;
    println!(
        "{} on {} | {} updates x {} rollouts x {} seeds | final cost {:.3e} +- {:.3e}",
        cfg.algorithm.name(),
        match cfg.task.kind {
            mdsearch::tasks::TaskKind::Point2D => "point".to_string(),
            mdsearch::tasks::TaskKind::ArmViaPoint { dof } => format!("arm{dof}"),
        },
        cfg.updates,
        cfg.rollouts,
        cfg.seeds.len(),
        curve.final_mean(),
        curve.final_std()
    );
    if let Some(dir) = &cfg.output {
        println!("outputs written to {}", dir.display());
    }
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<(), MdsError> {
    let comparison = compare_suite(&args.task, Some(&args.out))?;
    print!("{}", comparison.table());
    println!("outputs written to {}", args.out.display());
    Ok(())
}

fn run_selftest() -> Result<(), MdsError> {
    let outcomes = selftest::run_selftest();
    let mut failures = 0;
    for outcome in &outcomes {
        let verdict = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{verdict}  {} ({})", outcome.name, outcome.detail);
        if !outcome.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(MdsError::SolverFailure {
            iterations: failures,
            residual: f64::NAN,
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
        Command::Selftest => run_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
