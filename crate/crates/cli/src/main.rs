//! `sr1tr` command-line harness.

mod config;
mod fixture;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use sr1tr::obs::{solve_subproblem, Certificate};

use config::{Method, RunConfig};
use run::{Experiment, Failure, Summary};

#[derive(Parser)]
#[command(name = "sr1tr", version, about = "Limited-memory SR1 trust-region optimizers on small classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for trace files.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the wall-clock budget in the config, in seconds.
    #[arg(long, global = true)]
    time_budget: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train with the method named in the config.
    Train { config: PathBuf },
    /// Solve one trust-region subproblem from a fixture file.
    SolveSubproblem { fixture: PathBuf },
    /// Train with every method on one config and print a summary table.
    Bench { config: PathBuf },
}

fn load_config(cli: &Cli, path: &Path) -> Result<(RunConfig, PathBuf), Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Config)?;
    let mut cfg = RunConfig::from_json(&text)
        .with_context(|| format!("invalid config {}", path.display()))
        .map_err(Failure::Config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.time_budget {
        cfg.time_budget_seconds = Some(t);
    }
    cfg.validate().map_err(Failure::Config)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

/// Trace path: `--output` directory, else the config's `output`, else the
/// working directory.
fn trace_path(cli: &Cli, cfg: &RunConfig, base: &Path, config: &Path, method: Method) -> PathBuf {
    let name = format!("{}-{}.csv", stem(config), method.name());
    match (&cli.output, &cfg.output) {
        (Some(dir), _) => dir.join(name),
        (None, Some(out)) => RunConfig::resolve(base, out),
        (None, None) => PathBuf::from(name),
    }
}

fn print_summary(rows: &[Summary]) {
    println!(
        "{:<10} {:>10} {:>12} {:>12} {:>12}  stop",
        "method", "iterations", "train_loss", "test_loss", "wall_seconds"
    );
    for s in rows {
        println!(
            "{:<10} {:>10} {:>12.6} {:>12} {:>12.3}  {:?}",
            s.method.name(),
            s.iterations,
            s.train_loss,
            s.test_loss.map_or_else(|| "-".into(), |t| format!("{t:.6}")),
            s.wall_seconds,
            s.stop
        );
    }
}

fn train(cli: &Cli, config: &Path) -> Result<(), Failure> {
    let (cfg, base) = load_config(cli, config)?;
    let exp = Experiment::load(&cfg, &base)?;
    let out = trace_path(cli, &cfg, &base, config, cfg.method);
    let summary = run::run(&cfg, &exp, cfg.method, &out)?;
    print_summary(std::slice::from_ref(&summary));
    println!("trace: {}", summary.trace_path.display());
    Ok(())
}

fn bench(cli: &Cli, config: &Path) -> Result<(), Failure> {
    let (cfg, base) = load_config(cli, config)?;
    let exp = Experiment::load(&cfg, &base)?;
    let dir = match (&cli.output, &cfg.output) {
        (Some(dir), _) => dir.clone(),
        (None, Some(out)) => RunConfig::resolve(&base, out)
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
        (None, None) => PathBuf::new(),
    };
    let mut summaries = Vec::new();
    let mut first_failure = None;
    for method in Method::ALL {
        let out = dir.join(format!("{}-{}.csv", stem(config), method.name()));
        match run::run(&cfg, &exp, method, &out) {
            Ok(s) => summaries.push(s),
            Err(e) => {
                eprintln!("{}: {:#}", method.name(), e.error());
                first_failure.get_or_insert(e);
            }
        }
    }
    print_summary(&summaries);
    first_failure.map_or(Ok(()), Err)
}

fn solve(path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Data)?;
    let fx = fixture::parse(&text)
        .with_context(|| format!("invalid fixture {}", path.display()))
        .map_err(Failure::Config)?;
    let sol = solve_subproblem(&fx.b, &fx.g, fx.delta)?;
    let p_norm = sr1tr::linalg::norm(&sol.p_star);
    println!("sigma_star {}", sol.sigma_star);
    println!("p_norm {p_norm}");
    println!("q_value {}", sol.q_value);
    println!("hard_case {}", sol.hard_case);
    println!("newton_iters {}", sol.newton_iters);
    println!(
        "p_star {}",
        sol.p_star.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
    );
    let cert = Certificate::compute(&fx.b, &fx.g, fx.delta, &sol)?;
    match cert.violation() {
        None => Ok(()),
        Some(msg) => Err(Failure::Numerical(anyhow::anyhow!("certificate failed: {msg} ({cert:?})"))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { config } => train(&cli, config),
        Command::SolveSubproblem { fixture } => solve(fixture),
        Command::Bench { config } => bench(&cli, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code())
        }
    }
}
