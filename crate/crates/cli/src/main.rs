use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hrru_cli::run::RunError;
use hrru_cli::{execute, parse_config, write_artifacts, ExperimentConfig, ExperimentKind, RunOptions};

/// Simulate hypergeometric randomly reinforced urns and check their limit
/// theorems.
#[derive(Debug, Parser)]
#[command(name = "hrru", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment named by `experiment.kind`.
    Run(Flags),
    /// Parse and validate a configuration without running it.
    Validate {
        #[arg(long, short)]
        config: PathBuf,
    },
    /// Simulate one trajectory (or one system trajectory).
    Simulate(Flags),
    /// Central limit checks for Z_n and M_n.
    Clt(Flags),
    /// Empirical coverage of the Z_n- and M_n-based intervals.
    Coverage(Flags),
    /// Growth rate and limit-law diagnostics.
    LimitLaw(Flags),
    /// Mean-reinforcement test across urns.
    Mtest(Flags),
    /// Absorption probability of the random-walk draw policy.
    Hitting(Flags),
}

#[derive(Debug, clap::Args)]
struct Flags {
    /// Configuration file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override `plan.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, env = "HRRU_WORKERS")]
    workers: Option<usize>,
    /// Output directory (default: `output.dir`, else `hrru-out`).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    Ok(parse_config(&text)?)
}

fn run(flags: Flags, expected: Option<ExperimentKind>) -> Result<(), RunError> {
    let mut config = load(&flags.config)?;
    if let Some(kind) = expected {
        if config.kind() != kind {
            return Err(hrru_cli::ConfigError::Invalid(vec![format!(
                "experiment.kind: configuration is `{}` but `{}` was requested",
                config.kind().name(),
                kind.name()
            )])
            .into());
        }
    }
    if let Some(seed) = flags.seed {
        config.plan.seed = seed;
    }
    let out = flags
        .out
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("hrru-out"));
    let artifacts = execute(&config, &RunOptions { workers: flags.workers })?;
    for path in write_artifacts(&out, &artifacts)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let path = match &cli.command {
        Command::Validate { config } => config.clone(),
        Command::Run(f)
        | Command::Simulate(f)
        | Command::Clt(f)
        | Command::Coverage(f)
        | Command::LimitLaw(f)
        | Command::Mtest(f)
        | Command::Hitting(f) => f.config.clone(),
    };
    let result = match cli.command {
        Command::Run(f) => run(f, None),
        Command::Validate { config } => load(&config).map(|c| {
            println!("{}: valid {} experiment", config.display(), c.kind().name());
        }),
        Command::Simulate(f) => run(f, Some(ExperimentKind::Simulate)),
        Command::Clt(f) => run(f, Some(ExperimentKind::Clt)),
        Command::Coverage(f) => run(f, Some(ExperimentKind::Coverage)),
        Command::LimitLaw(f) => run(f, Some(ExperimentKind::LimitLaw)),
        Command::Mtest(f) => run(f, Some(ExperimentKind::Mtest)),
        Command::Hitting(f) => run(f, Some(ExperimentKind::Hitting)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match e {
                RunError::Config(_) => eprintln!("error: {}: {e}", path.display()),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
