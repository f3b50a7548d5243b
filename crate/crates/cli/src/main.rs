mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "nuexp", version, about = "Experiments on non-uniformly expanding torus maps and their symbolic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for `<command>.json`, `<command>.csv` and extra outputs
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `run.seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// What goes to stdout
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Print nothing to stdout or stderr apart from errors
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Subcommand)]
enum Command {
    /// Grid check of (H1)-(H3) and the constants (alpha, c)
    Verify,
    /// Lyapunov spectra over the seed ensemble
    Lyapunov,
    /// Hyperbolic times, running density and backward contraction
    HypTimes,
    /// Pressure and equilibrium measure of the configured potential
    Equilibrium,
    /// Variational gaps of random Markov measures
    Variational,
    /// Gibbs ratio scan of the equilibrium measure
    Gibbs,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Lyapunov => "lyapunov",
            Command::HypTimes => "hyp_times",
            Command::Equilibrium => "equilibrium",
            Command::Variational => "variational",
            Command::Gibbs => "gibbs",
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| anyhow::anyhow!("--config <path> is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.run.out = Some(out.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<bool> {
    let outcome = match cli.command {
        Command::Verify => commands::verify(cfg),
        Command::Lyapunov => commands::lyapunov(cfg),
        Command::HypTimes => commands::hyp_times(cfg),
        Command::Equilibrium => commands::equilibrium(cfg),
        Command::Variational => commands::variational(cfg),
        Command::Gibbs => commands::gibbs(cfg),
    }?;
    let json = output::to_json(&outcome.json)?;
    if let Some(dir) = &cfg.run.out {
        let name = cli.command.name();
        output::write_file(dir, &format!("{name}.json"), &json)?;
        output::write_file(dir, &format!("{name}.csv"), &outcome.csv)?;
        for (file, contents) in &outcome.files {
            output::write_file(dir, file, contents)?;
        }
    }
    if !cli.quiet {
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
        match cli.format {
            Format::Json => print!("{json}"),
            Format::Csv => print!("{}", outcome.csv),
        }
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
