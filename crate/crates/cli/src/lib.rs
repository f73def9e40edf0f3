//! Command line driver: reads a run configuration, runs one of the
//! solvers, and writes headered text tables plus a manifest with content
//! digests.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod validate;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::{CliError, Result};
use manifest::{unix_now, RunManifest};
use output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "doublewell", version, about = "Few bosons in a one-dimensional double well")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Start from a shipped configuration instead of a file.
    #[arg(long, global = true, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Single-threaded run with bitwise reproducible output.
    #[arg(long, global = true)]
    pub reference_mode: bool,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Energy levels, optionally swept over barrier height or interaction.
    Spectrum,
    /// Time evolution with detection probabilities, current, entropy and energy.
    Evolve,
    /// Entropy as a function of ramp duration and time.
    EntropyMap,
    /// Run the built-in consistency checks.
    Validate {
        /// Smaller bases and looser bounds for the cross-method check.
        #[arg(long)]
        quick: bool,
    },
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::EntropyMap => "entropy-map",
            Command::Validate { .. } => "validate",
        }
    }
}

/// Configuration after file, preset and flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(name)) => config::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let threads = match (cli.reference_mode, cli.threads) {
        (true, _) => 1,
        (false, Some(0)) => return Err(CliError::Config("--threads must be at least 1".into())),
        (false, Some(n)) => n,
        (false, None) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| dispatch(cli, pool.current_num_threads()))
}

fn dispatch(cli: &Cli, threads: usize) -> Result<()> {
    if let Command::Validate { quick } = cli.command {
        let checks = validate::run(quick)?;
        let report: Vec<String> = checks.iter().map(|c| c.line()).collect();
        println!("{}", report.join("\n"));
        if let Some(dir) = &cli.out {
            OutputDir::create(dir)?.write("validation.txt", &(report.join("\n") + "\n"))?;
        }
        let failed = checks.iter().filter(|c| !c.passed()).count();
        return if failed == 0 { Ok(()) } else { Err(CliError::Validation(format!("{failed} check(s) failed"))) };
    }

    let cfg = resolve_config(cli)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let started = unix_now();
    let result = match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &mut out),
        Command::Evolve => commands::evolve(&cfg, &mut out),
        Command::EntropyMap => commands::entropy_map_cmd(&cfg, &mut out),
        Command::Validate { .. } => unreachable!(),
    };
    let (status, diagnostics, error) = match result {
        Ok(o) => match o.partial {
            Some(msg) => (format!("partial: {msg}"), o.diagnostics, Some(CliError::Convergence(msg))),
            None => ("ok".to_string(), o.diagnostics, None),
        },
        Err(e) => {
            out.write("diagnostics.txt", &format!("{e}\n"))?;
            (format!("failed: {e}"), vec![e.to_string()], Some(e))
        }
    };
    let manifest = RunManifest {
        command: cli.command.name().into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        started_unix: started,
        finished_unix: unix_now(),
        threads,
        reference_mode: cli.reference_mode,
        status,
        config_digest: cfg.digest(),
        diagnostics,
        config: cfg.clone(),
        files: out.files.clone(),
    };
    std::fs::write(out.root().join("manifest.toml"), manifest.to_toml())?;
    println!("{} files written to {}", out.files.len(), out.root().display());
    match error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
