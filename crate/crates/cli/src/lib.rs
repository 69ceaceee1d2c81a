//! Command-line harness: scenario files in, CSV/JSON results and a manifest out.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub mod commands;
pub mod config;

pub use config::ScenarioConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] dew_core::Error),

    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dew", version, about = "Dynamics-based entanglement witness toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario file (TOML). Built-in defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "dew-out")]
    pub out: PathBuf,

    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Overrides the scenario solver tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Classical bounds and truncated quantum maxima per K.
    Bounds,
    /// Monte-Carlo scores of classical phase-space ensembles.
    Simulate,
    /// Lower bounds on the log-negativity over a (theta, score) grid.
    Certify,
    /// Moment-based entanglement criteria on family states.
    Compare,
    /// Coherent-state, optimality and decomposability checks of the witness.
    Witness,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::Simulate => "simulate",
            Command::Certify => "certify",
            Command::Compare => "compare",
            Command::Witness => "witness",
        }
    }
}

/// Files produced by one command, written after all computation is done.
pub struct CommandOutput {
    pub files: Vec<(String, Vec<u8>)>,
    /// Grids and other values derived from the config.
    pub resolved: serde_json::Value,
    pub diagnostics: serde_json::Value,
    /// Raised after the outputs are on disk.
    pub failure: Option<CliError>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    version: &'static str,
    seed: u64,
    tol: f64,
    config: &'a ScenarioConfig,
    resolved: &'a serde_json::Value,
    outputs: Vec<&'a str>,
    diagnostics: &'a serde_json::Value,
}

/// Resolve the scenario from the file and command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Run one command and write its outputs plus `manifest.json` into `out`.
pub fn execute(command: Command, cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    let output = match command {
        Command::Bounds => commands::bounds(cfg)?,
        Command::Simulate => commands::simulate(cfg)?,
        Command::Certify => commands::certify(cfg)?,
        Command::Compare => commands::compare(cfg)?,
        Command::Witness => commands::witness(cfg)?,
    };
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    for (name, bytes) in &output.files {
        write_file(&out.join(name), bytes)?;
    }
    let manifest = Manifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        tol: cfg.tol,
        config: cfg,
        resolved: &output.resolved,
        outputs: output.files.iter().map(|(n, _)| n.as_str()).collect(),
        diagnostics: &output.diagnostics,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    write_file(&out.join("manifest.json"), &bytes)?;
    match output.failure {
        Some(err) => Err(err),
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build a pool of {n} threads: {e}")))?;
            pool.install(|| execute(cli.command, &cfg, &cli.out))
        }
        None => execute(cli.command, &cfg, &cli.out),
    }
}

/// Parse arguments, run, report errors on stderr, and return the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dew {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
