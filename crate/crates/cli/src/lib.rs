//! Command-line experiment runner for the `bergman-lab` library.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_rational, LiftSpec, RunConfig};
use crate::error::CliError;
use crate::output::{manifest, ManifestInput, Outcome, RunOutput};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bergman-lab",
    version,
    about = "Bergman density and balanced-metric experiments on (P¹, O(1))"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand, PartialEq, Eq)]
pub enum Command {
    /// Density profiles K(q, h) and Gram diagonals.
    Density,
    /// Expansion coefficients fitted across powers.
    Fit,
    /// Obstruction character, pullback identity and power independence.
    Obstruction,
    /// Inductive correction of an injected perturbation.
    Correct,
    /// The full invariant suite.
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Fit => "fit",
            Command::Obstruction => "obstruction",
            Command::Correct => "correct",
            Command::Check => "check",
        }
    }
}

/// Flags that override values from the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Config file path.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Power m; repeat for a list.
    #[arg(long = "m", global = true)]
    pub m: Vec<u32>,
    /// Quadrature node count.
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    /// Legendre degree cap.
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// Lift constant for every power, e.g. `1/2`.
    #[arg(long, global = true)]
    pub lift: Option<String>,
    /// Seed for random potentials.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

pub fn resolve_config(overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match &overrides.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &overrides.out {
        cfg.out = out.clone();
    }
    if !overrides.m.is_empty() {
        cfg.m_list = overrides.m.clone();
    }
    if overrides.m.contains(&0) {
        return Err(CliError::Validation("power m must be positive".into()));
    }
    if let Some(n) = overrides.nodes {
        cfg.nodes = Some(n);
    }
    if let Some(k) = overrides.degree {
        cfg.degree = k;
    }
    if let Some(lift) = &overrides.lift {
        let c = parse_rational(lift).map_err(CliError::Validation)?;
        cfg.lift = LiftSpec {
            constant: Some(c),
            per_power: Vec::new(),
        };
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn execute(command: Command, cfg: &RunConfig, out: &mut RunOutput) -> Result<Outcome, CliError> {
    commands::preflight(command.name(), cfg)?;
    match command {
        Command::Density => commands::density(cfg, out),
        Command::Fit => commands::fit(cfg, out),
        Command::Obstruction => commands::obstruction(cfg, out),
        Command::Correct => commands::correct(cfg, out),
        Command::Check => commands::check(cfg, out),
    }
}

fn write_manifest(out: &mut RunOutput, input: ManifestInput<'_>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&manifest(input))?;
    out.write_text("manifest.json", &(text + "\n"))
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let started_at = now();
    let command = cli.command;
    let cfg = match resolve_config(&cli.overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let mut out = match RunOutput::create(&cfg.out) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let result = execute(command, &cfg, &mut out);
    let files = out.files().to_vec();
    let (outcome, error) = match &result {
        Ok(o) => (Some(o), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let input = ManifestInput {
        command: command.name(),
        config: &cfg,
        started_at,
        finished_at: now(),
        outcome,
        error: error.clone(),
        files: &files,
    };
    if let Err(e) = write_manifest(&mut out, input) {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    match (result, error) {
        (_, Some(e)) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
        (Ok(o), None) if o.pass => {
            println!("{}: pass", command.name());
            EXIT_PASS
        }
        (Ok(o), None) => {
            println!(
                "{}: FAIL ({})",
                command.name(),
                o.reason.as_deref().unwrap_or("invariant failure")
            );
            EXIT_INVARIANT
        }
        (Err(_), None) => unreachable!("errors carry a message"),
    }
}
