//! Command-line front end: configuration loading, subcommand dispatch and rendering.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{Format, Overrides, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::Output;

#[derive(Debug, Parser)]
#[command(name = "dce", version, about = "Photon creation in a cavity with an oscillating wall")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; without it the unit cube and defaults are used.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Drive frequency: a number, "2*omega(kx,ky,kz)" or "omega(s)+omega(p)".
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<String>,
    /// Final slow time.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long = "temp-kelvin", global = true)]
    pub temp_kelvin: Option<f64>,
    #[arg(long = "length-cm", global = true)]
    pub length_cm: Option<f64>,
    /// Truncation of the directly integrated mode family.
    #[arg(long, global = true)]
    pub kmax: Option<u32>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// List cavity modes below a frequency cutoff.
    Spectrum,
    /// Find resonant clusters, their couplings and equidistant chains.
    Couple,
    /// Multiple-scale evolution of each cluster.
    Msa,
    /// Direct integration of the truncated mode equations.
    Integrate,
    /// Largest detuning that still gives exponential growth.
    Threshold,
    /// Photon numbers from a thermal initial state.
    Thermal,
    /// Evaluate observables over a parameter grid.
    Sweep,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            epsilon: self.epsilon,
            omega: self.omega.clone(),
            tau: self.tau,
            temperature_k: self.temp_kelvin,
            length_cm: self.length_cm,
            k_max: self.kmax,
            out: self.out.as_ref().map(|p| p.display().to_string()),
            format: self.format,
        }
    }

    pub fn resolve_config(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

pub fn execute(command: Command, cfg: &RunConfig) -> CliResult<Output> {
    let out = match command {
        Command::Spectrum => commands::spectrum(cfg),
        Command::Couple => commands::couple(cfg),
        Command::Msa => commands::msa(cfg),
        Command::Integrate => commands::integrate(cfg),
        Command::Threshold => commands::threshold(cfg),
        Command::Thermal => commands::thermal(cfg),
        Command::Sweep => commands::sweep(cfg),
    }?;
    Ok(out)
}

fn run_cli(cli: &Cli) -> CliResult<Vec<String>> {
    let cfg = cli.resolve_config()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let out = execute(cli.command, &cfg)?;
    let text = out.render(cfg.output.format, &cfg);
    match &cfg.output.path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Resource(format!("cannot write {p}: {e}")))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            // a closed pipe is not worth an error
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    Ok(out.warnings)
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match run_cli(cli) {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
