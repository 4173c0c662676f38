//! Command-line front end of the photon-photon gate simulator.

mod commands;
mod report;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use cpf_core::config::Config;
use sha2::{Digest, Sha256};

use commands::Context;
use report::{Meta, Report};

#[derive(Parser, Debug)]
#[command(name = "cpfsim", version, about = "Photon-photon controlled-phase-flip gate simulator")]
pub struct Cli {
    /// TOML configuration; the built-in reference values are used if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step; required whenever sampling happens.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Gate channel: the perfect protocol or the imperfection model.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Error)]
    mode: Mode,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Ideal,
    Error,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CNOT-basis truth table and F_CNOT.
    TruthTable {
        /// Detected pairs per input; exact probabilities if omitted.
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Bell state from |DD⟩: tomography, fidelity with Ψ+, entangling capability.
    Bell {
        #[arg(long, default_value_t = 1378)]
        pairs: u64,
        /// Report the exact output state instead of a reconstruction.
        #[arg(long)]
        exact: bool,
    },
    /// Average gate fidelity over the 36 canonical product inputs.
    AvgFidelity {
        /// Also estimate it from simulated tomography.
        #[arg(long)]
        sampled: bool,
        #[arg(long, default_value_t = 80)]
        pairs: u64,
    },
    /// Stand-alone fidelity reduction of each imperfection.
    Budget,
    /// Per-photon and pair efficiency of the transmission chain.
    Efficiency,
    /// Reflection amplitude and phase versus detuning, and the phase bandwidth.
    PhaseSpectrum {
        #[arg(long, default_value_t = 6.0)]
        span_mhz: f64,
        #[arg(long, default_value_t = 241)]
        points: usize,
        /// Phase tolerance in units of π.
        #[arg(long, default_value_t = 0.1)]
        tol_pi: f64,
    },
    /// Three-pulse Ramsey spectrum: simulate and/or fit.
    Ramsey {
        /// Measured spectrum (CSV: delta_khz,p_up,sigma).
        #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
        data: Option<PathBuf>,
        /// Simulate a noisy scan from the configured parameters.
        #[arg(long)]
        synthetic: bool,
        /// Skip the fit; the model column uses the configured parameters.
        #[arg(long)]
        no_fit: bool,
    },
    /// Solve the unconstrained imperfection parameters from the budget targets.
    Calibrate {
        /// Write the configuration with the calibrated values to this file.
        #[arg(long)]
        write_config: Option<PathBuf>,
    },
    /// State after every step of the perfect protocol.
    Trace {
        /// Two polarisation letters from H V D A R L.
        #[arg(long, default_value = "DD")]
        input: String,
        /// Atomic readout: up or down.
        #[arg(long, default_value = "down")]
        outcome: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::TruthTable { .. } => "truth-table",
            Command::Bell { .. } => "bell",
            Command::AvgFidelity { .. } => "avg-fidelity",
            Command::Budget => "budget",
            Command::Efficiency => "efficiency",
            Command::PhaseSpectrum { .. } => "phase-spectrum",
            Command::Ramsey { .. } => "ramsey",
            Command::Calibrate { .. } => "calibrate",
            Command::Trace { .. } => "trace",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(io::Error),
    Core(cpf_core::Error),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<cpf_core::Error> for CliError {
    fn from(e: cpf_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use cpf_core::Error as E;
        match self {
            CliError::Core(
                E::NonConvergence { .. } | E::RootNotBracketed(_) | E::RankDeficient(_) | E::ZeroProbability,
            ) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<(Config, String), CliError> {
    match path {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| CliError::Usage(format!("config {} is not UTF-8", p.display())))?;
            Ok((Config::from_toml_str(&text)?, hex::encode(Sha256::digest(&bytes))))
        }
        None => {
            let cfg = Config::default();
            let hash = hex::encode(Sha256::digest(cfg.to_toml_string().as_bytes()));
            Ok((cfg, hash))
        }
    }
}

/// Runs a parsed invocation and returns the report bytes without writing
/// them anywhere.
pub fn render(cli: &Cli) -> Result<Vec<u8>, CliError> {
    let (config, hash) = load_config(cli.config.as_ref())?;
    let meta = Meta {
        command: cli.command.name().to_string(),
        config_sha256: hash,
        seed: cli.seed,
        mode: match cli.mode {
            Mode::Ideal => "ideal",
            Mode::Error => "error",
        }
        .to_string(),
    };
    let ctx = Context { config: &config, seed: cli.seed, mode: cli.mode };
    let tables = match &cli.command {
        Command::TruthTable { shots } => commands::truth_table_cmd(&ctx, *shots)?,
        Command::Bell { pairs, exact } => commands::bell_cmd(&ctx, *pairs, *exact)?,
        Command::AvgFidelity { sampled, pairs } => commands::avg_fidelity_cmd(&ctx, *sampled, *pairs)?,
        Command::Budget => commands::budget_cmd(&ctx)?,
        Command::Efficiency => commands::efficiency_cmd(&ctx)?,
        Command::PhaseSpectrum { span_mhz, points, tol_pi } => {
            commands::phase_spectrum_cmd(&ctx, *span_mhz, *points, *tol_pi)?
        }
        Command::Ramsey { data, no_fit, .. } => commands::ramsey_cmd(&ctx, data.as_deref(), *no_fit)?,
        Command::Calibrate { write_config } => {
            let header = format!("# calibrated by cpfsim from config_sha256={}", meta.config_sha256);
            commands::calibrate_cmd(&ctx, write_config.as_deref(), &header)?
        }
        Command::Trace { input, outcome } => commands::trace_cmd(input, outcome)?,
    };
    let report = Report { meta, tables };
    let mut buf = Vec::new();
    match cli.format {
        Format::Csv => report.write_csv(&mut buf)?,
        Format::Json => report.write_json(&mut buf)?,
    }
    Ok(buf)
}

/// Runs a parsed invocation, writing the report to `--out` or stdout.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let buf = render(cli)?;
    match &cli.out {
        Some(p) => fs::write(p, buf)?,
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}
