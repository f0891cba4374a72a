//! `lightcone`: spectra, evolution, decomposition and verification runs for
//! perturbations of self-similar blow-up in similarity coordinates.
//!
//! Exit codes: 0 success, 1 a verdict failed, 2 configuration or output
//! error, 3 numerical abort.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Output(String),
    #[error(transparent)]
    Core(#[from] lightcone_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use lightcone_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Core(E::InvalidParams(_) | E::OutsidePointSpectrum { .. } | E::Io(_)) => 2,
            CliError::Core(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lightcone", version, about = "Stability of self-similar blow-up inside the backward lightcone")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Flags {
    /// key=value file; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Nonlinearity exponent (odd integer >= 3).
    #[arg(long, global = true)]
    p: Option<String>,
    /// Sobolev index of H^{2k}, 1..=4 [default: 1].
    #[arg(long, global = true)]
    k: Option<String>,
    /// Number of Chebyshev nodes, 16..=512 [default: 64].
    #[arg(long, global = true)]
    n: Option<String>,
    /// Time step [default: from the CFL bound].
    #[arg(long, global = true)]
    dtau: Option<String>,
    /// Final similarity time [default: 6].
    #[arg(long = "tau-end", global = true)]
    tau_end: Option<String>,
    /// Seed for random data [default: 0].
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output directory [default: lightcone-out].
    #[arg(long, global = true)]
    out: Option<String>,
    /// Free wave equation instead of the linearized semilinear problem.
    #[arg(long, global = true)]
    free: bool,
    /// Stability check on gauge-free data (verify, sweep).
    #[arg(long = "no-gauge", global = true)]
    no_gauge: bool,
    /// Accept any real p > 1.
    #[arg(long = "allow-real-p", global = true)]
    allow_real_p: bool,
    /// Exponential spectral filter (always on for verify with k >= 2).
    #[arg(long, global = true)]
    filter: bool,
    /// Largest mode index listed by spectrum and modes [default: 3].
    #[arg(long, global = true)]
    jmax: Option<String>,
    /// Initial data: an analytic eigenvalue or a label free(j), plus(j), minus(j).
    #[arg(long, global = true, allow_hyphen_values = true)]
    mode: Option<String>,
    /// Random data sets per verification [default: 5].
    #[arg(long, global = true)]
    samples: Option<String>,
    /// Sweep exponents, comma separated.
    #[arg(long, global = true)]
    ps: Option<String>,
    /// Sweep Sobolev indices, comma separated.
    #[arg(long, global = true)]
    ks: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Table of analytic eigenvalues.
    Spectrum {
        #[arg(long)]
        json: bool,
    },
    /// Catalogue of normalized analytic modes (modes.json).
    Modes,
    /// Evolve one datum; writes manifest.json, norms.csv and snapshots.
    Evolve {
        /// Times at which to write the state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snapshots: Vec<f64>,
    },
    /// Split one datum into analytic modes and remainder.
    Decompose {
        /// Invariant split by left eigenfunctionals instead of the orthogonal one.
        #[arg(long)]
        spectral: bool,
    },
    /// Check the decomposition theorem, or stability with --no-gauge; writes report.json.
    Verify,
    /// Run verify over a (p, k) grid; writes one report per cell and sweep.json.
    Sweep,
}

impl Flags {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let values = [
            ("p", &self.p),
            ("k", &self.k),
            ("n", &self.n),
            ("dtau", &self.dtau),
            ("tau-end", &self.tau_end),
            ("seed", &self.seed),
            ("out", &self.out),
            ("jmax", &self.jmax),
            ("mode", &self.mode),
            ("samples", &self.samples),
            ("ps", &self.ps),
            ("ks", &self.ks),
        ];
        for (key, value) in values {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        let switches = [
            ("free", self.free),
            ("no-gauge", self.no_gauge),
            ("allow-real-p", self.allow_real_p),
            ("filter", self.filter),
        ];
        for (key, on) in switches {
            if on {
                flags.set(key, "true")?;
            }
        }
        s.overlay(&flags);
        Ok(s)
    }
}

fn run(cli: &Cli) -> Result<(String, bool), CliError> {
    let cfg = RunConfig::resolve(&cli.flags.settings()?)?;
    match &cli.command {
        Command::Spectrum { json } => Ok((commands::spectrum(&cfg, *json)?, true)),
        Command::Modes => Ok((commands::modes(&cfg)?, true)),
        Command::Evolve { snapshots } => Ok((commands::evolve(&cfg, snapshots)?, true)),
        Command::Decompose { spectral } => Ok((commands::decompose(&cfg, *spectral)?, true)),
        Command::Verify => commands::verify(&cfg),
        Command::Sweep => commands::sweep(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((text, passed)) => {
            print!("{text}");
            ExitCode::from(if passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("lightcone: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
