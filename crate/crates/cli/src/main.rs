//! `fermi-sea`: runs periodic, supercell and thermodynamic-limit
//! computations from a TOML config and writes JSON/CSV artifacts.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::{Context, SupercellArgs};
use crate::config::{Config, Mode};
use crate::output::Sink;

#[derive(Parser)]
#[command(name = "fermi-sea", version, about = "Reduced Hartree-Fock crystals and defects in a plane-wave basis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for output artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Force single-threaded, reproducible execution.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Periodic ground state: energy per cell, gap and SCF history.
    ScfPeriodic {
        #[command(flatten)]
        common: Common,
    },
    /// Band energies of the converged crystal along a path of G, X, M, R.
    Bands {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "G,X,M,G,R")]
        path: String,
        /// Samples per path segment.
        #[arg(long, default_value_t = 10)]
        points: usize,
        /// Keep only the lowest n bands.
        #[arg(long)]
        bands: Option<usize>,
    },
    /// Supercell ground state, with an optional defect.
    Supercell {
        #[command(flatten)]
        common: Common,
        #[arg(long = "L")]
        size: usize,
        /// TOML file with `[[sites]]` entries; overrides the config defect.
        #[arg(long)]
        defect: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, conflicts_with = "q")]
        ef: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        q: Option<f64>,
    },
    /// Defect-free charge-constrained energies E⁰(q).
    EOfQ {
        #[command(flatten)]
        common: Common,
        #[arg(long = "L")]
        size: usize,
        /// a:b:step.
        #[arg(long, allow_hyphen_values = true)]
        q_grid: String,
    },
    /// Binding gaps E^ν(q - q') + E⁰(q') - E^ν(q) over a q' grid.
    Binding {
        #[command(flatten)]
        common: Common,
        #[arg(long = "L")]
        size: usize,
        #[arg(long, allow_negative_numbers = true)]
        q: f64,
        /// a:b:step.
        #[arg(long, allow_hyphen_values = true)]
        qprime_grid: String,
        #[arg(long)]
        defect: Option<PathBuf>,
    },
    /// Perfect-crystal and defect energies over supercell sizes.
    SweepL {
        #[command(flatten)]
        common: Common,
        /// Comma-separated sizes; overrides run.L_list.
        #[arg(long = "L-list", value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        defect: Option<PathBuf>,
        #[arg(long)]
        ef: Option<f64>,
    },
    /// Density, potential and spectral convergence of the perfect crystal.
    DensityConv {
        #[command(flatten)]
        common: Common,
        #[arg(long = "L-list", value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Cross-check the solver against the brute-force oracles.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Neutral,
    Mu,
    Charge,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Neutral => Mode::Neutral,
            ModeArg::Mu => Mode::Mu,
            ModeArg::Charge => Mode::Charge,
        }
    }
}

/// Worker count: 1 in deterministic mode, else FERMI_SEA_THREADS if set.
fn configure_threads(deterministic: bool) -> Result<()> {
    let threads = if deterministic {
        Some(1)
    } else {
        match std::env::var("FERMI_SEA_THREADS") {
            Ok(v) => Some(
                v.parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .with_context(|| format!("FERMI_SEA_THREADS must be a positive integer, got {v:?}"))?,
            ),
            Err(_) => None,
        }
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn context(common: &Common) -> Result<Context> {
    let mut config = Config::load(&common.config)?;
    config.solver.deterministic |= common.deterministic;
    configure_threads(config.solver.deterministic)?;
    Context::new(config, &common.out)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::ScfPeriodic { common } => commands::scf_periodic_cmd(&context(&common)?)?,
        Command::Bands {
            common,
            path,
            points,
            bands,
        } => commands::bands_cmd(&context(&common)?, &path, points, bands)?,
        Command::Supercell {
            common,
            size,
            defect,
            mode,
            ef,
            q,
        } => commands::supercell_cmd(
            &context(&common)?,
            SupercellArgs {
                size,
                defect: defect.as_deref(),
                mode: mode.map(Into::into),
                ef,
                q,
            },
        )?,
        Command::EOfQ { common, size, q_grid } => commands::e_of_q_cmd(&context(&common)?, size, &q_grid)?,
        Command::Binding {
            common,
            size,
            q,
            qprime_grid,
            defect,
        } => commands::binding_cmd(&context(&common)?, size, q, &qprime_grid, defect.as_deref())?,
        Command::SweepL {
            common,
            sizes,
            defect,
            ef,
        } => commands::sweep_l_cmd(&context(&common)?, sizes, defect.as_deref(), ef)?,
        Command::DensityConv { common, sizes } => commands::density_conv_cmd(&context(&common)?, sizes)?,
        Command::Validate { config, out } => {
            let config = config.as_deref().map(Config::load).transpose()?;
            let hash = config.as_ref().map(Config::sha256).unwrap_or_default();
            return commands::validate_cmd(config.as_ref(), &Sink::new(&out, hash)?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
