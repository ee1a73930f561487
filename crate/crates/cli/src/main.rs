use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod svg;

/// Tone-domain simulator for mm-wave up/down-conversion chains.
#[derive(Debug, Parser)]
#[command(name = "spurline", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Report,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario, plan or manifest file to load
    #[arg(short, long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write the result here instead of stdout (a directory for `simulate`)
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Override a config value, e.g. `--set m1.lo_to_rf_isolation=30` (repeatable)
    #[arg(long = "set", value_name = "BLOCK.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads for sweeps and plan grids (1 runs sequentially)
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Also write a line chart of the result (sweep, leveling, coupling)
    #[arg(long, value_name = "PATH")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate the scenario stimulus and emit per-probe spectra
    Simulate(#[command(flatten)] Common),
    /// Two-tone power sweep: fundamental, IM3, IM5 and LO residual per input level
    Sweep(#[command(flatten)] Common),
    /// Fit OIP3/IIP3 from a scenario sweep or a saved sweep CSV
    Ip3(#[command(flatten)] Common),
    /// Combine spur levels into an EVM budget
    Evm {
        #[command(flatten)]
        common: Common,
        /// Spur level in dBc, optionally labelled as LABEL=DBC (repeatable)
        #[arg(long = "spur", value_name = "[LABEL=]DBC", allow_hyphen_values = true)]
        spurs: Vec<String>,
        /// POWER_SUM or WORST_CASE
        #[arg(long)]
        mode: Option<String>,
    },
    /// Classify a frequency plan or rank a plan search grid
    Plan(#[command(flatten)] Common),
    /// Check in-band spurs against the sampler's Nyquist folding
    AliasCheck {
        #[command(flatten)]
        common: Common,
        /// Sample rate, overriding the plan's sampler_fs
        #[arg(long, value_name = "FREQ")]
        fs: Option<String>,
        /// Guard band, overriding the plan's guard
        #[arg(long, value_name = "FREQ")]
        guard: Option<String>,
    },
    /// Coupling versus separation from a Touchstone manifest
    Coupling {
        #[command(flatten)]
        common: Common,
        /// Frequency to report at
        #[arg(long, value_name = "FREQ", default_value = "30GHz")]
        freq: String,
        /// Also build the 2x2 channel matrix at this separation in mm
        #[arg(long, value_name = "MM")]
        separation: Option<f64>,
        /// Polarization for the channel matrix: CO or CROSS
        #[arg(long, default_value = "CO")]
        pol: String,
    },
    /// Doubler output versus LO drive and the detected leveling threshold
    Leveling(#[command(flatten)] Common),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spurline: {e}");
            ExitCode::from(e.code())
        }
    }
}
