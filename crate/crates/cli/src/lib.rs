//! `thermoctl`: command-line workbench for the heat-pump control study.
//!
//! Subcommands simulate fixed controllers, train PPO agents, run the MPC
//! baseline, build comparison reports, plot traces, and write synthetic data.
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 divergence.

pub mod commands;
pub mod config;
pub mod controllers;
pub mod dataset;
pub mod error;
pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::Overrides;
use crate::controllers::ControllerSpec;
use crate::error::{exit_code, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "thermoctl", version, about = "Heat-pump building control workbench")]
pub struct Cli {
    /// TOML config, merged over the scenario preset.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Base seed for training and stochastic controllers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Building preset.
    #[arg(long, global = true, value_parser = ["old", "efficient"])]
    pub building: Option<String>,
    /// Demand-response scenario (price-aware observation and reward).
    #[arg(long, global = true)]
    pub dr: bool,
    /// Outdoor-temperature CSV (`timestamp,value`, °C).
    #[arg(long, global = true, value_name = "PATH")]
    pub weather: Option<PathBuf>,
    /// Day-ahead price CSV (`timestamp,value`, €/MWh).
    #[arg(long, global = true, value_name = "PATH")]
    pub prices: Option<PathBuf>,
    /// Seed of the synthetic weather and price generators.
    #[arg(long, global = true)]
    pub synthetic_seed: Option<u64>,
    /// Output directory (default from the config's `output.dir`).
    #[arg(long, short, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a controller on the test windows and write per-step traces.
    Simulate {
        /// heating-curve, random, constant:<W>, mpc, policy:<path> or baseline:<path>.
        #[arg(long, default_value = "heating-curve")]
        controller: ControllerSpec,
        /// Only this test window (`YYYY-MM`).
        #[arg(long)]
        window: Option<String>,
    },
    /// Train PPO agents (one per seed) and keep the best checkpoint.
    Train,
    /// Evaluate a trained checkpoint on the test windows.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        policy: PathBuf,
        #[arg(long)]
        window: Option<String>,
    },
    /// Run receding-horizon MPC on the test windows.
    Mpc {
        #[arg(long)]
        window: Option<String>,
    },
    /// Evaluate several controllers on identical windows and report side by side.
    Compare {
        /// Repeat for each controller; at least two.
        #[arg(long = "controller", required = true, value_name = "SPEC")]
        controllers: Vec<ControllerSpec>,
        #[arg(long)]
        window: Option<String>,
    },
    /// Render a trace CSV as an SVG figure.
    Plot {
        #[arg(value_name = "TRACE")]
        trace: PathBuf,
        /// Output file (default: the trace path with an `.svg` extension).
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Write the synthetic weather and price series as CSV.
    SynthData,
    /// Print the fully resolved configuration as TOML.
    ShowConfig,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            building: self.building.clone(),
            dr: self.dr,
            seed: self.seed,
            weather: self.weather.clone(),
            prices: self.prices.clone(),
            synthetic_seed: self.synthetic_seed,
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match commands::execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
