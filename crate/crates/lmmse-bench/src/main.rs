//! Command-line benchmark harness; see the crate docs for the CSV and
//! config formats. Exit codes: 0 success, 2 configuration or usage
//! error, 3 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use lmmse_bench::config::{ExperimentConfig, FilterId};
use lmmse_bench::experiment::{
    mse_plot_script, run_mse_experiment, run_scaling_benchmark, scaling_plot_script, write_csv,
};
use lmmse_bench::BenchError;

#[derive(Parser)]
#[command(
    name = "lmmse-bench",
    about = "MSE and wall-clock benchmarks for LMMSE smoothers over ISI channels in colored noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo MSE sweep over the configured SNR grid.
    Mse {
        #[command(flatten)]
        common: CommonArgs,
        /// Record real wall-clock times instead of zeros (makes the
        /// output nondeterministic across runs).
        #[arg(long)]
        timing: bool,
    },
    /// Wall-clock scaling over a grid of block lengths, run at the
    /// first SNR grid point.
    Scaling {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated block lengths; overrides the config's
        /// `n_grid` field.
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's filter list (comma separated:
    /// block, fg_colored, fg_white).
    #[arg(long, value_delimiter = ',')]
    filters: Option<Vec<FilterId>>,
    /// Also write a gnuplot script for the CSV to this path.
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code() as i32);
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Mse { common, timing } => {
            let cfg = load_config(&common)?;
            let records = run_mse_experiment(&cfg)?;
            write_output(&common.out, &write_csv(&records, timing))?;
            if let Some(path) = &common.plot_script {
                let script = mse_plot_script(&common.out.display().to_string(), &cfg.filters);
                write_output(path, &script)?;
            }
            println!("wrote {} records to {}", records.len(), common.out.display());
        }
        Command::Scaling { common, n_grid } => {
            let cfg = load_config(&common)?;
            let grid = n_grid
                .or_else(|| cfg.n_grid.clone())
                .ok_or_else(|| {
                    BenchError::Config(
                        "scaling needs block lengths (config n_grid or --n-grid)".into(),
                    )
                })?;
            let records = run_scaling_benchmark(&cfg, &grid)?;
            write_output(&common.out, &write_csv(&records, true))?;
            if let Some(path) = &common.plot_script {
                let script = scaling_plot_script(&common.out.display().to_string(), &cfg.filters);
                write_output(path, &script)?;
            }
            println!("wrote {} records to {}", records.len(), common.out.display());
        }
    }
    Ok(())
}

/// Loads the config and applies command-line overrides, re-validating
/// afterwards since overrides can break config invariants.
fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(filters) = &common.filters {
        cfg.filters = filters.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(path: &Path, text: &str) -> Result<(), BenchError> {
    std::fs::write(path, text)
        .map_err(|e| BenchError::Config(format!("cannot write {}: {e}", path.display())))
}
