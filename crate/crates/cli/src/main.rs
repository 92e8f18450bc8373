//! Scenario-driven command line for the soliton toolkit.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error (the
//! originating error is printed on stderr).

mod config;
mod csvout;
mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::Scenario;

#[derive(Parser)]
#[command(name = "deltasol", about = "narrow-soliton dynamics toolkit", version)]
struct Cli {
    /// Scenario configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV tables and plots.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweep parallelism (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Reject shelf initial data that misses the emitted corner value.
    #[arg(long, global = true, default_value_t = false)]
    strict_compat: bool,

    /// Override the eps sweep, comma-separated.
    #[arg(long, global = true, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel moments of the configured mollifier.
    Moments,
    /// Solve the traveling-wave profile at the initial soliton state.
    Profile,
    /// Integrate the configured mode and write the trajectory table.
    Simulate,
    /// Residual pairings over the eps sweep with order fits.
    VerifyOrder,
    /// Direct dispersive solve cross-checked against the mode B prediction.
    CompareDirect,
    /// Exact peak-seeded background solution vs the formal peak position.
    Counterexample {
        /// Observation time for the support comparison.
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
    },
    /// Two amplitude histories sharing initial data: the wedge disagreement.
    Nonuniqueness,
}

fn dispatch(cli: &Cli) -> Result<()> {
    let config_path = cli
        .config
        .clone()
        .ok_or_else(|| anyhow::anyhow!("--config PATH is required"))?;
    let mut sc = Scenario::load(&config_path)?;
    if let Some(eps) = &cli.eps_list {
        if eps.is_empty() || eps.iter().any(|&e| e <= 0.0) {
            anyhow::bail!("--eps-list must hold positive values");
        }
        sc.sweep.eps = eps.clone();
    }
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    match &cli.command {
        Command::Moments => run::cmd_moments(&sc, &cli.out),
        Command::Profile => run::cmd_profile(&sc, &cli.out),
        Command::Simulate => run::cmd_simulate(&sc, &cli.out, cli.strict_compat),
        Command::VerifyOrder => run::cmd_verify_order(&sc, &cli.out, cli.eps_list.clone()),
        Command::CompareDirect => run::cmd_compare_direct(&sc, &cli.out),
        Command::Counterexample { t0 } => run::cmd_counterexample(&sc, &cli.out, *t0),
        Command::Nonuniqueness => run::cmd_nonuniqueness(&sc, &cli.out),
    }
}

/// Errors that stem from the scenario file or flags exit with 2; anything
/// that happened inside the solvers exits with 3.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<deltasol::dynamics::DynamicsError>().is_some()
        || err.downcast_ref::<deltasol::profiles::ProfileError>().is_some()
        || err.downcast_ref::<deltasol::hopf::HopfError>().is_some()
        || err.downcast_ref::<deltasol::verify::VerifyError>().is_some()
        || err.downcast_ref::<deltasol::quad::QuadError>().is_some()
        || err.downcast_ref::<deltasol::mollifiers::MollifierError>().is_some()
        || err.downcast_ref::<std::io::Error>().is_some()
    {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
