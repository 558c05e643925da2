//! `vislineup`: simulate residual departures, run conventional tests, build
//! lineups, compute visual p-values and power curves, and host studies.
//!
//! Exit status is 0 on success, 1 on a domain error and 2 on a usage error.
//! Errors are printed as `error[CODE]: message`.

mod data;
mod error;
mod manifest;
mod power;
mod pvalue;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use vislineup_server::ServerConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "vislineup", version, about = "Lineup-protocol residual diagnostics workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one dataset from the experimental design.
    Simulate(data::SimulateArgs),
    /// Run RESET, Breusch-Pagan and Shapiro-Wilk on a dataset.
    Test(data::TestArgs),
    /// Print the effect size E and ln E of a dataset or bundle.
    EffectSize(data::EffectSizeArgs),
    /// Build a lineup bundle from a dataset.
    Lineup(data::LineupArgs),
    /// Visual p-values from an evaluation log or study export.
    Pvalue(pvalue::PvalueArgs),
    /// Monte Carlo power of the conventional tests and fitted power curves.
    Power(power::PowerArgs),
    /// Agreement between conventional and visual decisions.
    Report(power::ReportArgs),
    /// Run the evaluation HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, clap::Args, Serialize)]
struct ServeArgs {
    /// TOML configuration file; VISLINEUP_* environment variables and the
    /// flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    host: Option<String>,
    /// 0 picks a free port.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    admin_token: Option<String>,
    /// Directory of lineup bundles, one sub-directory per bundle id.
    #[arg(long)]
    bundles: Option<PathBuf>,
    /// Directory for study state and logs.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory of static web assets.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn serve(args: ServeArgs) -> CliResult<()> {
    let base = match &args.config {
        Some(path) => ServerConfig::from_file(path)?,
        None => ServerConfig::default(),
    };
    let mut config = base.with_env()?;
    if let Some(v) = args.host {
        config.host = v;
    }
    if let Some(v) = args.port {
        config.port = v;
    }
    if let Some(v) = args.admin_token {
        config.admin_token = v;
    }
    if let Some(v) = args.bundles {
        config.bundles_dir = v;
    }
    if let Some(v) = args.data {
        config.data_dir = v;
    }
    if args.static_dir.is_some() {
        config.static_dir = args.static_dir;
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(vislineup_server::serve(config))?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => data::simulate(a),
        Command::Test(a) => data::test(a),
        Command::EffectSize(a) => data::effect_size(a),
        Command::Lineup(a) => data::lineup(a),
        Command::Pvalue(a) => pvalue::pvalue(a),
        Command::Power(a) => power::power(a),
        Command::Report(a) => power::report(a),
        Command::Serve(a) => serve(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            if let CliError::Usage(_) = e {
                eprintln!("run with --help for usage");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
