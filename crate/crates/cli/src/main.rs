//! `picker-bench`: runs one pipeline stage per invocation against a run
//! directory. Errors go to stderr as a single JSON record.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::commands::Ctx;
use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "picker-bench",
    version,
    about = "Uncertainty-aware phase picker evaluation"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the success record on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Generate a clustered catalog, picker windows and metric tables.
    Synth,
    /// Fit spatial k-means on source locations.
    Cluster,
    /// Build the train/validation/test partition.
    Split,
    /// Draw cluster sets for every quantity level.
    SampleSets,
    /// Merge window outputs into per-waveform probability traces.
    Aggregate,
    /// Select the decision threshold on validation traces.
    Threshold,
    /// Extract and classify picks on test traces.
    Pick,
    /// Recall, F1, noise % correct and cumulative RMSR from picks.
    Score,
    /// Fit the mixed-effects model to every metric table.
    Fit,
    /// Rank probabilities per quantity level.
    Rank,
    /// Feature densities and spectral diagnostics.
    Diagnose,
    /// Summary JSON and plot-data CSVs.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Cluster => "cluster",
            Command::Split => "split",
            Command::SampleSets => "sample-sets",
            Command::Aggregate => "aggregate",
            Command::Threshold => "threshold",
            Command::Pick => "pick",
            Command::Score => "score",
            Command::Fit => "fit",
            Command::Rank => "rank",
            Command::Diagnose => "diagnose",
            Command::Report => "report",
        }
    }

    fn run(self, ctx: &mut Ctx) -> Result<(), CliError> {
        match self {
            Command::Synth => commands::synth(ctx),
            Command::Cluster => commands::cluster(ctx),
            Command::Split => commands::split(ctx),
            Command::SampleSets => commands::sample_sets(ctx),
            Command::Aggregate => commands::aggregate(ctx),
            Command::Threshold => commands::threshold(ctx),
            Command::Pick => commands::pick(ctx),
            Command::Score => commands::score(ctx),
            Command::Fit => commands::fit(ctx),
            Command::Rank => commands::rank(ctx),
            Command::Diagnose => commands::diagnose(ctx),
            Command::Report => commands::report(ctx),
        }
    }
}

/// Sizes the global pool from `PICKER_BENCH_THREADS` when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PICKER_BENCH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::invalid_field("PICKER_BENCH_THREADS", "must be a positive integer")
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(e.to_string()))
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    configure_threads()?;
    let overrides = Overrides {
        seed: cli.seed,
        out_dir: cli.out.clone(),
    };
    let config = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let mut ctx = Ctx::new(config);
    cli.command.run(&mut ctx)?;
    Ok(ctx.out.written)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let record = json!({
                "status": "error",
                "kind": "usage",
                "message": e.to_string().trim(),
            });
            eprintln!("{record}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(written) => {
            if !cli.quiet {
                let record = json!({
                    "status": "ok",
                    "subcommand": cli.command.name(),
                    "outputs": written.len(),
                });
                println!("{record}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record(cli.command.name()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
