//! `defectometer` — preprocessing, detection evaluation and defect geometry
//! statistics for electron micrographs.
//!
//! The binary is a thin wrapper over [`run_from`], which also lets the
//! command line be driven in-process.

mod commands;
mod error;
mod files;
mod geometry_csv;
mod report;
mod svg;

use std::ffi::OsString;

use clap::{error::ErrorKind, Parser, Subcommand};

use crate::commands::{evaluate, fit, pipeline, preprocess, stats, sweep, synth};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "defectometer", version, about, long_about = None)]
#[command(after_help = "Exit status: 0 success, 1 invalid input or arguments, 2 file system errors.")]
struct Cli {
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, short = 'j', global = true, default_value_t = 0)]
    jobs: usize,
    /// Only log errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// More logging; repeat for trace output.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build 3-channel composites (raw, CLAHE, blur), optionally with the 8 dihedral variants.
    Preprocess(preprocess::Args),
    /// Render synthetic micrographs with exact ground truth.
    Synth(synth::Args),
    /// Segment and fit an ellipse to every box; writes a geometry CSV.
    Fit(fit::Args),
    /// Precision, recall, F1 and the confusion matrix at one operating point.
    Evaluate(evaluate::Args),
    /// Metrics over a grid of score and IoU thresholds.
    Sweep(sweep::Args),
    /// Per-class diameter and density statistics from geometry CSVs.
    Stats(stats::Args),
    /// Fit labels and detections, then compare their statistics.
    Pipeline(pipeline::Args),
}

fn init_logging(quiet: bool, verbose: u8) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .parse_default_env()
        .try_init()
        .ok();
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::invalid(format!("cannot start {} workers: {e}", cli.jobs)))?;
    pool.install(|| match &cli.command {
        Command::Preprocess(a) => preprocess::run(a),
        Command::Synth(a) => synth::run(a),
        Command::Fit(a) => fit::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Stats(a) => stats::run(a),
        Command::Pipeline(a) => pipeline::run(a),
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    init_logging(cli.quiet, cli.verbose);
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}
