//! `peasflow` command line: run and sweep simulations, generate workloads,
//! check tuples for compliance and measure their meta-data size.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 input error, 3 at least one
//! attribute failed a compliance check. Machine-readable output goes to
//! stdout, human summaries to stderr.

mod commands;
mod range;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use range::parse_range;

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_DROPPED: u8 = 3;

/// Environment variable that takes precedence over `--seed`.
pub const SEED_ENV: &str = "PEASFLOW_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "peasflow",
    version,
    about = "Privacy-preference enforcement simulator for smart-object networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its metrics reports.
    Run(RunArgs),
    /// Run a scenario template over a range of queries, preference sets or sensing-object counts.
    Sweep(SweepArgs),
    /// Generate taxonomies, preference sets or query-family scenarios.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Check a PEAS tuple against a consumer policy.
    Check(CheckArgs),
    /// Print the canonical meta-data size of a PEAS tuple.
    Encode(EncodeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Enforcement {
    On,
    Off,
    Both,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub enforcement: Enforcement,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// One thread per node instead of the sequential scheduler.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Scenario whose taxonomies and workload the sweep starts from.
    pub template: PathBuf,
    /// Query-family members, e.g. `q1..q10`.
    #[arg(long, group = "axis")]
    pub family: Option<String>,
    /// Preference sets, e.g. `simple,full`.
    #[arg(long, group = "axis")]
    pub pp: Option<String>,
    /// Sensing-object counts, e.g. `1..10`.
    #[arg(long, group = "axis")]
    pub sensing: Option<String>,
    /// Repetitions per point; timing columns report the median.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeKind {
    Purpose,
    Category,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PpKind {
    None,
    Simple,
    Full,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Random taxonomy as a `{root, edges}` document.
    Taxonomy {
        #[arg(long, value_enum)]
        kind: TreeKind,
        #[arg(long, default_value_t = 100)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Preference set over a scenario's taxonomies.
    PpSet {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        kind: PpKind,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Query-family scenarios `q<n>.json`.
    Qfamily {
        #[arg(long, default_value = "q1..q10")]
        range: String,
        /// Sensing nodes per graph.
        #[arg(long, default_value_t = 2)]
        sensing: usize,
        /// Sensing objects in the workload.
        #[arg(long, default_value_t = 2)]
        objects: usize,
        #[arg(long, default_value_t = 100)]
        tree_size: usize,
        #[arg(long, value_enum, default_value = "full")]
        pp: PpKind,
        #[arg(long, default_value_t = 50.0)]
        rate: f64,
        #[arg(long, default_value_t = 60)]
        duration: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub scenario: PathBuf,
    #[arg(long)]
    pub tuple: PathBuf,
    #[arg(long)]
    pub consumer: String,
    #[arg(long)]
    pub purpose: String,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub tuple: PathBuf,
    /// Number ids after this scenario's taxonomies instead of first use.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn execute(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Gen(g) => commands::gen(g),
        Command::Check(a) => commands::check(a),
        Command::Encode(a) => commands::encode(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
