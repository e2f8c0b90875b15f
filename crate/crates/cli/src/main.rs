//! `shapefair` command line: train shape-constrained GAMs, audit fairness
//! and monotonicity, check the parity bounds, and export plot data.
//!
//! Exit codes: 0 success, 2 usage, 3 i/o, 4 schema, 5 numeric, 6 a bound
//! check failed.

mod audit;
mod bounds;
mod output;
mod plots;
mod project;
mod train;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use shapefair::metrics::GroupOrder;
use shapefair::{Direction, ErrorCategory};

#[derive(Parser, Debug)]
#[command(name = "shapefair", version, about = "Shape-constrained GAMs and one-sided fairness analysis")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a GAM with projected SGD; writes model.json, train_report.json, split.json.
    Train(train::TrainArgs),
    /// Fairness metrics and monotonicity audit of a model or an imported score grid.
    Audit(audit::AuditArgs),
    /// Check the monotonicity-to-parity bounds on discrete cases, or estimate C from data.
    Bounds(bounds::BoundsArgs),
    /// Monotone projection of a score grid along z.
    Project(project::ProjectArgs),
    /// CSV data for calibrator curves, 2-d prediction grids and label means.
    ExportPlots(plots::PlotArgs),
    /// Write the bundled counterexample fixtures.
    Fixtures(bounds::FixturesArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "SHAPEFAIR_OUT", default_value = ".")]
    pub out: PathBuf,
}

/// Order of the protected groups; `j` precedes `k` in one-sided comparisons.
#[derive(ValueEnum, Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderArg {
    #[default]
    Ascending,
    Descending,
}

impl OrderArg {
    pub fn group_order(self) -> GroupOrder {
        match self {
            OrderArg::Ascending => GroupOrder::Ascending,
            OrderArg::Descending => GroupOrder::Descending,
        }
    }

    /// Monotone direction along `z` that favours later groups.
    pub fn direction(self) -> Direction {
        match self {
            OrderArg::Ascending => Direction::Increasing,
            OrderArg::Descending => Direction::Decreasing,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Core(shapefair::Error),
    Io { path: PathBuf, source: std::io::Error },
    Usage(String),
    /// A bound that must hold did not.
    Theorem(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Theorem(_) => 6,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Io => 3,
                ErrorCategory::Schema => 4,
                ErrorCategory::Numeric => 5,
                ErrorCategory::Theorem => 6,
            },
        }
    }

    fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "usage",
            3 => "io",
            4 => "schema",
            5 => "numeric",
            _ => "theorem",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Usage(m) | CliError::Theorem(m) => f.write_str(m),
        }
    }
}

impl From<shapefair::Error> for CliError {
    fn from(e: shapefair::Error) -> Self {
        CliError::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train::run(a),
        Command::Audit(a) => audit::run(a),
        Command::Bounds(a) => bounds::run(a),
        Command::Project(a) => project::run(a),
        Command::ExportPlots(a) => plots::run(a),
        Command::Fixtures(a) => bounds::run_fixtures(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shapefair: {} error: {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
