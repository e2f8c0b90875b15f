use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use shapefair::isotonic::project_table;
use shapefair::metrics::FairnessReport;
use shapefair::{Direction, ScoreTable};

use crate::audit::table_report;
use crate::output::{optional_input, InputFile, Output};
use crate::{CliError, OrderArg, OutArgs};

#[derive(Args, Debug)]
pub struct ProjectArgs {
    /// Score grid (`x,z1,z2,...` CSV).
    #[arg(long)]
    pub grid: PathBuf,
    /// P(X = x | Z = z) in the grid layout; adds before/after parity metrics.
    #[arg(long)]
    pub conditional: Option<PathBuf>,
    /// Ascending projects onto non-decreasing rows, descending onto non-increasing.
    #[arg(long, value_enum, default_value_t = OrderArg::Ascending)]
    pub direction: OrderArg,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct ProjectRun {
    grid: InputFile,
    conditional: Option<InputFile>,
    direction: OrderArg,
}

#[derive(Serialize)]
struct ProjectReport {
    direction: Direction,
    changed_cells: usize,
    max_change: f64,
    before: Option<FairnessReport>,
    after: Option<FairnessReport>,
}

pub fn run(args: ProjectArgs) -> Result<(), CliError> {
    let (grid_path, grid) = InputFile::read(&args.grid)?;
    let (cond_path, conditional) = optional_input(args.conditional.as_deref())?;
    let cfg = ProjectRun {
        grid,
        conditional,
        direction: args.direction,
    };
    let out = Output::new(&args.out.out, "project", &cfg, 0)?;

    let table = ScoreTable::read_csv(&grid_path)?;
    let dir = args.direction.direction();
    let projected = project_table(&table, dir);
    let diffs: Vec<f64> = table
        .scores
        .iter()
        .flatten()
        .zip(projected.scores.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .collect();
    let (before, after) = match cond_path {
        Some(p) => {
            let cond = ScoreTable::read_csv(&p)?;
            (
                Some(table_report(&table, &cond, args.direction, "original")?),
                Some(table_report(&projected, &cond, args.direction, "projected")?),
            )
        }
        None => (None, None),
    };

    let mut body = Vec::new();
    projected.to_writer(&mut body).expect("write to memory");
    out.write_csv("projected.csv", &String::from_utf8(body).expect("utf-8 grid"))?;
    out.write_json(
        "project_report.json",
        &ProjectReport {
            direction: dir,
            changed_cells: diffs.iter().filter(|d| **d > 0.0).count(),
            max_change: diffs.iter().copied().fold(0.0, f64::max),
            before,
            after,
        },
    )?;
    Ok(())
}
