use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use shapefair::data::{load_csv, split, LoadOptions};
use shapefair::gam::{train, TrainReport};
use shapefair::{Monotonicity, Schema, TrainConfig};

use crate::output::{InputFile, Output};
use crate::{CliError, OutArgs};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Headed CSV file.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML schema naming the label and feature columns.
    #[arg(long)]
    pub schema: PathBuf,
    /// Seeds the split and the minibatch shuffles.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    /// Comma-separated learning rates.
    #[arg(long, value_delimiter = ',', default_value = "0.0001,0.001,0.01,0.1,1")]
    pub lr_grid: Vec<f64>,
    #[arg(long, default_value_t = 128)]
    pub minibatch: usize,
    /// Drop every monotonicity tag from the schema.
    #[arg(long)]
    pub no_constraints: bool,
    /// Skip rows with missing cells instead of failing.
    #[arg(long)]
    pub drop_missing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct TrainRun {
    data: InputFile,
    schema: InputFile,
    seed: u64,
    epochs: usize,
    lr_grid: Vec<f64>,
    minibatch: usize,
    no_constraints: bool,
    drop_missing: bool,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: &'a TrainRun,
    dropped_rows: usize,
    #[serde(flatten)]
    report: &'a TrainReport,
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let (data_path, data) = InputFile::read(&args.data)?;
    let (schema_path, schema_file) = InputFile::read(&args.schema)?;
    let schema = Schema::read(&schema_path)?;
    let mut ds = load_csv(
        &data_path,
        &schema,
        LoadOptions {
            drop_missing: args.drop_missing,
        },
    )?;
    if args.no_constraints {
        let names: Vec<String> = ds.columns().iter().map(|c| c.name.clone()).collect();
        for n in names {
            ds.set_monotonicity(&n, Monotonicity::None)?;
        }
    }
    let cfg = TrainRun {
        data,
        schema: schema_file,
        seed: args.seed,
        epochs: args.epochs,
        lr_grid: args.lr_grid.clone(),
        minibatch: args.minibatch,
        no_constraints: args.no_constraints,
        drop_missing: args.drop_missing,
    };
    let out = Output::new(&args.out.out, "train", &cfg, args.seed)?;

    let assignment = split(&ds, args.seed)?;
    let config = TrainConfig {
        epochs: args.epochs,
        minibatch_size: args.minibatch,
        learning_rates: args.lr_grid,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let (mut model, report) = train(&ds, &assignment, &config)?;
    model.provenance = Some(out.provenance.clone());

    out.write_text("model.json", &model.to_json())?;
    out.write_json(
        "train_report.json",
        &ReportFile {
            config: &cfg,
            dropped_rows: ds.dropped_rows,
            report: &report,
        },
    )?;
    out.write_json("split.json", &assignment)?;

    eprintln!(
        "trained {} rows in {:.2}s; chosen learning rate {}",
        report.train_rows, report.wall_time_secs, report.chosen_rate
    );
    if report.grid_extension_warning {
        eprintln!("warning: chosen learning rate is at an end of the grid; consider extending it");
    }
    if ds.dropped_rows > 0 {
        eprintln!("dropped {} rows with missing cells", ds.dropped_rows);
    }
    Ok(())
}
