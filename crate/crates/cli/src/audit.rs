use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args};
use serde::Serialize;
use shapefair::data::{load_csv, split, LoadOptions};
use shapefair::gam::load_model;
use shapefair::metrics::{
    audit_grid, audit_monotonicity, average_violation_from_rates, default_deltas, default_probes,
    group_expectations, one_sided_pairs, ColumnAudit, FairnessReport, GridViolation, GroupedPredictions,
    Violation,
};
use shapefair::{Dataset, Direction, Error, GamModel, Schema, ScoreTable};

use crate::output::{optional_input, InputFile, Output};
use crate::{CliError, OrderArg, OutArgs};

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["model", "grid"])))]
pub struct AuditArgs {
    /// Model file written by `train`.
    #[arg(long, requires_all = ["data", "schema"])]
    pub model: Option<PathBuf>,
    /// Imported score grid (`x,z1,z2,...` CSV).
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// P(X = x | Z = z) in the grid layout; enables parity metrics for a grid.
    #[arg(long, requires = "grid")]
    pub conditional: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Protected column; overrides the schema's.
    #[arg(long)]
    pub protected: Option<String>,
    #[arg(long, value_enum, default_value_t = OrderArg::Ascending)]
    pub direction: OrderArg,
    /// Decision threshold on the predicted probability.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Split and probe seed; defaults to the seed stored in the model.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset rows sampled as audit probes.
    #[arg(long, default_value_t = 1000)]
    pub probes: usize,
    /// Extra column to audit, as `name` or `name:decreasing`; constrained
    /// columns are always audited.
    #[arg(long = "audit-column")]
    pub audit_columns: Vec<String>,
    #[arg(long)]
    pub drop_missing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct AuditRun {
    model: Option<InputFile>,
    grid: Option<InputFile>,
    conditional: Option<InputFile>,
    data: Option<InputFile>,
    schema: Option<InputFile>,
    protected: Option<String>,
    direction: OrderArg,
    threshold: f64,
    seed: u64,
    probes: usize,
    audit_columns: Vec<String>,
    drop_missing: bool,
}

#[derive(Serialize)]
struct ColumnViolations {
    column: String,
    direction: Direction,
    violations: Vec<Violation>,
}

#[derive(Serialize)]
struct ModelAudit<'a> {
    protected: &'a str,
    threshold: f64,
    test_rows: usize,
    full_rows: usize,
    reports: Vec<FairnessReport>,
    violations: Vec<ColumnViolations>,
}

#[derive(Serialize)]
struct GridAudit {
    report: Option<FairnessReport>,
    grid_audit: ColumnAudit,
    violations: Vec<GridViolation>,
}

pub fn run(args: AuditArgs) -> Result<(), CliError> {
    let (model_path, model_file) = optional_input(args.model.as_deref())?;
    let (grid_path, grid_file) = optional_input(args.grid.as_deref())?;
    let (cond_path, cond_file) = optional_input(args.conditional.as_deref())?;
    let (data_path, data_file) = optional_input(args.data.as_deref())?;
    let (schema_path, schema_file) = optional_input(args.schema.as_deref())?;
    let model = model_path.as_deref().map(load_model).transpose()?;
    let seed = args
        .seed
        .or_else(|| model.as_ref().and_then(|m| m.provenance.as_ref()).map(|p| p.seed))
        .unwrap_or(0);
    let cfg = AuditRun {
        model: model_file,
        grid: grid_file,
        conditional: cond_file,
        data: data_file,
        schema: schema_file,
        protected: args.protected.clone(),
        direction: args.direction,
        threshold: args.threshold,
        seed,
        probes: args.probes,
        audit_columns: args.audit_columns.clone(),
        drop_missing: args.drop_missing,
    };
    let out = Output::new(&args.out.out, "audit", &cfg, seed)?;

    match (model, grid_path) {
        (Some(model), _) => {
            let schema = Schema::read(schema_path.as_deref().expect("clap requires --schema"))?;
            let ds = load_csv(
                data_path.as_deref().expect("clap requires --data"),
                &schema,
                LoadOptions {
                    drop_missing: args.drop_missing,
                },
            )?;
            audit_model(&args, &out, &model, ds, schema.protected.as_deref(), seed)
        }
        (None, Some(grid)) => audit_table(&args, &out, &grid, cond_path.as_deref()),
        (None, None) => unreachable!("clap requires --model or --grid"),
    }
}

fn parse_audit_column(spec: &str) -> Result<(String, Direction), CliError> {
    match spec.rsplit_once(':') {
        None => Ok((spec.to_string(), Direction::Increasing)),
        Some((name, "increasing")) => Ok((name.to_string(), Direction::Increasing)),
        Some((name, "decreasing")) => Ok((name.to_string(), Direction::Decreasing)),
        Some((_, other)) => Err(CliError::Usage(format!(
            "audit column direction `{other}` must be `increasing` or `decreasing`"
        ))),
    }
}

fn audit_model(
    args: &AuditArgs,
    out: &Output,
    model: &GamModel,
    mut ds: Dataset,
    schema_protected: Option<&str>,
    seed: u64,
) -> Result<(), CliError> {
    let protected = args
        .protected
        .as_deref()
        .or(schema_protected)
        .ok_or_else(|| Error::Schema("no protected column: set `protected` in the schema or pass --protected".into()))?
        .to_string();
    ds.set_protected(&protected)?;

    let mut targets: Vec<(String, Direction)> = model
        .columns
        .iter()
        .filter_map(|c| c.curve.monotonicity().direction().map(|d| (c.name.clone(), d)))
        .collect();
    for spec in &args.audit_columns {
        let t = parse_audit_column(spec)?;
        if !targets.iter().any(|(n, _)| *n == t.0) {
            targets.push(t);
        }
    }
    let mut summaries = Vec::new();
    let mut violations = Vec::new();
    for (column, dir) in targets {
        let probes = default_probes(model, &ds, &column, args.probes, seed)?;
        let deltas = default_deltas(model, &column)?;
        let v = audit_monotonicity(model, &column, &probes, &deltas, dir)?;
        summaries.push(ColumnAudit::summarize(&column, dir, probes.len(), &v));
        violations.push(ColumnViolations {
            column,
            direction: dir,
            violations: v,
        });
    }

    let assignment = split(&ds, seed)?;
    let all: Vec<usize> = (0..ds.rows()).collect();
    let order = args.direction.group_order();
    let mut reports = Vec::new();
    for (scope, idx) in [("test", &assignment.test_indices), ("full", &all)] {
        let preds = GroupedPredictions::from_model(model, &ds, idx, args.threshold, order)?;
        let mut r = FairnessReport::from_predictions(scope, order, &preds)?;
        r.monotonicity = summaries.clone();
        reports.push(r);
    }

    let mut csv = String::from("scope,pair,metric,value\n");
    for r in &reports {
        let mut buf = Vec::new();
        r.write_csv_rows(&mut buf).expect("write to memory");
        csv.push_str(&String::from_utf8(buf).expect("utf-8 rows"));
    }
    out.write_csv("fairness_report.csv", &csv)?;
    out.write_csv("violations.csv", &violations_csv(&violations))?;
    out.write_json(
        "fairness_report.json",
        &ModelAudit {
            protected: &protected,
            threshold: args.threshold,
            test_rows: assignment.test_indices.len(),
            full_rows: all.len(),
            reports,
            violations,
        },
    )?;
    Ok(())
}

fn violations_csv(all: &[ColumnViolations]) -> String {
    let mut s = String::from("column,direction,probe,at,delta,magnitude\n");
    for c in all {
        let dir = match c.direction {
            Direction::Increasing => "increasing",
            Direction::Decreasing => "decreasing",
        };
        for v in &c.violations {
            let _ = writeln!(s, "{},{dir},{},{},{},{}", c.column, v.probe, v.at, v.delta, v.magnitude);
        }
    }
    s
}

/// Distinct gaps between adjacent grid `z` values.
pub fn grid_deltas(table: &ScoreTable) -> Vec<f64> {
    let mut d: Vec<f64> = table.z_support.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    d.dedup();
    d
}

/// Parity report for a grid under `conditional`, with groups in `order`.
pub fn table_report(
    table: &ScoreTable,
    conditional: &ScoreTable,
    order: OrderArg,
    scope: &str,
) -> Result<FairnessReport, CliError> {
    if conditional.x_labels != table.x_labels || conditional.z_support != table.z_support {
        return Err(Error::Input("conditional grid must share the score grid's x labels and z values".into()).into());
    }
    let mut e = group_expectations(table, &conditional.scores)?;
    let mut z = table.z_support.clone();
    if order == OrderArg::Descending {
        e.reverse();
        z.reverse();
    }
    let parity = one_sided_pairs(&z, &e);
    Ok(FairnessReport {
        scope: scope.to_string(),
        group_order: order.group_order(),
        average_violation: average_violation_from_rates(&parity.rates),
        parity,
        equal_opportunity: None,
        monotonicity: Vec::new(),
    })
}

fn audit_table(args: &AuditArgs, out: &Output, grid: &Path, conditional: Option<&Path>) -> Result<(), CliError> {
    let table = ScoreTable::read_csv(grid)?;
    let dir = args.direction.direction();
    let violations = audit_grid(&table, &grid_deltas(&table), dir)?;
    let grid_audit = ColumnAudit {
        column: "z".into(),
        direction: dir,
        probes: table.n_x(),
        violations: violations.len(),
        max_magnitude: violations.iter().map(|v| v.magnitude).fold(0.0, f64::max),
    };
    let report = match conditional {
        Some(p) => {
            let mut r = table_report(&table, &ScoreTable::read_csv(p)?, args.direction, "grid")?;
            r.monotonicity = vec![grid_audit.clone()];
            Some(r)
        }
        None => None,
    };

    let mut csv = String::from("scope,pair,metric,value\n");
    match &report {
        Some(r) => {
            let mut buf = Vec::new();
            r.write_csv_rows(&mut buf).expect("write to memory");
            csv.push_str(&String::from_utf8(buf).expect("utf-8 rows"));
        }
        None => {
            let _ = writeln!(csv, "grid,z,monotonicity_violations,{}", grid_audit.violations);
            let _ = writeln!(csv, "grid,z,monotonicity_max,{}", grid_audit.max_magnitude);
        }
    }
    out.write_csv("fairness_report.csv", &csv)?;
    let mut vcsv = String::from("x,z,delta,magnitude\n");
    for v in &violations {
        let _ = writeln!(vcsv, "{},{},{},{}", v.x, v.z, v.delta, v.magnitude);
    }
    out.write_csv("violations.csv", &vcsv)?;
    out.write_json(
        "fairness_report.json",
        &GridAudit {
            report,
            grid_audit,
            violations,
        },
    )?;
    Ok(())
}
