use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use shapefair::data::{load_csv, LoadOptions};
use shapefair::gam::{load_model, sigmoid};
use shapefair::{Dataset, Error, GamModel, Monotonicity, Schema};

use crate::output::{optional_input, InputFile, Output};
use crate::{CliError, OutArgs};

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Model file; enables calibrator curves and the 2-d prediction grid.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Equal-width bins for label means; columns with at most this many
    /// distinct values get one bin per value.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// The two columns of the 2-d grid as `a,b` (default: the model's first two).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    #[arg(long)]
    pub drop_missing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct PlotRun {
    model: Option<InputFile>,
    data: InputFile,
    schema: InputFile,
    bins: usize,
    features: Option<Vec<String>>,
    drop_missing: bool,
}

pub fn run(args: PlotArgs) -> Result<(), CliError> {
    if args.bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }
    if args.features.as_ref().is_some_and(|f| f.len() != 2) {
        return Err(CliError::Usage("--features takes exactly two columns, `a,b`".into()));
    }
    let (model_path, model_file) = optional_input(args.model.as_deref())?;
    let (data_path, data) = InputFile::read(&args.data)?;
    let (schema_path, schema_file) = InputFile::read(&args.schema)?;
    let cfg = PlotRun {
        model: model_file,
        data,
        schema: schema_file,
        bins: args.bins,
        features: args.features.clone(),
        drop_missing: args.drop_missing,
    };
    let out = Output::new(&args.out.out, "export-plots", &cfg, 0)?;

    let schema = Schema::read(&schema_path)?;
    let ds = load_csv(
        &data_path,
        &schema,
        LoadOptions {
            drop_missing: args.drop_missing,
        },
    )?;
    out.write_csv("label_means.csv", &label_means(&ds, args.bins))?;

    if let Some(path) = model_path {
        let model = load_model(&path)?;
        out.write_csv("calibrators.csv", &calibrators(&model))?;
        if model.columns.len() >= 2 {
            let (a, b) = match &args.features {
                Some(f) => (f[0].clone(), f[1].clone()),
                None => (model.columns[0].name.clone(), model.columns[1].name.clone()),
            };
            out.write_csv("grid_2d.csv", &grid_2d(&model, &ds, &a, &b)?)?;
        }
    }
    Ok(())
}

fn calibrators(model: &GamModel) -> String {
    let mut s = String::from("column,monotonicity,key,value\n");
    for c in &model.columns {
        let tag = match c.curve.monotonicity() {
            Monotonicity::None => "none",
            Monotonicity::Increasing => "increasing",
            Monotonicity::Decreasing => "decreasing",
        };
        for (k, v) in c.curve.keys().iter().zip(c.curve.values()) {
            let _ = writeln!(s, "{},{tag},{k},{v}", c.name);
        }
    }
    s
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Scores over the cross product of two columns' keypoints; other columns
/// sit at their dataset median.
fn grid_2d(model: &GamModel, ds: &Dataset, a: &str, b: &str) -> Result<String, CliError> {
    let find = |name: &str| {
        model
            .column_index(name)
            .ok_or_else(|| Error::Schema(format!("model has no column `{name}`")))
    };
    let (ia, ib) = (find(a)?, find(b)?);
    if ia == ib {
        return Err(CliError::Usage("--features needs two different columns".into()));
    }
    let mut base: Vec<f64> = Vec::with_capacity(model.columns.len());
    for c in &model.columns {
        let idx = ds
            .column_index(&c.name)
            .ok_or_else(|| Error::Schema(format!("dataset has no column `{}`", c.name)))?;
        base.push(median(ds.column(idx)));
    }
    let mut s = format!("{a},{b},score,probability\n");
    for &ka in model.columns[ia].curve.keys() {
        for &kb in model.columns[ib].curve.keys() {
            let mut row = base.clone();
            row[ia] = ka;
            row[ib] = kb;
            let score = model.predict_score(&row)?;
            let _ = writeln!(s, "{ka},{kb},{score},{}", sigmoid(score));
        }
    }
    Ok(s)
}

/// Per-bin label mean and its standard error (sample sd / sqrt(n)).
fn label_means(ds: &Dataset, bins: usize) -> String {
    let mut s = String::from("column,bin,lo,hi,count,mean,stderr\n");
    let labels = ds.labels();
    for (c, spec) in ds.columns().iter().enumerate() {
        let col = ds.column(c);
        let mut distinct = col.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let edges: Vec<(f64, f64)> = if distinct.len() <= bins {
            distinct.iter().map(|&v| (v, v)).collect()
        } else {
            let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
            let w = (hi - lo) / bins as f64;
            (0..bins)
                .map(|i| (lo + w * i as f64, if i + 1 == bins { hi } else { lo + w * (i + 1) as f64 }))
                .collect()
        };
        let mut acc = vec![(0usize, 0.0f64); edges.len()];
        for (v, &y) in col.iter().zip(labels) {
            let b = if distinct.len() <= bins {
                distinct.partition_point(|d| d < v)
            } else {
                let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
                (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
            };
            acc[b].0 += 1;
            acc[b].1 += y as f64;
        }
        for (b, ((lo, hi), (n, sum))) in edges.iter().zip(&acc).enumerate() {
            if *n == 0 {
                let _ = writeln!(s, "{},{b},{lo},{hi},0,,", spec.name);
                continue;
            }
            let nf = *n as f64;
            let mean = sum / nf;
            // labels are 0/1, so the sum of squares equals the sum
            let se = if *n > 1 {
                ((sum - nf * mean * mean) / (nf - 1.0) / nf).max(0.0).sqrt()
            } else {
                0.0
            };
            let _ = writeln!(s, "{},{b},{lo},{hi},{n},{mean},{se}", spec.name);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use shapefair::ColumnSpec;

    #[test]
    fn label_means_match_hand_computation() {
        let ds = Dataset::new(
            vec![ColumnSpec::numeric("g", Monotonicity::None)],
            vec![vec![0.0, 0.0, 0.0, 1.0, 1.0]],
            vec![1, 0, 1, 1, 1],
        )
        .unwrap();
        let text = label_means(&ds, 10);
        let rows: Vec<&str> = text.lines().skip(1).collect();
        // group 0: mean 2/3, sample variance 1/3, se sqrt(1/9)
        let r0: Vec<&str> = rows[0].split(',').collect();
        assert_eq!(r0[4], "3");
        assert!((r0[5].parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((r0[6].parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let r1: Vec<&str> = rows[1].split(',').collect();
        assert_eq!((r1[4], r1[5], r1[6]), ("2", "1", "0"));
    }
}
