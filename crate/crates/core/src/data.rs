//! Tabular data: schema, CSV ingestion, deterministic splits and quantile keys.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibrator::Monotonicity;
use crate::error::{Error, Result};

pub const DEFAULT_KEYPOINTS: usize = 20;

/// Kind of a model input column after categorical expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub monotonicity: Monotonicity,
    pub keypoint_count: usize,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>, monotonicity: Monotonicity) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Numeric,
            monotonicity,
            keypoint_count: DEFAULT_KEYPOINTS,
        }
    }

    pub fn boolean(name: impl Into<String>, monotonicity: Monotonicity) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Boolean,
            monotonicity,
            keypoint_count: 2,
        }
    }

    pub fn with_keypoints(mut self, k: usize) -> Self {
        self.keypoint_count = k;
        self
    }
}

/// Column kinds accepted in a schema file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaKind {
    Numeric,
    Boolean,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaColumn {
    pub name: String,
    pub kind: SchemaKind,
    #[serde(default)]
    pub monotonicity: Monotonicity,
    pub keypoints: Option<usize>,
    /// Categorical levels, in output order. Discovered from the data when absent.
    pub levels: Option<Vec<String>>,
}

/// Dataset schema, read from a TOML file:
///
/// ```toml
/// label = "pass_bar"
/// protected = "poverty"   # optional
///
/// [[column]]
/// name = "lsat"
/// kind = "numeric"
/// monotonicity = "increasing"
/// keypoints = 20
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub label: String,
    pub protected: Option<String>,
    #[serde(rename = "column")]
    pub columns: Vec<SchemaColumn>,
}

impl Schema {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("schema declares no columns".into()));
        }
        let mut seen = BTreeSet::new();
        for col in &self.columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", col.name)));
            }
            if col.name == self.label {
                return Err(Error::Schema(format!(
                    "label `{}` cannot also be a feature column",
                    col.name
                )));
            }
            match col.kind {
                SchemaKind::Categorical => {
                    if col.monotonicity != Monotonicity::None {
                        return Err(Error::Schema(format!(
                            "categorical column `{}` cannot carry a monotonicity constraint",
                            col.name
                        )));
                    }
                }
                SchemaKind::Boolean => {
                    if matches!(col.keypoints, Some(k) if k != 2) {
                        return Err(Error::Schema(format!(
                            "boolean column `{}` must use 2 keypoints",
                            col.name
                        )));
                    }
                }
                SchemaKind::Numeric => {
                    if matches!(col.keypoints, Some(k) if k < 2) {
                        return Err(Error::Schema(format!(
                            "column `{}` needs at least 2 keypoints",
                            col.name
                        )));
                    }
                }
            }
            if col.levels.is_some() && col.kind != SchemaKind::Categorical {
                return Err(Error::Schema(format!(
                    "`levels` given for non-categorical column `{}`",
                    col.name
                )));
            }
        }
        if let Some(p) = &self.protected {
            match self.columns.iter().find(|c| &c.name == p) {
                None => {
                    return Err(Error::Schema(format!("protected column `{p}` is not declared")))
                }
                Some(c) if c.kind == SchemaKind::Categorical => {
                    return Err(Error::Schema(format!(
                        "protected column `{p}` must be numeric or boolean (ordered groups)"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectedColumn {
    pub column: usize,
    /// Distinct values of the column, ascending.
    pub groups: Vec<f64>,
}

/// Column-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<ColumnSpec>,
    values: Vec<Vec<f64>>,
    labels: Vec<u8>,
    protected: Option<ProtectedColumn>,
    /// Rows skipped at ingestion because of missing cells.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<ColumnSpec>, values: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if columns.len() != values.len() {
            return Err(Error::Dimension {
                expected: columns.len(),
                found: values.len(),
            });
        }
        for (spec, col) in columns.iter().zip(&values) {
            if col.len() != labels.len() {
                return Err(Error::Input(format!(
                    "column `{}` has {} entries, expected {}",
                    spec.name,
                    col.len(),
                    labels.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Row {
                    row,
                    message: format!("non-finite value in column `{}`", spec.name),
                });
            }
            if spec.kind == ColumnKind::Boolean && col.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::Input(format!(
                    "boolean column `{}` holds a value other than 0/1",
                    spec.name
                )));
            }
        }
        if let Some(row) = labels.iter().position(|l| *l > 1) {
            return Err(Error::Row {
                row,
                message: "label must be 0 or 1".into(),
            });
        }
        Ok(Dataset {
            columns,
            values,
            labels,
            protected: None,
            dropped_rows: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, idx: usize) -> &[f64] {
        &self.values[idx]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|c| c[i]).collect()
    }

    pub fn protected(&self) -> Option<&ProtectedColumn> {
        self.protected.as_ref()
    }

    /// Designates `name` as the protected attribute; groups are its distinct values.
    pub fn set_protected(&mut self, name: &str) -> Result<()> {
        let column = self
            .column_index(name)
            .ok_or_else(|| Error::Schema(format!("protected column `{name}` not found")))?;
        let mut groups: Vec<f64> = self.values[column].clone();
        groups.sort_by(f64::total_cmp);
        groups.dedup();
        self.protected = Some(ProtectedColumn { column, groups });
        Ok(())
    }

    /// Overrides the monotonicity tag of a column.
    pub fn set_monotonicity(&mut self, name: &str, m: Monotonicity) -> Result<()> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::Schema(format!("unknown column `{name}`")))?;
        self.columns[idx].monotonicity = m;
        Ok(())
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Dataset> {
        let mut columns = Vec::with_capacity(names.len());
        let mut values = Vec::with_capacity(names.len());
        for name in names {
            let idx = self
                .column_index(name)
                .ok_or_else(|| Error::Schema(format!("unknown column `{name}`")))?;
            columns.push(self.columns[idx].clone());
            values.push(self.values[idx].clone());
        }
        let mut out = Dataset::new(columns, values, self.labels.clone())?;
        out.dropped_rows = self.dropped_rows;
        if let Some(p) = &self.protected {
            let name = &self.columns[p.column].name;
            if names.contains(&name.as_str()) {
                out.set_protected(name)?;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Skip rows with missing cells instead of failing; the count lands in
    /// [`Dataset::dropped_rows`].
    pub drop_missing: bool,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "N/A" | "NaN" | "nan" | "?" | "null" | "NULL")
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_bool(cell: &str) -> Option<f64> {
    match cell {
        "1" | "1.0" | "t" | "true" | "TRUE" | "True" => Some(1.0),
        "0" | "0.0" | "f" | "false" | "FALSE" | "False" => Some(0.0),
        _ => None,
    }
}

/// Loads a headed CSV against `schema`. Categorical columns expand to one
/// Boolean column per level, named `column=level`.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, opts: LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from_reader(file, schema, opts)
}

pub fn load_csv_from_reader<R: std::io::Read>(
    reader: R,
    schema: &Schema,
    opts: LoadOptions,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.clone(),
        Ok(_) => return Err(Error::Input("empty CSV file".into())),
        Err(e) => return Err(Error::Input(e.to_string())),
    };
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` missing from CSV header")))
    };
    let label_pos = find(&schema.label)?;
    let positions = schema
        .columns
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<Vec<_>>>()?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); schema.columns.len()];
    let mut labels = Vec::new();
    let mut dropped = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Row {
            row,
            message: e.to_string(),
        })?;
        let cells: Vec<&str> = std::iter::once(label_pos)
            .chain(positions.iter().copied())
            .map(|p| rec.get(p).unwrap_or("").trim())
            .collect();
        if let Some(miss) = cells.iter().position(|c| is_missing(c)) {
            if opts.drop_missing {
                dropped += 1;
                continue;
            }
            let name = if miss == 0 {
                &schema.label
            } else {
                &schema.columns[miss - 1].name
            };
            return Err(Error::Row {
                row,
                message: format!("missing value in column `{name}`"),
            });
        }
        let label = match parse_bool(cells[0]) {
            Some(v) => v as u8,
            None => {
                return Err(Error::Row {
                    row,
                    message: format!("label `{}` is not 0 or 1", cells[0]),
                })
            }
        };
        for (j, col) in schema.columns.iter().enumerate() {
            let cell = cells[j + 1];
            let ok = match col.kind {
                SchemaKind::Numeric => parse_number(cell).is_some(),
                SchemaKind::Boolean => parse_bool(cell).is_some(),
                SchemaKind::Categorical => match &col.levels {
                    Some(levels) => levels.iter().any(|l| l == cell),
                    None => true,
                },
            };
            if !ok {
                return Err(Error::Row {
                    row,
                    message: format!("cannot parse `{cell}` in column `{}`", col.name),
                });
            }
            raw[j].push(cell.to_string());
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Input("CSV contains no usable data rows".into()));
    }

    let mut columns = Vec::new();
    let mut values = Vec::new();
    for (col, cells) in schema.columns.iter().zip(raw) {
        match col.kind {
            SchemaKind::Numeric => {
                let mut spec = ColumnSpec::numeric(&col.name, col.monotonicity);
                spec.keypoint_count = col.keypoints.unwrap_or(DEFAULT_KEYPOINTS);
                columns.push(spec);
                values.push(cells.iter().map(|c| parse_number(c).unwrap()).collect());
            }
            SchemaKind::Boolean => {
                columns.push(ColumnSpec::boolean(&col.name, col.monotonicity));
                values.push(cells.iter().map(|c| parse_bool(c).unwrap()).collect());
            }
            SchemaKind::Categorical => {
                let levels = match &col.levels {
                    Some(l) => l.clone(),
                    None => discover_levels(&cells),
                };
                for level in &levels {
                    columns.push(ColumnSpec::boolean(
                        format!("{}={}", col.name, level),
                        Monotonicity::None,
                    ));
                    values.push(cells.iter().map(|c| (c == level) as u8 as f64).collect());
                }
            }
        }
    }
    let mut ds = Dataset::new(columns, values, labels)?;
    ds.dropped_rows = dropped;
    if let Some(p) = &schema.protected {
        ds.set_protected(p)?;
    }
    Ok(ds)
}

/// Distinct levels, numerically ordered when every level parses as a number.
fn discover_levels(cells: &[String]) -> Vec<String> {
    let set: BTreeSet<&str> = cells.iter().map(String::as_str).collect();
    let mut levels: Vec<String> = set.into_iter().map(str::to_string).collect();
    if levels.iter().all(|l| l.parse::<f64>().is_ok()) {
        levels.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    levels
}

pub const TRAIN_FRACTION: f64 = 0.7;
pub const VALIDATION_FRACTION: f64 = 0.1;
pub const MIN_SPLIT_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Uniformly random 70/10/20 partition of the row indices.
///
/// The permutation is a Fisher-Yates shuffle driven by ChaCha8 seeded with
/// `seed` through `SeedableRng::seed_from_u64`. Step `i`, for `i` from `n-1`
/// down to 1, draws one `u64` and picks `j = (u * (i + 1)) >> 64`. The first
/// `round(0.7 n)` shuffled rows train, the next `round(0.1 n)` validate, the
/// rest test; each index set is returned sorted.
pub fn split(dataset: &Dataset, seed: u64) -> Result<SplitAssignment> {
    split_rows(dataset.rows(), seed)
}

pub fn split_rows(n: usize, seed: u64) -> Result<SplitAssignment> {
    if n < MIN_SPLIT_ROWS {
        return Err(Error::Split(format!(
            "need at least {MIN_SPLIT_ROWS} rows to split, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    shuffle(&mut perm, &mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
    let n_val = (VALIDATION_FRACTION * n as f64).round() as usize;
    let mut train = perm[..n_train].to_vec();
    let mut val = perm[n_train..n_train + n_val].to_vec();
    let mut test = perm[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitAssignment {
        seed,
        train_indices: train,
        validation_indices: val,
        test_indices: test,
    })
}

/// Fisher-Yates shuffle with multiply-shift index draws (see [`split`]).
pub(crate) fn shuffle<T>(items: &mut [T], rng: &mut impl RngCore) {
    for i in (1..items.len()).rev() {
        let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
        items.swap(i, j);
    }
}

/// Keys at `k` evenly spaced quantile levels, duplicates collapsed.
///
/// Level `q` on `n` sorted values sits at position `q (n - 1)`, linearly
/// interpolated between its neighbours. Non-finite values are ignored.
pub fn quantile_keypoints(values: &[f64], k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Argument(format!("need k >= 2 keypoints, got {k}")));
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Err(Error::Argument("no finite values for quantiles".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if sorted[0] == sorted[n - 1] {
        return Err(Error::DegenerateFeature { value: sorted[0] });
    }
    let mut keys: Vec<f64> = Vec::with_capacity(k);
    for i in 0..k {
        let key = if i == 0 {
            sorted[0]
        } else if i == k - 1 {
            sorted[n - 1]
        } else {
            let pos = i as f64 / (k - 1) as f64 * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            if lo + 1 < n && frac > 0.0 {
                sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
            } else {
                sorted[lo]
            }
        };
        if keys.last().is_none_or(|&last| key > last) {
            keys.push(key);
        }
    }
    Ok(keys)
}
