//! Pool-adjacent-violators and monotone projection of score tables.
//!
//! A [`ScoreTable`] holds `f(x, z)` on a finite grid: one row per feature
//! cell `x`, one column per protected value `z` (ascending). Projection acts
//! on each row independently, so the full projection costs `O(|X| |Z|)`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of a shape constraint along an ordered axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::Increasing => Direction::Decreasing,
            Direction::Decreasing => Direction::Increasing,
        }
    }
}

/// Weighted isotonic regression: the minimiser of `sum w_i (v_i - u_i)^2`
/// over non-decreasing `u`.
pub fn pav(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Argument("pav needs at least one value".into()));
    }
    if values.len() != weights.len() {
        return Err(Error::Dimension {
            expected: values.len(),
            found: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Argument(format!(
            "weight {i} is {} (must be positive and finite)",
            weights[i]
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Argument(format!("value {i} is not finite")));
    }
    let mut out = values.to_vec();
    pav_in_place(&mut out, Some(weights));
    Ok(out)
}

/// Unit-weight PAV applied in place. Callers guarantee finite input.
pub(crate) fn pav_in_place(values: &mut [f64], weights: Option<&[f64]>) {
    // Each block: (weighted mean, total weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        let mut cur = (v, w, 1usize);
        while let Some(&(mean, weight, len)) = blocks.last() {
            // Ties stay unpooled.
            if mean <= cur.0 {
                break;
            }
            blocks.pop();
            let total = weight + cur.1;
            cur = ((mean * weight + cur.0 * cur.1) / total, total, len + cur.2);
        }
        blocks.push(cur);
    }
    let mut i = 0;
    for (mean, _, len) in blocks {
        for slot in &mut values[i..i + len] {
            *slot = mean;
        }
        i += len;
    }
}

/// Projects `values` onto the monotone cone in the given direction (unit weights).
pub fn project_monotone(values: &mut [f64], direction: Direction) {
    match direction {
        Direction::Increasing => pav_in_place(values, None),
        Direction::Decreasing => {
            values.reverse();
            pav_in_place(values, None);
            values.reverse();
        }
    }
}

/// Scores `f(x, z)` over a finite grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub x_labels: Vec<String>,
    pub z_support: Vec<f64>,
    /// `scores[x][z]`
    pub scores: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(x_labels: Vec<String>, z_support: Vec<f64>, scores: Vec<Vec<f64>>) -> Result<Self> {
        let table = ScoreTable {
            x_labels,
            z_support,
            scores,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.z_support.is_empty() || self.x_labels.is_empty() {
            return Err(Error::Input("score table must have at least one row and column".into()));
        }
        if self.scores.len() != self.x_labels.len() {
            return Err(Error::Dimension {
                expected: self.x_labels.len(),
                found: self.scores.len(),
            });
        }
        for row in &self.scores {
            if row.len() != self.z_support.len() {
                return Err(Error::Dimension {
                    expected: self.z_support.len(),
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input("score table contains a non-finite value".into()));
            }
        }
        if self.z_support.iter().any(|z| !z.is_finite()) {
            return Err(Error::Input("z support contains a non-finite value".into()));
        }
        if self.z_support.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Input("z support must be sorted ascending".into()));
        }
        Ok(())
    }

    pub fn n_x(&self) -> usize {
        self.x_labels.len()
    }

    pub fn n_z(&self) -> usize {
        self.z_support.len()
    }

    /// Reads the grid CSV format: header `x,z1,z2,...`, then one row per
    /// feature cell with its identifier followed by scores.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(rec) => rec.map_err(|e| Error::Input(e.to_string()))?,
            None => return Err(Error::Input("empty grid file".into())),
        };
        if header.len() < 2 {
            return Err(Error::Input("grid header needs an x column and at least one z".into()));
        }
        let z_support = header
            .iter()
            .skip(1)
            .enumerate()
            .map(|(i, s)| {
                s.trim().parse::<f64>().map_err(|_| Error::Row {
                    row: 1,
                    message: format!("z header cell {} `{s}` is not numeric", i + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut x_labels = Vec::new();
        let mut scores = Vec::new();
        for (idx, rec) in records.enumerate() {
            let row = idx + 2;
            let rec = rec.map_err(|e| Error::Row {
                row,
                message: e.to_string(),
            })?;
            if rec.len() != z_support.len() + 1 {
                return Err(Error::Row {
                    row,
                    message: format!(
                        "ragged row: {} cells, expected {}",
                        rec.len(),
                        z_support.len() + 1
                    ),
                });
            }
            x_labels.push(rec[0].trim().to_string());
            let vals = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::Row {
                        row,
                        message: format!("cell `{s}` is not numeric"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            scores.push(vals);
        }
        ScoreTable::new(x_labels, z_support, scores)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(file).map_err(|e| Error::io(path, e))
    }

    pub fn to_writer<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "x")?;
        for z in &self.z_support {
            write!(w, ",{z}")?;
        }
        writeln!(w)?;
        for (label, row) in self.x_labels.iter().zip(&self.scores) {
            write!(w, "{label}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// L2 projection of a score table onto tables monotone in `z` for every `x`.
pub fn project_table(table: &ScoreTable, direction: Direction) -> ScoreTable {
    let mut out = table.clone();
    for row in &mut out.scores {
        project_monotone(row, direction);
    }
    out
}
