//! One-sided statistical parity and equal opportunity, the average violation
//! `R_f`, and ceteris-paribus monotonicity audits.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{shuffle, Dataset};
use crate::error::{Error, Result};
use crate::gam::{sigmoid, GamModel};
use crate::isotonic::{Direction, ScoreTable};

/// Which end of the protected attribute should be favoured.
///
/// `Ascending` means groups are compared in increasing `z`: a one-sided
/// violation is a lower-`z` group receiving more positive outcomes than a
/// higher-`z` group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupOrder {
    #[default]
    Ascending,
    Descending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub z: f64,
    /// Decisions in {0, 1}, or real scores whose mean stands in for the rate.
    pub decisions: Vec<f64>,
    pub labels: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedPredictions {
    /// In comparison order.
    pub groups: Vec<Group>,
}

impl GroupedPredictions {
    pub fn from_rows(
        z: &[f64],
        decisions: &[f64],
        labels: Option<&[u8]>,
        order: GroupOrder,
    ) -> Result<Self> {
        if z.len() != decisions.len() {
            return Err(Error::Dimension {
                expected: z.len(),
                found: decisions.len(),
            });
        }
        if let Some(l) = labels {
            if l.len() != z.len() {
                return Err(Error::Dimension {
                    expected: z.len(),
                    found: l.len(),
                });
            }
        }
        if z.iter().any(|v| v.is_nan()) {
            return Err(Error::Input("protected value is NaN".into()));
        }
        let mut values: Vec<f64> = z.to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        if order == GroupOrder::Descending {
            values.reverse();
        }
        let mut groups: Vec<Group> = values
            .iter()
            .map(|&z| Group {
                z,
                decisions: Vec::new(),
                labels: labels.map(|_| Vec::new()),
            })
            .collect();
        for (i, zi) in z.iter().enumerate() {
            let g = values.iter().position(|v| v == zi).unwrap();
            groups[g].decisions.push(decisions[i]);
            if let (Some(dst), Some(src)) = (groups[g].labels.as_mut(), labels) {
                dst.push(src[i]);
            }
        }
        Ok(GroupedPredictions { groups })
    }

    /// Thresholded decisions of `model` on `indices`, grouped by the
    /// dataset's protected column.
    pub fn from_model(
        model: &GamModel,
        dataset: &Dataset,
        indices: &[usize],
        threshold: f64,
        order: GroupOrder,
    ) -> Result<Self> {
        let protected = dataset
            .protected()
            .ok_or_else(|| Error::Schema("dataset has no protected column".into()))?;
        let scores = model.scores(dataset, indices)?;
        let decisions: Vec<f64> = scores
            .iter()
            .map(|&s| (sigmoid(s) >= threshold) as u8 as f64)
            .collect();
        let z: Vec<f64> = indices.iter().map(|&i| dataset.column(protected.column)[i]).collect();
        let labels: Vec<u8> = indices.iter().map(|&i| dataset.labels()[i]).collect();
        Self::from_rows(&z, &decisions, Some(&labels), order)
    }

    fn positive_rates(&self) -> Result<Vec<f64>> {
        self.groups
            .iter()
            .map(|g| {
                if g.decisions.is_empty() {
                    return Err(Error::Metric(format!("group z={} is empty", g.z)));
                }
                Ok(g.decisions.iter().sum::<f64>() / g.decisions.len() as f64)
            })
            .collect()
    }

    fn true_positive_rates(&self) -> Result<Vec<f64>> {
        self.groups
            .iter()
            .map(|g| {
                let labels = g
                    .labels
                    .as_ref()
                    .ok_or_else(|| Error::Metric("labels are required for equal opportunity".into()))?;
                let (hits, pos) = g
                    .decisions
                    .iter()
                    .zip(labels)
                    .filter(|(_, &y)| y == 1)
                    .fold((0.0, 0usize), |(h, n), (d, _)| (h + d, n + 1));
                if pos == 0 {
                    return Err(Error::Metric(format!("group z={} has no positive labels", g.z)));
                }
                Ok(hits / pos as f64)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairViolation {
    pub j: f64,
    pub k: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseViolations {
    /// Per-group rates, in comparison order.
    pub rates: Vec<f64>,
    pub pairs: Vec<PairViolation>,
    pub max: f64,
}

/// `max(0, rate_j - rate_k)` for every ordered pair `j` before `k`.
pub fn one_sided_pairs(z: &[f64], rates: &[f64]) -> PairwiseViolations {
    let mut pairs = Vec::new();
    for a in 0..rates.len() {
        for b in a + 1..rates.len() {
            pairs.push(PairViolation {
                j: z[a],
                k: z[b],
                value: (rates[a] - rates[b]).max(0.0),
            });
        }
    }
    let max = pairs.iter().map(|p| p.value).fold(0.0, f64::max);
    PairwiseViolations {
        rates: rates.to_vec(),
        pairs,
        max,
    }
}

fn need_two(preds: &GroupedPredictions) -> Result<()> {
    if preds.groups.len() < 2 {
        return Err(Error::Metric("one-sided metrics need at least two groups".into()));
    }
    Ok(())
}

pub fn one_sided_parity(preds: &GroupedPredictions) -> Result<PairwiseViolations> {
    need_two(preds)?;
    let z: Vec<f64> = preds.groups.iter().map(|g| g.z).collect();
    Ok(one_sided_pairs(&z, &preds.positive_rates()?))
}

pub fn max_one_sided_parity(preds: &GroupedPredictions) -> Result<f64> {
    one_sided_parity(preds).map(|p| p.max)
}

pub fn one_sided_equal_opportunity(preds: &GroupedPredictions) -> Result<PairwiseViolations> {
    need_two(preds)?;
    let z: Vec<f64> = preds.groups.iter().map(|g| g.z).collect();
    Ok(one_sided_pairs(&z, &preds.true_positive_rates()?))
}

pub fn max_one_sided_equal_opportunity(preds: &GroupedPredictions) -> Result<f64> {
    one_sided_equal_opportunity(preds).map(|p| p.max)
}

/// Telescoped average violation from group rates: `(first - last) / m`.
pub fn average_violation_from_rates(rates: &[f64]) -> f64 {
    match rates {
        [] => 0.0,
        [first, .., last] => (first - last) / rates.len() as f64,
        [_] => 0.0,
    }
}

fn check_conditional(table: &ScoreTable, conditional: &[Vec<f64>]) -> Result<()> {
    if conditional.len() != table.n_x() {
        return Err(Error::Dimension {
            expected: table.n_x(),
            found: conditional.len(),
        });
    }
    for row in conditional {
        if row.len() != table.n_z() {
            return Err(Error::Dimension {
                expected: table.n_z(),
                found: row.len(),
            });
        }
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Input("conditional probabilities must lie in [0, 1]".into()));
        }
    }
    for z in 0..table.n_z() {
        let total: f64 = conditional.iter().map(|r| r[z]).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!(
                "P(X | Z = {}) sums to {total}, not 1",
                table.z_support[z]
            )));
        }
    }
    Ok(())
}

/// `E[f(X, Z) | Z = z]` for every `z`, with `conditional[x][z] = P(X = x | Z = z)`.
pub fn group_expectations(table: &ScoreTable, conditional: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_conditional(table, conditional)?;
    Ok((0..table.n_z())
        .map(|z| {
            table
                .scores
                .iter()
                .zip(conditional)
                .map(|(f, p)| f[z] * p[z])
                .sum()
        })
        .collect())
}

/// Average statistical parity violation `R_f` of a score table.
pub fn average_violation_rf(table: &ScoreTable, conditional: &[Vec<f64>]) -> Result<f64> {
    let e = group_expectations(table, conditional)?;
    Ok(average_violation_from_rates(&e))
}

/// Pairwise one-sided parity violations of a score table (ascending `z`).
pub fn table_one_sided_parity(table: &ScoreTable, conditional: &[Vec<f64>]) -> Result<PairwiseViolations> {
    let e = group_expectations(table, conditional)?;
    Ok(one_sided_pairs(&table.z_support, &e))
}

/// Anything that maps a feature row to a real score.
pub trait ScoreFunction {
    fn input_index(&self, name: &str) -> Option<usize>;
    fn score(&self, row: &[f64]) -> Result<f64>;
}

impl ScoreFunction for GamModel {
    fn input_index(&self, name: &str) -> Option<usize> {
        self.column_index(name)
    }

    fn score(&self, row: &[f64]) -> Result<f64> {
        self.predict_score(row)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub probe: usize,
    /// Value of the audited column before the step.
    pub at: f64,
    pub delta: f64,
    /// Size of the move against the required direction (> 0).
    pub magnitude: f64,
}

/// Steps the audited column by every `delta` on every probe row, all other
/// inputs fixed, and reports each move against `direction`.
pub fn audit_monotonicity<M: ScoreFunction + ?Sized>(
    model: &M,
    column: &str,
    probes: &[Vec<f64>],
    deltas: &[f64],
    direction: Direction,
) -> Result<Vec<Violation>> {
    let idx = model
        .input_index(column)
        .ok_or_else(|| Error::Schema(format!("unknown column `{column}`")))?;
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(Error::Argument(format!("audit delta {d} must be positive")));
    }
    let sign = match direction {
        Direction::Increasing => 1.0,
        Direction::Decreasing => -1.0,
    };
    let mut out = Vec::new();
    for (p, row) in probes.iter().enumerate() {
        let base = model.score(row)?;
        let mut moved = row.clone();
        for &delta in deltas {
            moved[idx] = row[idx] + delta;
            let change = sign * (model.score(&moved)? - base);
            if change < 0.0 {
                out.push(Violation {
                    probe: p,
                    at: row[idx],
                    delta,
                    magnitude: -change,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridViolation {
    pub x: String,
    pub z: f64,
    pub delta: f64,
    pub magnitude: f64,
}

/// Monotonicity audit of an imported grid along its `z` axis. Steps whose
/// target `z + delta` is not on the grid are skipped.
pub fn audit_grid(table: &ScoreTable, deltas: &[f64], direction: Direction) -> Result<Vec<GridViolation>> {
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(Error::Argument(format!("audit delta {d} must be positive")));
    }
    let sign = match direction {
        Direction::Increasing => 1.0,
        Direction::Decreasing => -1.0,
    };
    let zs = &table.z_support;
    let scale = zs.iter().fold(1.0_f64, |m, z| m.max(z.abs()));
    let mut out = Vec::new();
    for (label, row) in table.x_labels.iter().zip(&table.scores) {
        for (a, &z) in zs.iter().enumerate() {
            for &delta in deltas {
                let Some(b) = zs.iter().position(|&t| (t - (z + delta)).abs() <= 1e-12 * scale) else {
                    continue;
                };
                let change = sign * (row[b] - row[a]);
                if change < 0.0 {
                    out.push(GridViolation {
                        x: label.clone(),
                        z,
                        delta,
                        magnitude: -change,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Distinct gaps between adjacent keypoints of the audited column.
pub fn default_deltas(model: &GamModel, column: &str) -> Result<Vec<f64>> {
    let idx = model
        .column_index(column)
        .ok_or_else(|| Error::Schema(format!("unknown column `{column}`")))?;
    let mut gaps: Vec<f64> = model.columns[idx]
        .curve
        .keys()
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect();
    gaps.sort_by(f64::total_cmp);
    gaps.dedup();
    if gaps.is_empty() {
        gaps.push(1.0);
    }
    Ok(gaps)
}

/// Up to `sample` dataset rows (seeded), plus copies of the first sampled row
/// with the audited column set to each of its keypoints.
pub fn default_probes(
    model: &GamModel,
    dataset: &Dataset,
    column: &str,
    sample: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let idx = model
        .column_index(column)
        .ok_or_else(|| Error::Schema(format!("unknown column `{column}`")))?;
    let mut order: Vec<usize> = (0..dataset.rows()).collect();
    shuffle(&mut order, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut probes: Vec<Vec<f64>> = order.iter().take(sample).map(|&i| dataset.row(i)).collect();
    if let Some(first) = probes.first().cloned() {
        for &k in model.columns[idx].curve.keys() {
            let mut p = first.clone();
            p[idx] = k;
            probes.push(p);
        }
    }
    Ok(probes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnAudit {
    pub column: String,
    pub direction: Direction,
    pub probes: usize,
    pub violations: usize,
    pub max_magnitude: f64,
}

impl ColumnAudit {
    pub fn summarize(column: &str, direction: Direction, probes: usize, v: &[Violation]) -> Self {
        ColumnAudit {
            column: column.to_string(),
            direction,
            probes,
            violations: v.len(),
            max_magnitude: v.iter().map(|x| x.magnitude).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// Which rows the frequencies come from, e.g. `test` or `full`.
    pub scope: String,
    pub group_order: GroupOrder,
    pub parity: PairwiseViolations,
    pub equal_opportunity: Option<PairwiseViolations>,
    pub average_violation: f64,
    pub monotonicity: Vec<ColumnAudit>,
}

impl FairnessReport {
    /// Parity, equal opportunity (when every group has positives) and `R_f`.
    pub fn from_predictions(scope: &str, order: GroupOrder, preds: &GroupedPredictions) -> Result<Self> {
        let parity = one_sided_parity(preds)?;
        let equal_opportunity = match one_sided_equal_opportunity(preds) {
            Ok(eo) => Some(eo),
            Err(Error::Metric(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(FairnessReport {
            scope: scope.to_string(),
            group_order: order,
            average_violation: average_violation_from_rates(&parity.rates),
            parity,
            equal_opportunity,
            monotonicity: Vec::new(),
        })
    }

    /// Flat `scope,pair,metric,value` rows.
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for p in &self.parity.pairs {
            writeln!(w, "{},{}<{},parity,{}", self.scope, p.j, p.k, p.value)?;
        }
        writeln!(w, "{},max,parity,{}", self.scope, self.parity.max)?;
        if let Some(eo) = &self.equal_opportunity {
            for p in &eo.pairs {
                writeln!(w, "{},{}<{},equal_opportunity,{}", self.scope, p.j, p.k, p.value)?;
            }
            writeln!(w, "{},max,equal_opportunity,{}", self.scope, eo.max)?;
        }
        writeln!(w, "{},all,average_violation,{}", self.scope, self.average_violation)?;
        for a in &self.monotonicity {
            writeln!(w, "{},{},monotonicity_violations,{}", self.scope, a.column, a.violations)?;
            writeln!(w, "{},{},monotonicity_max,{}", self.scope, a.column, a.max_magnitude)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grouped(rates: &[(f64, &[f64])]) -> GroupedPredictions {
        let mut z = Vec::new();
        let mut d = Vec::new();
        for (zi, ds) in rates {
            for v in *ds {
                z.push(*zi);
                d.push(*v);
            }
        }
        GroupedPredictions::from_rows(&z, &d, None, GroupOrder::Ascending).unwrap()
    }

    #[test]
    fn parity_examples() {
        let p = grouped(&[(0.0, &[1.0, 0.0]), (1.0, &[0.0, 1.0])]);
        assert_eq!(max_one_sided_parity(&p).unwrap(), 0.0);
        // rates 0.6, 0.4, 0.5
        let p = grouped(&[
            (0.0, &[1., 1., 1., 0., 0.]),
            (1.0, &[1., 1., 0., 0., 0.]),
            (2.0, &[1., 0.]),
        ]);
        assert!((max_one_sided_parity(&p).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn descending_order_flips_pairs() {
        let z = [0.0, 0.0, 1.0, 1.0];
        let d = [1.0, 1.0, 0.0, 1.0];
        let asc = GroupedPredictions::from_rows(&z, &d, None, GroupOrder::Ascending).unwrap();
        let desc = GroupedPredictions::from_rows(&z, &d, None, GroupOrder::Descending).unwrap();
        assert_eq!(max_one_sided_parity(&asc).unwrap(), 0.5);
        assert_eq!(max_one_sided_parity(&desc).unwrap(), 0.0);
    }

    #[test]
    fn equal_opportunity_examples() {
        let z = [0.0, 0.0, 1.0, 1.0, 1.0];
        let y = [1, 0, 1, 1, 0];
        // classifier equals the label
        let d: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let p = GroupedPredictions::from_rows(&z, &d, Some(&y), GroupOrder::Ascending).unwrap();
        assert_eq!(max_one_sided_equal_opportunity(&p).unwrap(), 0.0);
        // TPRs 1.0 and 0.5
        let d = [1.0, 0.0, 1.0, 0.0, 0.0];
        let p = GroupedPredictions::from_rows(&z, &d, Some(&y), GroupOrder::Ascending).unwrap();
        assert_eq!(max_one_sided_equal_opportunity(&p).unwrap(), 0.5);
    }

    #[test]
    fn equal_opportunity_names_group_without_positives() {
        let z = [0.0, 0.0, 1.0];
        let y = [1, 0, 0];
        let p = GroupedPredictions::from_rows(&z, &[1.0, 0.0, 1.0], Some(&y), GroupOrder::Ascending).unwrap();
        match one_sided_equal_opportunity(&p) {
            Err(Error::Metric(m)) => assert!(m.contains("z=1")),
            other => panic!("{other:?}"),
        }
        let p = GroupedPredictions::from_rows(&z, &[1.0, 0.0, 1.0], None, GroupOrder::Ascending).unwrap();
        assert!(one_sided_equal_opportunity(&p).is_err());
    }

    #[test]
    fn single_group_is_an_error() {
        let p = grouped(&[(0.0, &[1.0])]);
        assert!(max_one_sided_parity(&p).is_err());
    }

    fn table(scores: Vec<Vec<f64>>, z: Vec<f64>) -> ScoreTable {
        let labels = (0..scores.len()).map(|i| format!("x{i}")).collect();
        ScoreTable::new(labels, z, scores).unwrap()
    }

    #[test]
    fn rf_examples() {
        let cond = vec![vec![0.3, 0.6, 0.1], vec![0.7, 0.4, 0.9]];
        let t = table(vec![vec![2.0; 3], vec![2.0; 3]], vec![0.0, 1.0, 2.0]);
        assert_eq!(average_violation_rf(&t, &cond).unwrap(), 0.0);
        // f(x, z) = z
        let t = table(vec![vec![1.0, 2.0, 5.0], vec![1.0, 2.0, 5.0]], vec![1.0, 2.0, 5.0]);
        let rf = average_violation_rf(&t, &cond).unwrap();
        assert!((rf - (1.0 - 5.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rf_rejects_bad_conditional() {
        let t = table(vec![vec![1.0, 2.0]], vec![0.0, 1.0]);
        assert!(average_violation_rf(&t, &[vec![0.5, 1.0]]).is_err());
        assert!(average_violation_rf(&t, &[vec![1.0]]).is_err());
    }

    #[test]
    fn grid_audit_example() {
        let t = table(vec![vec![0.0, 2.0, 1.0]], vec![0.0, 1.0, 2.0]);
        let v = audit_grid(&t, &[1.0], Direction::Increasing).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].z, 1.0);
        assert_eq!(v[0].magnitude, 1.0);
        let v = audit_grid(&t, &[1.0], Direction::Decreasing).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].z, 0.0);
        assert_eq!(v[0].magnitude, 2.0);
        assert!(audit_grid(&t, &[0.0], Direction::Increasing).is_err());
    }

    #[test]
    fn csv_rows_cover_every_pair() {
        let p = grouped(&[(0.0, &[1.0]), (1.0, &[0.0]), (2.0, &[1.0])]);
        let r = FairnessReport::from_predictions("full", GroupOrder::Ascending, &p).unwrap();
        let mut buf = Vec::new();
        r.write_csv_rows(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("full,0<1,parity,1\n"));
        assert!(text.contains("full,max,parity,1\n"));
        assert_eq!(text.lines().filter(|l| l.contains(",parity,")).count(), 4);
    }
}
