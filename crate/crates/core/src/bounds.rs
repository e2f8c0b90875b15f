//! Exact checks of how `z`-monotone scores and classifiers bound one-sided
//! statistical parity and equal opportunity, on finite discrete distributions.
//!
//! Everything here is computed by summation over the finite supports. A
//! report with `satisfied == false` on a case that meets the preconditions
//! is a defect, not a data property.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gam::json_error;
use crate::isotonic::ScoreTable;

/// Relative slack used when comparing an observed value with its bound.
pub const BOUND_TOLERANCE: f64 = 1e-12;

pub const CASE_FORMAT_VERSION: &str = "shapefair-case/1";

/// A finite joint distribution over `(X, Z)` with a score table and
/// optional classifier / label models.
///
/// All matrices are indexed `[x][z]`. `decision[x][z] = P(Yhat = 1 | x, z)`
/// and `label[x][z] = P(Y = 1 | x, z)`; `Y` and `Yhat` are taken to be
/// conditionally independent given `(x, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCase {
    pub x_labels: Vec<String>,
    pub z_support: Vec<f64>,
    pub conditional: Vec<Vec<f64>>,
    pub score: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CaseFile {
    version: String,
    #[serde(flatten)]
    case: DiscreteCase,
}

fn check_matrix(name: &str, m: &[Vec<f64>], nx: usize, nz: usize, unit: bool) -> Result<()> {
    if m.len() != nx || m.iter().any(|r| r.len() != nz) {
        return Err(Error::Input(format!("`{name}` must be {nx} x {nz}")));
    }
    for v in m.iter().flatten() {
        if !v.is_finite() || *v < 0.0 || (unit && *v > 1.0) {
            return Err(Error::Input(format!("`{name}` holds out-of-range value {v}")));
        }
    }
    Ok(())
}

impl DiscreteCase {
    pub fn validate(&self) -> Result<()> {
        let (nx, nz) = (self.x_labels.len(), self.z_support.len());
        if nx == 0 || nz == 0 {
            return Err(Error::Input("case needs non-empty X and Z supports".into()));
        }
        if self.z_support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Input("z support must be strictly ascending".into()));
        }
        check_matrix("conditional", &self.conditional, nx, nz, true)?;
        check_matrix("score", &self.score, nx, nz, false)?;
        for z in 0..nz {
            let total: f64 = self.conditional.iter().map(|r| r[z]).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Input(format!(
                    "P(X | Z = {}) sums to {total}",
                    self.z_support[z]
                )));
            }
        }
        if let Some(d) = &self.decision {
            check_matrix("decision", d, nx, nz, true)?;
        }
        if let Some(l) = &self.label {
            check_matrix("label", l, nx, nz, true)?;
        }
        if let Some(p) = &self.priors {
            if p.len() != nz || p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Input("priors must be a probability vector over Z".into()));
            }
            if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Input("priors must sum to 1".into()));
            }
        }
        Ok(())
    }

    pub fn score_table(&self) -> ScoreTable {
        ScoreTable {
            x_labels: self.x_labels.clone(),
            z_support: self.z_support.clone(),
            scores: self.score.clone(),
        }
    }

    /// Same distribution with a different score table.
    pub fn with_scores(&self, table: &ScoreTable) -> Result<Self> {
        let mut out = self.clone();
        out.score = table.scores.clone();
        out.validate()?;
        Ok(out)
    }

    /// `E[f(X, Z) | Z = z_idx]`
    pub fn expectation(&self, z_idx: usize) -> f64 {
        self.score
            .iter()
            .zip(&self.conditional)
            .map(|(f, p)| f[z_idx] * p[z_idx])
            .sum()
    }

    pub fn expectations(&self) -> Vec<f64> {
        (0..self.z_support.len()).map(|z| self.expectation(z)).collect()
    }

    pub fn to_json(&self) -> String {
        let file = CaseFile {
            version: CASE_FORMAT_VERSION.to_string(),
            case: self.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("case serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CaseFile = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
        if file.version != CASE_FORMAT_VERSION {
            return Err(Error::Version {
                found: file.version,
                expected: CASE_FORMAT_VERSION.to_string(),
            });
        }
        file.case.validate()?;
        Ok(file.case)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn pair(&self, j: usize, k: usize) -> Result<()> {
        let nz = self.z_support.len();
        if j >= nz || k >= nz {
            return Err(Error::Argument(format!("group index out of range (|Z| = {nz})")));
        }
        if j > k {
            return Err(Error::Argument(format!("need j <= k, got j={j}, k={k}")));
        }
        Ok(())
    }

    fn decisions(&self) -> Result<&Vec<Vec<f64>>> {
        self.decision
            .as_ref()
            .ok_or_else(|| Error::Precondition("case has no decision table".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `E[f | Z=j] <= C E[f | Z=k]`
    DensityRatio,
    /// `P(Yhat=1 | Z=j) / P(Yhat=1 | Z=k)` bounded by a likelihood-ratio infimum.
    ParityRatio,
    /// True-positive-rate ratio bounded by `inf c_j(x) / c_k(x)`.
    OpportunityRatio,
}

/// The two likelihood ratios whose product forms the parity-ratio bound,
/// evaluated at the witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioFactors {
    /// `p(x | Z=j) / p(x | Z=k)`
    pub group_ratio: f64,
    /// `p(x | Yhat=1, Z=k) / p(x | Yhat=1, Z=j)`
    pub accepted_inverse_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub j: f64,
    pub k: f64,
    pub bound_value: f64,
    pub observed_value: f64,
    pub satisfied: bool,
    /// The `x` attaining the supremum (density ratio) or infimum (the others).
    pub witness: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<RatioFactors>,
    /// Opportunity bound with `p(x | Y=1, Z)` in the denominator of `c_z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proof_variant_bound: Option<f64>,
    /// `E[f | Z=j] - E[f | Z=k]` for density-ratio reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity_gap: Option<f64>,
}

pub fn within_bound(observed: f64, bound: f64) -> bool {
    observed <= bound + BOUND_TOLERANCE * bound.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRatio {
    pub c: f64,
    pub witness: usize,
}

/// `C = max_x P(x | Z=j) / P(x | Z=k)` over the support of `P(. | Z=k)`.
pub fn density_ratio_c(case: &DiscreteCase, j: usize, k: usize) -> Result<DensityRatio> {
    let nz = case.z_support.len();
    if j >= nz || k >= nz {
        return Err(Error::Argument(format!("group index out of range (|Z| = {nz})")));
    }
    let mut best: Option<DensityRatio> = None;
    for (x, p) in case.conditional.iter().enumerate() {
        if p[k] == 0.0 {
            if p[j] > 0.0 {
                return Err(Error::AbsoluteContinuity {
                    witness: case.x_labels[x].clone(),
                });
            }
            continue;
        }
        let r = p[j] / p[k];
        if best.as_ref().is_none_or(|b| r > b.c) {
            best = Some(DensityRatio { c: r, witness: x });
        }
    }
    best.ok_or_else(|| Error::Input("P(X | Z=k) has no support".into()))
}

/// Checks `E[f | Z=j] <= C E[f | Z=k]` with `C` from [`density_ratio_c`].
pub fn density_ratio_bound(case: &DiscreteCase, j: usize, k: usize) -> Result<BoundReport> {
    let ratio = density_ratio_c(case, j, k)?;
    density_ratio_report(case, j, k, ratio.c, Some(ratio.witness))
}

/// The density-ratio check with an explicit constant `c` (preconditions still apply).
pub fn density_ratio_report(
    case: &DiscreteCase,
    j: usize,
    k: usize,
    c: f64,
    witness: Option<usize>,
) -> Result<BoundReport> {
    case.pair(j, k)?;
    for (x, f) in case.score.iter().enumerate() {
        if f[j] < 0.0 || f[k] < 0.0 {
            return Err(Error::Precondition(format!(
                "score is negative at x = {}",
                case.x_labels[x]
            )));
        }
        if f[j] > f[k] {
            return Err(Error::Precondition(format!(
                "score not monotone in z at x = {}: f(x, {}) = {} > f(x, {}) = {}",
                case.x_labels[x], case.z_support[j], f[j], case.z_support[k], f[k]
            )));
        }
    }
    let (ej, ek) = (case.expectation(j), case.expectation(k));
    let bound = c * ek;
    Ok(BoundReport {
        kind: BoundKind::DensityRatio,
        j: case.z_support[j],
        k: case.z_support[k],
        bound_value: bound,
        observed_value: ej,
        satisfied: within_bound(ej, bound),
        witness: witness.map(|x| case.x_labels[x].clone()),
        factors: None,
        proof_variant_bound: None,
        parity_gap: Some(ej - ek),
    })
}

/// Per-group quantities of a classifier, derived by Bayes' rule.
struct GroupStats {
    /// `p(x | z)`
    px: Vec<f64>,
    /// `p(x, Yhat=1 | z)`
    accepted: Vec<f64>,
    /// `P(Yhat=1 | z)`
    accept_rate: f64,
}

impl GroupStats {
    fn new(case: &DiscreteCase, d: &[Vec<f64>], z: usize) -> Self {
        let px: Vec<f64> = case.conditional.iter().map(|r| r[z]).collect();
        let accepted: Vec<f64> = px.iter().zip(d).map(|(p, dr)| p * dr[z]).collect();
        let accept_rate = accepted.iter().sum();
        GroupStats {
            px,
            accepted,
            accept_rate,
        }
    }

    /// `p(x | Yhat=1, z)`
    fn accepted_density(&self, x: usize) -> f64 {
        self.accepted[x] / self.accept_rate
    }
}

fn check_decision_monotone(case: &DiscreteCase, d: &[Vec<f64>], j: usize, k: usize, s: &[usize]) -> Result<()> {
    for &x in s {
        if d[x][j] > d[x][k] {
            return Err(Error::Precondition(format!(
                "decision not monotone in z at x = {}: {} > {}",
                case.x_labels[x], d[x][j], d[x][k]
            )));
        }
    }
    Ok(())
}

/// Bounds `P(Yhat=1 | Z=j) / P(Yhat=1 | Z=k)` by
/// `inf_x [p(x|j) p(x|Yhat=1,k)] / [p(x|k) p(x|Yhat=1,j)]` over the set of
/// `x` accepted with positive probability in both groups. Monotonicity of
/// the decision is required on that set.
pub fn parity_ratio_bound(case: &DiscreteCase, j: usize, k: usize) -> Result<BoundReport> {
    case.pair(j, k)?;
    let d = case.decisions()?;
    let (gj, gk) = (GroupStats::new(case, d, j), GroupStats::new(case, d, k));
    let s: Vec<usize> = (0..case.x_labels.len())
        .filter(|&x| gj.accepted[x] > 0.0 && gk.accepted[x] > 0.0)
        .collect();
    if s.is_empty() {
        return Err(Error::Precondition(
            "no x is accepted with positive probability in both groups".into(),
        ));
    }
    check_decision_monotone(case, d, j, k, &s)?;
    let mut best: Option<(f64, usize, RatioFactors)> = None;
    for &x in &s {
        let factors = RatioFactors {
            group_ratio: gj.px[x] / gk.px[x],
            accepted_inverse_ratio: gk.accepted_density(x) / gj.accepted_density(x),
        };
        let v = factors.group_ratio * factors.accepted_inverse_ratio;
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, x, factors));
        }
    }
    let (bound, x, factors) = best.unwrap();
    let observed = gj.accept_rate / gk.accept_rate;
    Ok(BoundReport {
        kind: BoundKind::ParityRatio,
        j: case.z_support[j],
        k: case.z_support[k],
        bound_value: bound,
        observed_value: observed,
        satisfied: within_bound(observed, bound),
        witness: Some(case.x_labels[x].clone()),
        factors: Some(factors),
        proof_variant_bound: None,
        parity_gap: None,
    })
}

/// Bounds the true-positive-rate ratio `P(Yhat=1 | Y=1, j) / P(Yhat=1 | Y=1, k)`
/// by `inf_x c_j(x) / c_k(x)` with
/// `c_z(x) = p(x|z) P(Y=1|Yhat=1,z) / (p(x|Yhat=1,z) P(Y=1|z))`.
///
/// The variant with `p(x | Y=1, z)` in the denominator is reported as
/// `proof_variant_bound`; it does not decide `satisfied`.
pub fn opportunity_ratio_bound(case: &DiscreteCase, j: usize, k: usize) -> Result<BoundReport> {
    case.pair(j, k)?;
    let d = case.decisions()?;
    let l = case
        .label
        .as_ref()
        .ok_or_else(|| Error::Precondition("case has no label table".into()))?;
    struct Opp {
        stats: GroupStats,
        /// `p(x, Y=1, Yhat=1 | z)`
        both: Vec<f64>,
        /// `P(Y=1 | z)`
        pos_rate: f64,
        /// `P(Y=1 | Yhat=1, z)`
        precision: f64,
        tpr: f64,
    }
    let group = |z: usize| -> Result<Opp> {
        let stats = GroupStats::new(case, d, z);
        let pos_rate: f64 = stats.px.iter().zip(l).map(|(p, lr)| p * lr[z]).sum();
        if pos_rate == 0.0 {
            return Err(Error::Precondition(format!(
                "group z = {} has no positive labels",
                case.z_support[z]
            )));
        }
        let both: Vec<f64> = stats.accepted.iter().zip(l).map(|(a, lr)| a * lr[z]).collect();
        let joint: f64 = both.iter().sum();
        let precision = if stats.accept_rate > 0.0 {
            joint / stats.accept_rate
        } else {
            0.0
        };
        Ok(Opp {
            tpr: joint / pos_rate,
            stats,
            both,
            pos_rate,
            precision,
        })
    };
    let (gj, gk) = (group(j)?, group(k)?);
    let s: Vec<usize> = (0..case.x_labels.len())
        .filter(|&x| gj.both[x] > 0.0 && gk.both[x] > 0.0)
        .collect();
    if s.is_empty() {
        return Err(Error::Precondition(
            "no x has p(x, Y=1, Yhat=1 | z) > 0 in both groups".into(),
        ));
    }
    check_decision_monotone(case, d, j, k, &s)?;
    let c = |g: &Opp, x: usize| g.stats.px[x] * g.precision / (g.stats.accepted_density(x) * g.pos_rate);
    let c_variant = |g: &Opp, z: usize, x: usize| {
        let px_given_pos = g.stats.px[x] * l[x][z] / g.pos_rate;
        g.stats.px[x] * g.precision / (px_given_pos * g.pos_rate)
    };
    let mut best: Option<(f64, usize)> = None;
    let mut variant = f64::INFINITY;
    for &x in &s {
        let v = c(&gj, x) / c(&gk, x);
        if best.is_none_or(|b| v < b.0) {
            best = Some((v, x));
        }
        variant = variant.min(c_variant(&gj, j, x) / c_variant(&gk, k, x));
    }
    let (bound, x) = best.unwrap();
    let observed = gj.tpr / gk.tpr;
    let differs = (variant - bound).abs() > BOUND_TOLERANCE * bound.abs().max(1.0);
    Ok(BoundReport {
        kind: BoundKind::OpportunityRatio,
        j: case.z_support[j],
        k: case.z_support[k],
        bound_value: bound,
        observed_value: observed,
        satisfied: within_bound(observed, bound),
        witness: Some(case.x_labels[x].clone()),
        factors: None,
        proof_variant_bound: differs.then_some(variant),
        parity_gap: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomCaseConfig {
    pub max_x: usize,
    pub max_z: usize,
    /// Symmetric Dirichlet concentration for `P(X | Z)` and the priors.
    pub alpha: f64,
    /// Sort each score / decision row so it is non-decreasing in `z`.
    pub monotone: bool,
}

impl Default for RandomCaseConfig {
    fn default() -> Self {
        RandomCaseConfig {
            max_x: 8,
            max_z: 4,
            alpha: 1.0,
            monotone: true,
        }
    }
}

fn dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    loop {
        let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && draws.iter().all(|v| *v > 0.0) {
            return draws.into_iter().map(|v| v / total).collect();
        }
    }
}

/// Random case with 2..=max_x cells, 2..=max_z groups, Dirichlet
/// conditionals, scores in [0, 3), decisions and labels in (0, 1).
pub fn random_case<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomCaseConfig) -> DiscreteCase {
    let nx = rng.random_range(2..=cfg.max_x.max(2));
    let nz = rng.random_range(2..=cfg.max_z.max(2));
    let columns: Vec<Vec<f64>> = (0..nz).map(|_| dirichlet(rng, nx, cfg.alpha)).collect();
    let conditional = (0..nx).map(|x| columns.iter().map(|c| c[x]).collect()).collect();
    let mut row = |scale: f64, lo: f64, sort: bool| -> Vec<f64> {
        let mut r: Vec<f64> = (0..nz).map(|_| lo + (scale - lo) * rng.random::<f64>()).collect();
        if sort {
            r.sort_by(f64::total_cmp);
        }
        r
    };
    let score: Vec<Vec<f64>> = (0..nx).map(|_| row(3.0, 0.0, cfg.monotone)).collect();
    let decision: Vec<Vec<f64>> = (0..nx).map(|_| row(1.0, 1e-3, cfg.monotone)).collect();
    let label: Vec<Vec<f64>> = (0..nx).map(|_| row(1.0, 1e-3, false)).collect();
    let priors = dirichlet(rng, nz, cfg.alpha);
    DiscreteCase {
        x_labels: (0..nx).map(|x| format!("x{x}")).collect(),
        z_support: (0..nz).map(|z| z as f64).collect(),
        conditional,
        score,
        decision: Some(decision),
        label: Some(label),
        priors: Some(priors),
    }
}

/// Additive smoothing applied to bin counts by default.
pub const DEFAULT_SMOOTHING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRatio {
    pub cell: Vec<usize>,
    pub count_j: usize,
    pub count_k: usize,
    pub ratio: f64,
}

/// Histogram estimate of the density ratio between two protected groups.
/// An estimate, not a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRatio {
    pub c: f64,
    pub epsilon: f64,
    /// Some cell has zero smoothed mass in group `k` but not in `j`.
    pub infinite: bool,
    /// Some cell is observed in group `j` but never in group `k`.
    pub absolute_continuity_warning: bool,
    pub cells: Vec<CellRatio>,
}

/// Bins every non-protected column into `feature_bins` equal-width bins,
/// counts cells per group `z = j` and `z = k`, and takes the maximum ratio of
/// the smoothed cell frequencies.
pub fn estimate_c_empirical(
    dataset: &Dataset,
    feature_bins: usize,
    j: f64,
    k: f64,
    epsilon: f64,
) -> Result<EmpiricalRatio> {
    if feature_bins == 0 {
        return Err(Error::Argument("need at least one bin".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Argument("smoothing must be non-negative".into()));
    }
    let protected = dataset
        .protected()
        .ok_or_else(|| Error::Schema("dataset has no protected column".into()))?;
    let zcol = dataset.column(protected.column);
    let features: Vec<usize> = (0..dataset.n_columns()).filter(|&c| c != protected.column).collect();
    let ranges: Vec<(f64, f64)> = features
        .iter()
        .map(|&c| {
            let col = dataset.column(c);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    let bin = |v: f64, (lo, hi): (f64, f64)| -> usize {
        if hi <= lo {
            return 0;
        }
        (((v - lo) / (hi - lo) * feature_bins as f64) as usize).min(feature_bins - 1)
    };
    let mut counts: BTreeMap<Vec<usize>, (usize, usize)> = BTreeMap::new();
    let (mut nj, mut nk) = (0usize, 0usize);
    for (i, &z) in zcol.iter().enumerate() {
        let (is_j, is_k) = (z == j, z == k);
        if !is_j && !is_k {
            continue;
        }
        let cell: Vec<usize> = features
            .iter()
            .zip(&ranges)
            .map(|(&c, &r)| bin(dataset.column(c)[i], r))
            .collect();
        let e = counts.entry(cell).or_default();
        if is_j {
            e.0 += 1;
            nj += 1;
        }
        if is_k {
            e.1 += 1;
            nk += 1;
        }
    }
    if nj == 0 || nk == 0 {
        return Err(Error::Metric(format!(
            "empty group: {nj} rows with z = {j}, {nk} rows with z = {k}"
        )));
    }
    let m = counts.len() as f64;
    let (dj, dk) = (nj as f64 + epsilon * m, nk as f64 + epsilon * m);
    let mut cells = Vec::with_capacity(counts.len());
    let mut c = 0.0_f64;
    let mut infinite = false;
    let mut warning = false;
    for (cell, (cj, ck)) in counts {
        let pj = (cj as f64 + epsilon) / dj;
        let pk = (ck as f64 + epsilon) / dk;
        if ck == 0 && cj > 0 {
            warning = true;
        }
        let ratio = if pk > 0.0 {
            pj / pk
        } else if pj > 0.0 {
            infinite = true;
            f64::INFINITY
        } else {
            0.0
        };
        c = c.max(ratio);
        cells.push(CellRatio {
            cell,
            count_j: cj,
            count_k: ck,
            ratio,
        });
    }
    Ok(EmpiricalRatio {
        c,
        epsilon,
        infinite,
        absolute_continuity_warning: warning,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cell(pj: f64, pk: f64) -> DiscreteCase {
        DiscreteCase {
            x_labels: vec!["a".into(), "b".into()],
            z_support: vec![0.0, 1.0],
            conditional: vec![vec![pj, pk], vec![1.0 - pj, 1.0 - pk]],
            score: vec![vec![1.0, 2.0], vec![0.5, 0.5]],
            decision: Some(vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
            label: Some(vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
            priors: None,
        }
    }

    #[test]
    fn density_ratio_examples() {
        let c = density_ratio_c(&two_cell(0.3, 0.3), 0, 1).unwrap();
        assert!((c.c - 1.0).abs() < 1e-15);
        let c = density_ratio_c(&two_cell(0.9, 0.1), 0, 1).unwrap();
        assert!((c.c - 9.0).abs() < 1e-12);
        assert_eq!(c.witness, 0);
        assert!(matches!(
            density_ratio_c(&two_cell(0.5, 0.0), 0, 1),
            Err(Error::AbsoluteContinuity { witness }) if witness == "b" || witness == "a"
        ));
    }

    #[test]
    fn identical_conditionals_give_dominance() {
        let r = density_ratio_bound(&two_cell(0.4, 0.4), 0, 1).unwrap();
        assert!(r.satisfied);
        assert!(r.parity_gap.unwrap() <= 0.0);
    }

    #[test]
    fn non_monotone_score_is_a_precondition_error() {
        let mut case = two_cell(0.4, 0.4);
        case.score[0] = vec![3.0, 1.0];
        assert!(matches!(density_ratio_bound(&case, 0, 1), Err(Error::Precondition(_))));
        assert!(matches!(density_ratio_bound(&case, 1, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn constant_classifier_has_unit_bounds() {
        let case = two_cell(0.3, 0.6);
        let r = parity_ratio_bound(&case, 0, 1).unwrap();
        assert!((r.observed_value - 1.0).abs() < 1e-15);
        assert!((r.bound_value - 1.0).abs() < 1e-12);
        assert!(r.satisfied);
        let r = opportunity_ratio_bound(&case, 0, 1).unwrap();
        assert!((r.observed_value - 1.0).abs() < 1e-15);
        assert!((r.bound_value - 1.0).abs() < 1e-12);
        assert!(r.satisfied);
    }

    #[test]
    fn group_without_positives_is_rejected() {
        let mut case = two_cell(0.3, 0.6);
        case.label = Some(vec![vec![0.0, 0.5], vec![0.0, 0.5]]);
        assert!(matches!(opportunity_ratio_bound(&case, 0, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn empty_acceptance_set_is_rejected() {
        let mut case = two_cell(0.3, 0.6);
        case.decision = Some(vec![vec![0.0, 0.5], vec![0.0, 0.5]]);
        assert!(matches!(parity_ratio_bound(&case, 0, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn case_json_round_trip() {
        let case = two_cell(0.25, 0.75);
        let back = DiscreteCase::from_json(&case.to_json()).unwrap();
        assert_eq!(back, case);
        let bad = case.to_json().replace(CASE_FORMAT_VERSION, "shapefair-case/0");
        assert!(matches!(DiscreteCase::from_json(&bad), Err(Error::Version { .. })));
    }

    #[test]
    fn validation_catches_bad_columns() {
        let mut case = two_cell(0.25, 0.75);
        case.conditional[0][0] = 0.5;
        assert!(case.validate().is_err());
    }
}
