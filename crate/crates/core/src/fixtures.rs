//! Small discrete counterexamples relating `z`-monotonicity and one-sided
//! statistical parity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::{density_ratio_c, DiscreteCase};
use crate::error::{Error, Result};
use crate::isotonic::{project_table, Direction};
use crate::metrics::{audit_grid, average_violation_rf, table_one_sided_parity};

pub const FIXTURE_NAMES: [&str; 3] = ["simpson", "parity-converse", "projection"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub description: String,
    pub case: DiscreteCase,
    /// Monotone projection of `case.score`, for the projection fixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projected: Option<DiscreteCase>,
    pub expected: BTreeMap<String, f64>,
}

impl Fixture {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fixture serializes");
        s.push('\n');
        s
    }
}

pub fn by_name(name: &str) -> Result<Fixture> {
    match name {
        "simpson" => Ok(simpson()),
        "parity-converse" => Ok(parity_converse()),
        "projection" => Ok(projection()),
        other => Err(Error::Argument(format!(
            "unknown fixture `{other}` (expected one of {FIXTURE_NAMES:?})"
        ))),
    }
}

pub fn all() -> Vec<Fixture> {
    FIXTURE_NAMES.iter().map(|n| by_name(n).unwrap()).collect()
}

/// Shared `P(X = x | Z = z)` for the simpson and projection fixtures,
/// X in {0, 1}, Z in {0, 1, 2, 3}.
fn poverty_conditional() -> Vec<Vec<f64>> {
    vec![vec![0.2, 0.9, 0.1, 0.5], vec![0.8, 0.1, 0.9, 0.5]]
}

fn monotone_admissions() -> Vec<Vec<f64>> {
    vec![vec![1.5, 1.5, 1.5, 2.0], vec![0.0, 0.0, 0.0, 0.5]]
}

fn binary_x() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

/// A score monotone in `z` whose one-sided parity gap between `z = 1` and
/// `z = 2` is 1.2: `1.5 * 0.9 - 1.5 * 0.1`.
pub fn simpson() -> Fixture {
    let case = DiscreteCase {
        x_labels: binary_x(),
        z_support: vec![0.0, 1.0, 2.0, 3.0],
        conditional: poverty_conditional(),
        score: monotone_admissions(),
        decision: None,
        label: None,
        priors: None,
    };
    Fixture {
        name: "simpson".into(),
        description: "monotone score with a one-sided parity violation of 1.2 between z=1 and z=2".into(),
        case,
        projected: None,
        expected: BTreeMap::from([
            ("max_parity_violation".into(), 1.2),
            ("violation_j".into(), 1.0),
            ("violation_k".into(), 2.0),
            ("density_ratio_c".into(), 9.0),
        ]),
    }
}

/// Two groups with identical height distributions (`C = 1`). The decision
/// accepts group 0 below the median height and group 1 above it, so
/// acceptance rates match exactly while every height flips 0 <-> 1.
pub fn parity_converse() -> Fixture {
    let heights = ["150-160", "160-170", "170-180", "180-190"];
    let accept_z0 = [1.0, 1.0, 0.0, 0.0];
    let table: Vec<Vec<f64>> = accept_z0.iter().map(|&a| vec![a, 1.0 - a]).collect();
    let case = DiscreteCase {
        x_labels: heights.iter().map(|s| s.to_string()).collect(),
        z_support: vec![0.0, 1.0],
        conditional: vec![vec![0.25, 0.25]; 4],
        score: table.clone(),
        decision: Some(table),
        label: None,
        priors: Some(vec![0.5, 0.5]),
    };
    Fixture {
        name: "parity-converse".into(),
        description: "exact statistical parity with monotonicity violations of 1 in both directions".into(),
        case,
        projected: None,
        expected: BTreeMap::from([
            ("parity_gap".into(), 0.0),
            ("density_ratio_c".into(), 1.0),
            ("increasing_violation".into(), 1.0),
            ("decreasing_violation".into(), 1.0),
        ]),
    }
}

/// A non-monotone score whose projection is the simpson score. The worst
/// pairwise violation rises from 0.85 to 1.2 while the average violation
/// falls from -0.1625 to -0.2375.
pub fn projection() -> Fixture {
    let base = DiscreteCase {
        x_labels: binary_x(),
        z_support: vec![0.0, 1.0, 2.0, 3.0],
        conditional: poverty_conditional(),
        score: vec![vec![3.0, 1.0, 0.5, 2.0], vec![0.0, 0.0, 0.0, 0.5]],
        decision: None,
        label: None,
        priors: None,
    };
    let mut projected = base.clone();
    projected.score = monotone_admissions();
    Fixture {
        name: "projection".into(),
        description: "monotone projection that raises the worst pairwise parity violation".into(),
        case: base,
        projected: Some(projected),
        expected: BTreeMap::from([
            ("max_parity_violation".into(), 0.85),
            ("projected_max_parity_violation".into(), 1.2),
            ("average_violation".into(), -0.1625),
            ("projected_average_violation".into(), -0.2375),
        ]),
    }
}

/// Recomputes every quantity a fixture can declare in `expected`.
///
/// The compared pair is the worst parity pair when it violates, otherwise the
/// first and last groups. Monotonicity violations are audited along `z` with
/// every adjacent gap.
pub fn measure(f: &Fixture) -> Result<BTreeMap<String, f64>> {
    let case = &f.case;
    case.validate()?;
    let table = case.score_table();
    let z = &case.z_support;
    let parity = table_one_sided_parity(&table, &case.conditional)?;
    let mut out = BTreeMap::new();
    out.insert("max_parity_violation".to_string(), parity.max);
    out.insert(
        "average_violation".to_string(),
        average_violation_rf(&table, &case.conditional)?,
    );
    let (j, k) = match parity.pairs.iter().find(|p| p.value == parity.max && p.value > 0.0) {
        Some(p) => {
            out.insert("violation_j".to_string(), p.j);
            out.insert("violation_k".to_string(), p.k);
            let idx = |v: f64| z.iter().position(|&t| t == v).expect("pair lies on the support");
            (idx(p.j), idx(p.k))
        }
        None => (0, z.len() - 1),
    };
    let e = case.expectations();
    out.insert("parity_gap".to_string(), e[j] - e[k]);
    out.insert("density_ratio_c".to_string(), density_ratio_c(case, j, k)?.c);

    let mut deltas: Vec<f64> = z.windows(2).map(|w| w[1] - w[0]).collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    for (key, dir) in [
        ("increasing_violation", Direction::Increasing),
        ("decreasing_violation", Direction::Decreasing),
    ] {
        let worst = audit_grid(&table, &deltas, dir)?
            .iter()
            .map(|v| v.magnitude)
            .fold(0.0, f64::max);
        out.insert(key.to_string(), worst);
    }

    if let Some(p) = &f.projected {
        if project_table(&table, Direction::Increasing) != p.score_table() {
            return Err(Error::Theorem(format!(
                "fixture `{}`: stored projection differs from the computed one",
                f.name
            )));
        }
        let pt = p.score_table();
        out.insert(
            "projected_max_parity_violation".to_string(),
            table_one_sided_parity(&pt, &p.conditional)?.max,
        );
        out.insert(
            "projected_average_violation".to_string(),
            average_violation_rf(&pt, &p.conditional)?,
        );
    }
    Ok(out)
}

/// Keys of `expected` whose measured value is off by more than `tol`.
pub fn mismatches(f: &Fixture, measured: &BTreeMap<String, f64>, tol: f64) -> Vec<String> {
    f.expected
        .iter()
        .filter(|(key, want)| measured.get(*key).is_none_or(|got| (got - *want).abs() > tol))
        .map(|(key, want)| format!("{key}: expected {want}, measured {:?}", measured.get(key)))
        .collect()
}
