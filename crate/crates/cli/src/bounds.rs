use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{ArgGroup, Args};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use shapefair::bounds::{
    density_ratio_bound, estimate_c_empirical, opportunity_ratio_bound, parity_ratio_bound, random_case,
    BoundKind, BoundReport, DiscreteCase, EmpiricalRatio, RandomCaseConfig, DEFAULT_SMOOTHING,
};
use shapefair::data::{load_csv, LoadOptions};
use shapefair::fixtures::{self, Fixture, FIXTURE_NAMES};
use shapefair::metrics::{average_violation_rf, table_one_sided_parity, PairwiseViolations};
use shapefair::{Error, Schema};

use crate::output::{optional_input, InputFile, Output};
use crate::{CliError, OutArgs};

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["case", "fixture", "random", "data"])))]
pub struct BoundsArgs {
    /// Discrete case file (`shapefair-case/1` JSON).
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// Bundled fixture by name.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(FIXTURE_NAMES))]
    pub fixture: Option<String>,
    /// Check this many seeded random cases.
    #[arg(long)]
    pub random: Option<usize>,
    /// Dataset for an empirical density-ratio estimate.
    #[arg(long, requires = "schema")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Protected column; overrides the schema's.
    #[arg(long)]
    pub protected: Option<String>,
    /// Equal-width bins per non-protected column.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Additive smoothing on bin counts.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    pub epsilon: f64,
    /// Protected value of group j (empirical mode); all ordered pairs when omitted.
    #[arg(long, requires = "k")]
    pub j: Option<f64>,
    #[arg(long, requires = "j")]
    pub k: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub drop_missing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct BoundsRun {
    case: Option<InputFile>,
    fixture: Option<String>,
    random: Option<usize>,
    data: Option<InputFile>,
    schema: Option<InputFile>,
    protected: Option<String>,
    bins: usize,
    epsilon: f64,
    j: Option<f64>,
    k: Option<f64>,
    seed: u64,
    drop_missing: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Skip {
    kind: BoundKind,
    j: f64,
    k: f64,
    reason: String,
}

#[derive(Debug, Clone, Serialize)]
struct CaseOutcome {
    parity: PairwiseViolations,
    average_violation: f64,
    reports: Vec<BoundReport>,
    skipped: Vec<Skip>,
}

impl CaseOutcome {
    fn failures(&self) -> impl Iterator<Item = &BoundReport> {
        self.reports.iter().filter(|r| !r.satisfied)
    }
}

/// Runs every applicable bound on every ordered pair. Precondition and
/// absolute-continuity failures mean the bound does not apply; they are
/// recorded, not raised.
fn check_case(case: &DiscreteCase) -> Result<CaseOutcome, CliError> {
    case.validate()?;
    let table = case.score_table();
    let mut outcome = CaseOutcome {
        parity: table_one_sided_parity(&table, &case.conditional)?,
        average_violation: average_violation_rf(&table, &case.conditional)?,
        reports: Vec::new(),
        skipped: Vec::new(),
    };
    let m = case.z_support.len();
    for j in 0..m {
        for k in j + 1..m {
            let mut checks = vec![(BoundKind::DensityRatio, density_ratio_bound(case, j, k))];
            if case.decision.is_some() {
                checks.push((BoundKind::ParityRatio, parity_ratio_bound(case, j, k)));
                if case.label.is_some() {
                    checks.push((BoundKind::OpportunityRatio, opportunity_ratio_bound(case, j, k)));
                }
            }
            for (kind, r) in checks {
                match r {
                    Ok(rep) => outcome.reports.push(rep),
                    Err(e @ (Error::Precondition(_) | Error::AbsoluteContinuity { .. })) => {
                        outcome.skipped.push(Skip {
                            kind,
                            j: case.z_support[j],
                            k: case.z_support[k],
                            reason: e.to_string(),
                        })
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    Ok(outcome)
}

#[derive(Serialize)]
struct CaseFileReport<'a> {
    source: &'a str,
    #[serde(flatten)]
    outcome: &'a CaseOutcome,
}

#[derive(Serialize)]
struct FixtureReport<'a> {
    fixture: &'a str,
    description: &'a str,
    expected: &'a BTreeMap<String, f64>,
    measured: BTreeMap<String, f64>,
    mismatches: Vec<String>,
    #[serde(flatten)]
    outcome: &'a CaseOutcome,
}

#[derive(Serialize, Default)]
struct RandomSummary {
    cases: usize,
    checks: BTreeMap<String, usize>,
    skipped: usize,
    failures: Vec<BoundReport>,
}

#[derive(Serialize)]
struct EmpiricalPair {
    j: f64,
    k: f64,
    #[serde(flatten)]
    estimate: EmpiricalRatio,
}

#[derive(Serialize)]
struct EmpiricalReport {
    protected: String,
    bins: usize,
    epsilon: f64,
    note: &'static str,
    pairs: Vec<EmpiricalPair>,
}

fn kind_name(k: BoundKind) -> &'static str {
    match k {
        BoundKind::DensityRatio => "density_ratio",
        BoundKind::ParityRatio => "parity_ratio",
        BoundKind::OpportunityRatio => "opportunity_ratio",
    }
}

fn theorem_failure(n: usize) -> CliError {
    CliError::Theorem(format!("{n} bound check(s) failed; see bounds_report.json"))
}

pub fn run(args: BoundsArgs) -> Result<(), CliError> {
    let (case_path, case_file) = optional_input(args.case.as_deref())?;
    let (data_path, data_file) = optional_input(args.data.as_deref())?;
    let (schema_path, schema_file) = optional_input(args.schema.as_deref())?;
    let cfg = BoundsRun {
        case: case_file,
        fixture: args.fixture.clone(),
        random: args.random,
        data: data_file,
        schema: schema_file,
        protected: args.protected.clone(),
        bins: args.bins,
        epsilon: args.epsilon,
        j: args.j,
        k: args.k,
        seed: args.seed,
        drop_missing: args.drop_missing,
    };
    let out = Output::new(&args.out.out, "bounds", &cfg, args.seed)?;

    if let Some(path) = case_path {
        let case = DiscreteCase::read(&path)?;
        let outcome = check_case(&case)?;
        let source = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        out.write_json(
            "bounds_report.json",
            &CaseFileReport {
                source: &source,
                outcome: &outcome,
            },
        )?;
        return match outcome.failures().count() {
            0 => Ok(()),
            n => Err(theorem_failure(n)),
        };
    }
    if let Some(name) = &args.fixture {
        let f = fixtures::by_name(name)?;
        return report_fixture(&out, &f);
    }
    if let Some(n) = args.random {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let mut summary = RandomSummary {
            cases: n,
            ..RandomSummary::default()
        };
        for _ in 0..n {
            let case = random_case(&mut rng, &RandomCaseConfig::default());
            let outcome = check_case(&case)?;
            for r in &outcome.reports {
                *summary.checks.entry(kind_name(r.kind).to_string()).or_default() += 1;
            }
            summary.skipped += outcome.skipped.len();
            summary.failures.extend(outcome.failures().cloned());
        }
        out.write_json("bounds_report.json", &summary)?;
        eprintln!(
            "{} random cases: {} checks, {} failures",
            n,
            summary.checks.values().sum::<usize>(),
            summary.failures.len()
        );
        return match summary.failures.len() {
            0 => Ok(()),
            n => Err(theorem_failure(n)),
        };
    }
    let schema = Schema::read(schema_path.as_deref().expect("clap requires --schema"))?;
    let mut ds = load_csv(
        data_path.as_deref().expect("source group guarantees --data"),
        &schema,
        LoadOptions {
            drop_missing: args.drop_missing,
        },
    )?;
    let protected = args
        .protected
        .clone()
        .or(schema.protected.clone())
        .ok_or_else(|| Error::Schema("no protected column: set `protected` in the schema or pass --protected".into()))?;
    ds.set_protected(&protected)?;
    let groups = ds.protected().expect("just set").groups.clone();
    let pairs: Vec<(f64, f64)> = match (args.j, args.k) {
        (Some(j), Some(k)) => vec![(j, k)],
        _ => (0..groups.len())
            .flat_map(|a| (a + 1..groups.len()).map(move |b| (a, b)))
            .map(|(a, b)| (groups[a], groups[b]))
            .collect(),
    };
    let mut report = EmpiricalReport {
        protected,
        bins: args.bins,
        epsilon: args.epsilon,
        note: "histogram estimate of the density ratio; not a certificate",
        pairs: Vec::new(),
    };
    for (j, k) in pairs {
        let estimate = estimate_c_empirical(&ds, args.bins, j, k, args.epsilon)?;
        if estimate.absolute_continuity_warning {
            eprintln!("warning: some bin holds rows with z = {j} but none with z = {k}");
        }
        report.pairs.push(EmpiricalPair { j, k, estimate });
    }
    out.write_json("empirical_c.json", &report)?;
    Ok(())
}

fn report_fixture(out: &Output, f: &Fixture) -> Result<(), CliError> {
    let outcome = check_case(&f.case)?;
    let measured = fixtures::measure(f)?;
    let mismatches = fixtures::mismatches(f, &measured, 1e-12);
    out.write_json(
        "bounds_report.json",
        &FixtureReport {
            fixture: &f.name,
            description: &f.description,
            expected: &f.expected,
            measured,
            mismatches: mismatches.clone(),
            outcome: &outcome,
        },
    )?;
    let failed = outcome.failures().count();
    if failed > 0 {
        return Err(theorem_failure(failed));
    }
    if !mismatches.is_empty() {
        return Err(CliError::Theorem(format!(
            "fixture `{}` does not reproduce: {}",
            f.name,
            mismatches.join("; ")
        )));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct FixturesArgs {
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct Manifest {
    files: BTreeMap<String, String>,
}

/// Writes `<name>.json` (fixture) and `<name>.case.json` (case file usable
/// with `bounds --case`), plus a manifest carrying the provenance.
pub fn run_fixtures(args: FixturesArgs) -> Result<(), CliError> {
    let out = Output::new(&args.out.out, "fixtures", &FIXTURE_NAMES, 0)?;
    let mut files = BTreeMap::new();
    for f in fixtures::all() {
        for (name, text) in [
            (format!("{}.json", f.name), f.to_json()),
            (format!("{}.case.json", f.name), f.case.to_json()),
        ] {
            out.write_text(&name, &text)?;
            files.insert(name, crate::output::hex_sha256(text.as_bytes()));
        }
    }
    out.write_json("manifest.json", &Manifest { files })?;
    Ok(())
}
