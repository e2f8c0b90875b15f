mod common;

use rand::Rng;
use shapefair::data::split;
use shapefair::gam::{accuracy, initial_model, logistic_loss, loss_gradient, train};
use shapefair::metrics::{audit_monotonicity, default_deltas, default_probes};
use shapefair::{ColumnSpec, Dataset, Direction, GamModel, Monotonicity, TrainConfig};

fn quick(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rates: vec![1e-2, 1e-1, 1.0],
        seed,
        ..TrainConfig::default()
    }
}

fn constrained_audit_is_clean(model: &GamModel, ds: &Dataset) {
    for c in &model.columns {
        let Some(dir) = c.curve.monotonicity().direction() else { continue };
        assert_eq!(c.curve.check_monotone(), 0.0, "column {}", c.name);
        let probes = default_probes(model, ds, &c.name, 300, 7).unwrap();
        let deltas = default_deltas(model, &c.name).unwrap();
        let v = audit_monotonicity(model, &c.name, &probes, &deltas, dir).unwrap();
        assert!(v.is_empty(), "column {}: {} violations", c.name, v.len());
    }
}

#[test]
fn threshold_data_beats_constant_predictor() {
    let ds = common::threshold_dataset(2000, 1, 0.05, Monotonicity::Increasing);
    let s = split(&ds, 11).unwrap();
    let (model, report) = train(&ds, &s, &quick(40, 3)).unwrap();
    let constant = initial_model(&ds, &s.train_indices).unwrap();
    let acc = accuracy(&model, &ds, &s.validation_indices, 0.5).unwrap();
    let base = accuracy(&constant, &ds, &s.validation_indices, 0.5).unwrap();
    assert!(acc > base + 0.2, "trained {acc} vs constant {base}");
    assert_eq!(report.per_rate.len(), 3);
    assert_eq!(model.max_monotonicity_violation(), 0.0);
    constrained_audit_is_clean(&model, &ds);
}

#[test]
fn anti_monotone_data_leaves_flat_calibrator() {
    let ds = common::anti_threshold_dataset(1000, 2, Monotonicity::Increasing);
    let s = split(&ds, 5).unwrap();
    let (model, _) = train(&ds, &s, &quick(20, 0)).unwrap();
    let c = &model.columns[0].curve;
    assert_eq!(c.check_monotone(), 0.0);
    let spread = c.values().last().unwrap() - c.values()[0];
    assert!((0.0..0.5).contains(&spread), "spread {spread}");
    constrained_audit_is_clean(&model, &ds);
}

#[test]
fn loss_gradient_matches_central_differences() {
    let ds = common::random_dataset(50, 4, 9);
    let idx: Vec<usize> = (0..50).collect();
    let mut model = initial_model(&ds, &idx).unwrap();
    let mut r = common::rng(10);
    for c in &mut model.columns {
        let v: Vec<f64> = (0..c.curve.len()).map(|_| r.random_range(-1.5..1.5)).collect();
        c.curve.set_values(v).unwrap();
    }
    model.bias = 0.3;
    let g = loss_gradient(&model, &ds, &idx).unwrap();
    let h = 1e-5;
    let loss_at = |m: &GamModel| logistic_loss(m, &ds, &idx).unwrap();
    let close = |fd: f64, an: f64| (fd - an).abs() <= 1e-5 * fd.abs().max(an.abs()).max(1e-3);

    let (mut up, mut dn) = (model.clone(), model.clone());
    up.bias += h;
    dn.bias -= h;
    let fd = (loss_at(&up) - loss_at(&dn)) / (2.0 * h);
    assert!(close(fd, g.bias), "bias fd {fd} analytic {}", g.bias);

    for d in 0..model.columns.len() {
        for j in 0..model.columns[d].curve.len() {
            let (mut up, mut dn) = (model.clone(), model.clone());
            let mut vu = model.columns[d].curve.values().to_vec();
            let mut vd = vu.clone();
            vu[j] += h;
            vd[j] -= h;
            up.columns[d].curve.set_values(vu).unwrap();
            dn.columns[d].curve.set_values(vd).unwrap();
            let fd = (loss_at(&up) - loss_at(&dn)) / (2.0 * h);
            let an = g.values[d][j];
            assert!(close(fd, an), "column {d} key {j}: fd {fd} analytic {an}");
        }
    }
}

#[test]
fn training_is_deterministic() {
    let ds = common::random_dataset(600, 3, 4);
    let s = split(&ds, 8).unwrap();
    let (a, ra) = train(&ds, &s, &quick(5, 21)).unwrap();
    let (b, rb) = train(&ds, &s, &quick(5, 21)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(
        serde_json::to_string(&ra).unwrap(),
        serde_json::to_string(&rb).unwrap()
    );
}

#[test]
fn training_loss_settles_at_chosen_rate() {
    let ds = common::threshold_dataset(2000, 3, 0.05, Monotonicity::Increasing);
    let s = split(&ds, 2).unwrap();
    let (_, report) = train(&ds, &s, &quick(30, 1)).unwrap();
    let h = &report.loss_history;
    assert_eq!(h.len(), 30);
    for w in h.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "loss rose from {} to {}", w[0], w[1]);
    }
    assert!(h.last().unwrap() < &h[0]);
}

#[test]
fn decreasing_matches_increasing_on_negated_feature() {
    let mut r = common::rng(44);
    let n = 800;
    let x: Vec<f64> = (0..n).map(|_| r.random_range(0..40) as f64).collect();
    let y: Vec<u8> = x
        .iter()
        .map(|&v| (r.random::<f64>() < 1.0 / (1.0 + ((v - 20.0) / 6.0).exp())) as u8)
        .collect();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let dec = Dataset::new(
        vec![ColumnSpec::numeric("x", Monotonicity::Decreasing).with_keypoints(8)],
        vec![x.clone()],
        y.clone(),
    )
    .unwrap();
    let inc = Dataset::new(
        vec![ColumnSpec::numeric("x", Monotonicity::Increasing).with_keypoints(8)],
        vec![neg],
        y,
    )
    .unwrap();
    let s = split(&dec, 6).unwrap();
    let (md, _) = train(&dec, &s, &quick(15, 2)).unwrap();
    let (mi, _) = train(&inc, &s, &quick(15, 2)).unwrap();

    let kd = md.columns[0].curve.keys();
    let ki = mi.columns[0].curve.keys();
    assert_eq!(kd.len(), ki.len());
    for (a, b) in kd.iter().zip(ki.iter().rev()) {
        assert!((a + b).abs() <= 1e-9, "keys {a} vs {b}");
    }
    for v in 0..40 {
        let v = v as f64;
        let a = md.predict_score(&[v]).unwrap();
        let b = mi.predict_score(&[-v]).unwrap();
        assert!((a - b).abs() <= 1e-9, "x={v}: {a} vs {b}");
    }
}

#[test]
fn every_constraint_set_is_feasible_after_training() {
    for seed in 0..6 {
        let ds = common::random_dataset(400, 3, 100 + seed);
        let s = split(&ds, seed).unwrap();
        let (model, _) = train(&ds, &s, &quick(4, seed)).unwrap();
        constrained_audit_is_clean(&model, &ds);
    }
}

#[test]
fn unconstrained_credit_model_violates_monotonicity() {
    let ds = common::credit_like(6000, 12, Monotonicity::None);
    let s = split(&ds, 3).unwrap();
    let (model, _) = train(&ds, &s, &quick(20, 0)).unwrap();
    let probes = default_probes(&model, &ds, "repayment", 200, 1).unwrap();
    let deltas = default_deltas(&model, "repayment").unwrap();
    let v = audit_monotonicity(&model, "repayment", &probes, &deltas, Direction::Increasing).unwrap();
    assert!(!v.is_empty());

    let ds = common::credit_like(6000, 12, Monotonicity::Increasing);
    let (model, _) = train(&ds, &s, &quick(20, 0)).unwrap();
    constrained_audit_is_clean(&model, &ds);
}

#[test]
fn model_file_round_trip_through_disk() {
    let ds = common::random_dataset(300, 2, 5);
    let s = split(&ds, 1).unwrap();
    let (model, _) = train(&ds, &s, &quick(2, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    shapefair::gam::save_model(&model, &path).unwrap();
    let back = shapefair::gam::load_model(&path).unwrap();
    assert_eq!(back, model);
}
