use proptest::prelude::*;
use shapefair::data::{quantile_keypoints, split_rows};
use shapefair::isotonic::{pav, project_table};
use shapefair::metrics::{max_one_sided_parity, GroupOrder, GroupedPredictions};
use shapefair::{CalibratorCurve, Direction, Monotonicity, ScoreTable};

fn grid_values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..=8).prop_map(|v| v as f64 * 0.25), 1..=max_len)
}

fn curve_strategy() -> impl Strategy<Value = CalibratorCurve> {
    (2usize..8)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(0.05f64..2.0, k),
                prop::collection::vec(-5.0f64..5.0, k),
                -3.0f64..3.0,
            )
        })
        .prop_map(|(gaps, values, start)| {
            let mut keys = Vec::with_capacity(gaps.len());
            let mut acc = start;
            for g in gaps {
                keys.push(acc);
                acc += g;
            }
            CalibratorCurve::new(keys, values, Monotonicity::None).unwrap()
        })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn pav_output_is_monotone_and_mean_preserving(
        v in prop::collection::vec(-10.0f64..10.0, 1..40),
        w_seed in prop::collection::vec(0.1f64..5.0, 40),
    ) {
        let w = &w_seed[..v.len()];
        let out = pav(&v, w).unwrap();
        prop_assert!(out.windows(2).all(|p| p[0] <= p[1]));
        let before: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
        let after: f64 = out.iter().zip(w).map(|(a, b)| a * b).sum();
        prop_assert!((before - after).abs() <= 1e-10 * (1.0 + before.abs()));
        // endpoints move outward
        prop_assert!(out[0] <= v[0]);
        prop_assert!(*out.last().unwrap() >= *v.last().unwrap());
        // idempotent
        prop_assert_eq!(pav(&out, w).unwrap(), out);
    }

    #[test]
    fn pav_beats_every_grid_monotone_vector(v in grid_values(4)) {
        let ones = vec![1.0; v.len()];
        let best = sq_dist(&pav(&v, &ones).unwrap(), &v);
        // every non-decreasing vector on the 0.25 grid
        let n = v.len();
        let mut u = vec![0usize; n];
        loop {
            let cand: Vec<f64> = u.iter().map(|&i| i as f64 * 0.25).collect();
            prop_assert!(best <= sq_dist(&cand, &v) + 1e-12);
            let mut pos = n;
            loop {
                if pos == 0 { break; }
                pos -= 1;
                if u[pos] < 8 {
                    u[pos] += 1;
                    for q in pos + 1..n { u[q] = u[pos]; }
                    break;
                }
                if pos == 0 { pos = usize::MAX; break; }
            }
            if pos == usize::MAX { break; }
        }
    }

    #[test]
    fn project_table_idempotent_and_permutation_equivariant(
        rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 1..6),
        rot in 0usize..6,
    ) {
        let labels: Vec<String> = (0..rows.len()).map(|i| format!("x{i}")).collect();
        let t = ScoreTable::new(labels, vec![0.0, 1.0, 2.0, 3.0], rows).unwrap();
        let p = project_table(&t, Direction::Increasing);
        prop_assert_eq!(project_table(&p, Direction::Increasing), p.clone());
        let r = rot % t.n_x();
        let mut perm = t.clone();
        perm.x_labels.rotate_left(r);
        perm.scores.rotate_left(r);
        let mut pp = project_table(&perm, Direction::Increasing);
        pp.x_labels.rotate_right(r);
        pp.scores.rotate_right(r);
        prop_assert_eq!(pp, p);
    }

    #[test]
    fn grad_matches_finite_differences(c in curve_strategy(), xs in prop::collection::vec(-4.0f64..14.0, 50)) {
        let h = 1e-6;
        for x in xs {
            let w = c.grad_values(x).unwrap();
            for j in 0..c.len() {
                let mut up = c.values().to_vec();
                let mut dn = c.values().to_vec();
                up[j] += h;
                dn[j] -= h;
                let mut cu = c.clone();
                cu.set_values(up).unwrap();
                let mut cd = c.clone();
                cd.set_values(dn).unwrap();
                let fd = (cu.eval(x).unwrap() - cd.eval(x).unwrap()) / (2.0 * h);
                prop_assert!((fd - w.weight_of(j)).abs() < 1e-6, "x={x} j={j} fd={fd} w={}", w.weight_of(j));
            }
            let total: f64 = w.entries().map(|(_, v)| v).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_homogeneous_in_values(c in curve_strategy(), x in -4.0f64..14.0) {
        for alpha in [0.0, 1.0, 2.0] {
            let mut s = c.clone();
            s.set_values(c.values().iter().map(|v| v * alpha).collect()).unwrap();
            prop_assert!((s.eval(x).unwrap() - alpha * c.eval(x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn projected_curve_is_monotone_under_dense_sweep(c in curve_strategy()) {
        let mut inc = CalibratorCurve::new(c.keys().to_vec(), c.values().to_vec(), Monotonicity::Increasing).unwrap();
        inc.project();
        prop_assert_eq!(inc.check_monotone(), 0.0);
        let lo = c.keys()[0] - 1.0;
        let hi = *c.keys().last().unwrap() + 1.0;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=2000 {
            let x = lo + (hi - lo) * i as f64 / 2000.0;
            let v = inc.eval(x).unwrap();
            prop_assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn split_is_a_partition(n in 10usize..500, seed in any::<u64>()) {
        let s = split_rows(n, seed).unwrap();
        let mut all: Vec<usize> = s.train_indices.iter()
            .chain(&s.validation_indices)
            .chain(&s.test_indices)
            .copied()
            .collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!((s.train_indices.len() as f64 - 0.7 * n as f64).abs() <= 1.0);
        prop_assert!((s.validation_indices.len() as f64 - 0.1 * n as f64).abs() <= 1.0);
        prop_assert!((s.test_indices.len() as f64 - 0.2 * n as f64).abs() <= 1.0);
    }

    #[test]
    fn quantile_keys_sorted_with_data_extremes(
        v in prop::collection::vec(-100.0f64..100.0, 2..200),
        k in 2usize..30,
    ) {
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(min < max);
        let keys = quantile_keypoints(&v, k).unwrap();
        prop_assert!(keys.len() <= k);
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(keys[0], min);
        prop_assert_eq!(*keys.last().unwrap(), max);
    }

    #[test]
    fn parity_invariant_to_permutation_and_duplication(
        rows in prop::collection::vec((0u8..3, 0u8..=1), 6..60),
        rot in 0usize..60,
    ) {
        let z: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
        let d: Vec<f64> = rows.iter().map(|r| r.1 as f64).collect();
        prop_assume!((0..3).all(|g| z.contains(&(g as f64))));
        let base = max_one_sided_parity(&GroupedPredictions::from_rows(&z, &d, None, GroupOrder::Ascending).unwrap()).unwrap();
        let r = rot % z.len();
        let (mut z2, mut d2) = (z.clone(), d.clone());
        z2.rotate_left(r);
        d2.rotate_left(r);
        let permuted = max_one_sided_parity(&GroupedPredictions::from_rows(&z2, &d2, None, GroupOrder::Ascending).unwrap()).unwrap();
        prop_assert!((permuted - base).abs() < 1e-12);
        let zz: Vec<f64> = z.iter().chain(&z).copied().collect();
        let dd: Vec<f64> = d.iter().chain(&d).copied().collect();
        let doubled = max_one_sided_parity(&GroupedPredictions::from_rows(&zz, &dd, None, GroupOrder::Ascending).unwrap()).unwrap();
        prop_assert!((doubled - base).abs() < 1e-12);
    }
}

#[test]
fn one_hot_expansion_is_invertible() {
    use shapefair::data::{load_csv_from_reader, LoadOptions, Schema};
    let schema = Schema::from_toml_str(
        r#"
label = "y"
[[column]]
name = "color"
kind = "categorical"
levels = ["red", "green", "blue"]
[[column]]
name = "n"
kind = "numeric"
"#,
    )
    .unwrap();
    let raw = ["red", "blue", "blue", "green", "red"];
    let mut csv = String::from("color,n,y\n");
    for (i, c) in raw.iter().enumerate() {
        csv.push_str(&format!("{c},{i},{}\n", i % 2));
    }
    let ds = load_csv_from_reader(csv.as_bytes(), &schema, LoadOptions::default()).unwrap();
    assert_eq!(ds.rows(), raw.len());
    let levels = ["red", "green", "blue"];
    for (i, c) in raw.iter().enumerate() {
        let row = ds.row(i);
        assert_eq!(row[..3].iter().filter(|v| **v == 1.0).count(), 1);
        let hot = row[..3].iter().position(|v| *v == 1.0).unwrap();
        assert_eq!(levels[hot], *c);
    }
}
