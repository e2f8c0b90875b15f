#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapefair::{ColumnSpec, Dataset, Monotonicity};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
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

/// One feature on [0, 1]; label is 1 iff the feature exceeds the sample
/// median, flipped with probability `noise`.
pub fn threshold_dataset(n: usize, seed: u64, noise: f64, m: Monotonicity) -> Dataset {
    let mut r = rng(seed);
    let x: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let med = median(&x);
    let y = x
        .iter()
        .map(|&v| {
            let clean = (v > med) as u8;
            if r.random::<f64>() < noise {
                1 - clean
            } else {
                clean
            }
        })
        .collect();
    Dataset::new(vec![ColumnSpec::numeric("x", m).with_keypoints(10)], vec![x], y).unwrap()
}

/// Like [`threshold_dataset`] but the label falls with the feature.
pub fn anti_threshold_dataset(n: usize, seed: u64, m: Monotonicity) -> Dataset {
    let ds = threshold_dataset(n, seed, 0.0, m);
    let y = ds.labels().iter().map(|&l| 1 - l).collect();
    Dataset::new(ds.columns().to_vec(), vec![ds.column(0).to_vec()], y).unwrap()
}

/// Several numeric features with a random additive logit and random tags.
pub fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for j in 0..d {
        let m = match r.random_range(0..3) {
            0 => Monotonicity::None,
            1 => Monotonicity::Increasing,
            _ => Monotonicity::Decreasing,
        };
        let k = r.random_range(3..=8);
        cols.push(ColumnSpec::numeric(format!("f{j}"), m).with_keypoints(k));
        let scale = r.random_range(0.5..20.0);
        vals.push((0..n).map(|_| (r.random::<f64>() * scale * 100.0).round() / 100.0).collect::<Vec<_>>());
    }
    let coef: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
    let y = (0..n)
        .map(|i| {
            let s: f64 = (0..d)
                .map(|j| coef[j] * ((vals[j][i] * 3.0).sin() + 0.2 * vals[j][i]))
                .sum();
            (r.random::<f64>() < 1.0 / (1.0 + (-s).exp())) as u8
        })
        .collect();
    Dataset::new(cols, vals, y).unwrap()
}

/// Credit-default-like data: marital status (3 Boolean columns) and a
/// repayment status in -2..=8 whose default rate rises with months overdue,
/// except a sparse noisy tail.
#[allow(clippy::needless_range_loop)]
pub fn credit_like(n: usize, seed: u64, repay_m: Monotonicity) -> Dataset {
    let mut r = rng(seed);
    let mut marital = vec![vec![0.0; n]; 3];
    let mut repay = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let m: usize = r.random_range(0..3);
        marital[m][i] = 1.0;
        // mostly -2..=2, tail out to 8
        let status: i32 = if r.random::<f64>() < 0.75 {
            r.random_range(-2..=2)
        } else {
            r.random_range(3..=8)
        };
        let base = match status {
            s if s <= 0 => 0.15,
            1 => 0.35,
            2 => 0.65,
            3 | 4 => 0.75,
            // noisy tail: looks safer than 2-3 months overdue
            _ => 0.45,
        };
        let p: f64 = base + [0.0, 0.03, -0.02][m];
        repay.push(status as f64);
        y.push((r.random::<f64>() < p) as u8);
    }
    let mut cols: Vec<ColumnSpec> = (1..=3)
        .map(|l| ColumnSpec::boolean(format!("marital={l}"), Monotonicity::None))
        .collect();
    cols.push(ColumnSpec::numeric("repayment", repay_m));
    let mut vals = marital;
    vals.push(repay);
    Dataset::new(cols, vals, y).unwrap()
}

/// Funding-like data: poverty level z in {0,1,2,3} (protected, should be
/// favoured upward) and students reached. The raw labels favour low poverty.
pub fn funding_like(n: usize, seed: u64, poverty_m: Monotonicity) -> Dataset {
    let mut r = rng(seed);
    let mut pov = Vec::with_capacity(n);
    let mut students = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let z = r.random_range(0..4) as f64;
        let s = (r.random_range(10.0..500.0_f64)).round();
        let logit = 0.4 - 0.5 * z + 0.006 * (s - 250.0);
        pov.push(z);
        students.push(s);
        y.push((r.random::<f64>() < 1.0 / (1.0 + (-logit).exp())) as u8);
    }
    let cols = vec![
        ColumnSpec::numeric("poverty", poverty_m).with_keypoints(4),
        ColumnSpec::numeric("students", Monotonicity::Increasing),
    ];
    let mut ds = Dataset::new(cols, vec![pov, students], y).unwrap();
    ds.set_protected("poverty").unwrap();
    ds
}
