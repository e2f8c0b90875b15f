//! Additive model `f(x) = bias + sum_d c_d(x[d])` and its projected SGD trainer.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibrator::{locate, CalibratorCurve, KeypointWeights, Monotonicity};
use crate::data::{quantile_keypoints, shuffle, Dataset, SplitAssignment};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: &str = "shapefair-gam/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    #[default]
    Sigmoid,
}

/// Seed and configuration digest of the run that produced an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCalibrator {
    pub name: String,
    #[serde(flatten)]
    pub curve: CalibratorCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GamModel {
    pub columns: Vec<FeatureCalibrator>,
    pub bias: f64,
    pub link: Link,
    pub provenance: Option<Provenance>,
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^s) - y s`, stable for large |s|.
fn log_loss(s: f64, y: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p() - y * s
}

impl GamModel {
    pub fn new(columns: Vec<FeatureCalibrator>, bias: f64) -> Self {
        GamModel {
            columns,
            bias,
            link: Link::Sigmoid,
            provenance: None,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn predict_score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension {
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        let mut s = self.bias;
        for (c, &x) in self.columns.iter().zip(row) {
            s += c.curve.eval(x)?;
        }
        Ok(s)
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        self.predict_score(row).map(sigmoid)
    }

    /// Model output under its link.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let s = self.predict_score(row)?;
        Ok(match self.link {
            Link::Identity => s,
            Link::Sigmoid => sigmoid(s),
        })
    }

    fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        if dataset.n_columns() != self.columns.len() {
            return Err(Error::Dimension {
                expected: self.columns.len(),
                found: dataset.n_columns(),
            });
        }
        for (c, spec) in self.columns.iter().zip(dataset.columns()) {
            if c.name != spec.name {
                return Err(Error::Schema(format!(
                    "model column `{}` does not match dataset column `{}`",
                    c.name, spec.name
                )));
            }
        }
        Ok(())
    }

    /// Scores for the given rows.
    pub fn scores(&self, dataset: &Dataset, indices: &[usize]) -> Result<Vec<f64>> {
        self.check_dataset(dataset)?;
        let mut row = vec![0.0; self.columns.len()];
        indices
            .iter()
            .map(|&i| {
                for (d, slot) in row.iter_mut().enumerate() {
                    *slot = dataset.column(d)[i];
                }
                self.predict_score(&row)
            })
            .collect()
    }

    /// Largest per-calibrator monotonicity violation.
    pub fn max_monotonicity_violation(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| c.curve.check_monotone())
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    columns: Vec<FeatureCalibrator>,
    bias: f64,
    link: Link,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl GamModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION.to_string(),
            columns: self.columns.clone(),
            bias: self.bias,
            link: self.link,
            provenance: self.provenance.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
        match value.get("version").and_then(|v| v.as_str()) {
            Some(MODEL_FORMAT_VERSION) => {}
            Some(other) => {
                return Err(Error::Version {
                    found: other.to_string(),
                    expected: MODEL_FORMAT_VERSION.to_string(),
                })
            }
            None => {
                return Err(Error::Parse {
                    offset: 0,
                    message: "missing `version` field".into(),
                })
            }
        }
        let file: ModelFile = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
        // Re-validate curves: serde bypasses the constructor.
        let columns = file
            .columns
            .into_iter()
            .map(|c| {
                let curve = CalibratorCurve::new(
                    c.curve.keys().to_vec(),
                    c.curve.values().to_vec(),
                    c.curve.monotonicity(),
                )
                .map_err(|e| Error::Parse {
                    offset: 0,
                    message: format!("column `{}`: {e}", c.name),
                })?;
                Ok(FeatureCalibrator { name: c.name, curve })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GamModel {
            columns,
            bias: file.bias,
            link: file.link,
            provenance: file.provenance,
        })
    }
}

pub(crate) fn json_error(text: &str, e: &serde_json::Error) -> Error {
    // serde_json reports 1-based line/column
    let offset = if e.line() == 0 {
        0
    } else {
        text.split_inclusive('\n')
            .take(e.line() - 1)
            .map(str::len)
            .sum::<usize>()
            + e.column().saturating_sub(1)
    };
    Error::Parse {
        offset: offset.min(text.len()),
        message: e.to_string(),
    }
}

pub fn save_model(model: &GamModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GamModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GamModel::from_json(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub minibatch_size: usize,
    pub learning_rates: Vec<f64>,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            minibatch_size: 128,
            learning_rates: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            seed: 0,
            loss: Loss::Logistic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub learning_rate: f64,
    pub validation_accuracy: f64,
    pub final_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub per_rate: Vec<RateResult>,
    pub chosen_rate: f64,
    /// The chosen rate sits at an end of the grid; the grid should be extended.
    pub grid_extension_warning: bool,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub seed: u64,
    pub train_rows: usize,
    pub validation_rows: usize,
    /// Full-batch training loss after each epoch, for the chosen rate.
    pub loss_history: Vec<f64>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Per-row interpolation weights for the training rows, computed once.
struct Encoded {
    weights: Vec<Vec<KeypointWeights>>,
    labels: Vec<f64>,
}

impl Encoded {
    fn new(keys: &[Vec<f64>], dataset: &Dataset, indices: &[usize]) -> Self {
        let weights = keys
            .iter()
            .enumerate()
            .map(|(d, k)| {
                let col = dataset.column(d);
                indices.iter().map(|&i| locate(k, col[i])).collect()
            })
            .collect();
        let labels = indices.iter().map(|&i| dataset.labels()[i] as f64).collect();
        Encoded { weights, labels }
    }

    #[inline]
    fn score(&self, values: &[Vec<f64>], bias: f64, r: usize) -> f64 {
        let mut s = bias;
        for (w, v) in self.weights.iter().zip(values) {
            s += w[r].apply(v);
        }
        s
    }

    fn mean_loss(&self, values: &[Vec<f64>], bias: f64) -> f64 {
        let n = self.labels.len();
        (0..n)
            .map(|r| log_loss(self.score(values, bias, r), self.labels[r]))
            .sum::<f64>()
            / n as f64
    }
}

/// Builds the zero-valued starting model: keys from training-row quantiles,
/// bias at the training log-odds.
pub fn initial_model(dataset: &Dataset, train_indices: &[usize]) -> Result<GamModel> {
    if train_indices.is_empty() {
        return Err(Error::Input("no training rows".into()));
    }
    let mut columns = Vec::with_capacity(dataset.n_columns());
    for (d, spec) in dataset.columns().iter().enumerate() {
        let col = dataset.column(d);
        let vals: Vec<f64> = train_indices.iter().map(|&i| col[i]).collect();
        let keys = quantile_keypoints(&vals, spec.keypoint_count).map_err(|e| match e {
            Error::DegenerateFeature { value } => Error::DegenerateColumn {
                column: spec.name.clone(),
                value,
            },
            other => other,
        })?;
        columns.push(FeatureCalibrator {
            name: spec.name.clone(),
            curve: CalibratorCurve::zeros(keys, spec.monotonicity)?,
        });
    }
    let positives = train_indices
        .iter()
        .filter(|&&i| dataset.labels()[i] == 1)
        .count() as f64;
    let rate = (positives / train_indices.len() as f64).clamp(1e-6, 1.0 - 1e-6);
    Ok(GamModel::new(columns, (rate / (1.0 - rate)).ln()))
}

/// Projected minibatch SGD over a learning-rate grid; returns the model with
/// the best validation accuracy (ties go to the smaller rate).
pub fn train(
    dataset: &Dataset,
    split: &SplitAssignment,
    config: &TrainConfig,
) -> Result<(GamModel, TrainReport)> {
    let start = Instant::now();
    if config.learning_rates.is_empty() {
        return Err(Error::Argument("learning-rate grid is empty".into()));
    }
    if config.epochs == 0 || config.minibatch_size == 0 {
        return Err(Error::Argument("epochs and minibatch size must be positive".into()));
    }
    if let Some(lr) = config
        .learning_rates
        .iter()
        .find(|r| !(**r > 0.0) || !r.is_finite())
    {
        return Err(Error::Argument(format!("learning rate {lr} is not positive")));
    }
    if split.validation_indices.is_empty() {
        return Err(Error::Split("validation split is empty".into()));
    }
    let mut grid = config.learning_rates.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let init = initial_model(dataset, &split.train_indices)?;
    let keys: Vec<Vec<f64>> = init.columns.iter().map(|c| c.curve.keys().to_vec()).collect();
    let encoded = Encoded::new(&keys, dataset, &split.train_indices);

    let mut per_rate = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, GamModel, Vec<f64>)> = None;
    for (gi, &lr) in grid.iter().enumerate() {
        let (model, history) = run_sgd(&init, &encoded, config, lr);
        let acc = accuracy(&model, dataset, &split.validation_indices, 0.5)?;
        per_rate.push(RateResult {
            learning_rate: lr,
            validation_accuracy: acc,
            final_train_loss: *history.last().unwrap(),
        });
        if best.as_ref().is_none_or(|(_, b, _, _)| acc > *b) {
            best = Some((gi, acc, model, history));
        }
    }
    let (gi, _, model, loss_history) = best.expect("grid is non-empty");
    let report = TrainReport {
        per_rate,
        chosen_rate: grid[gi],
        grid_extension_warning: gi == 0 || gi == grid.len() - 1,
        epochs: config.epochs,
        minibatch_size: config.minibatch_size,
        seed: config.seed,
        train_rows: split.train_indices.len(),
        validation_rows: split.validation_indices.len(),
        loss_history,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

fn run_sgd(init: &GamModel, enc: &Encoded, config: &TrainConfig, lr: f64) -> (GamModel, Vec<f64>) {
    let mut values: Vec<Vec<f64>> = init.columns.iter().map(|c| c.curve.values().to_vec()).collect();
    let mono: Vec<Monotonicity> = init.columns.iter().map(|c| c.curve.monotonicity()).collect();
    let mut bias = init.bias;
    let mut grads: Vec<Vec<f64>> = values.iter().map(|v| vec![0.0; v.len()]).collect();
    let mut order: Vec<usize> = (0..enc.labels.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        shuffle(&mut order, &mut rng);
        for batch in order.chunks(config.minibatch_size) {
            let mut bias_grad = 0.0;
            for &r in batch {
                let g = sigmoid(enc.score(&values, bias, r)) - enc.labels[r];
                bias_grad += g;
                for (d, w) in enc.weights.iter().enumerate() {
                    for (i, wi) in w[r].entries() {
                        grads[d][i] += g * wi;
                    }
                }
            }
            let step = lr / batch.len() as f64;
            bias -= step * bias_grad;
            for ((v, g), m) in values.iter_mut().zip(grads.iter_mut()).zip(&mono) {
                for (vi, gi) in v.iter_mut().zip(g.iter_mut()) {
                    *vi -= step * *gi;
                    *gi = 0.0;
                }
                if let Some(dir) = m.direction() {
                    crate::isotonic::project_monotone(v, dir);
                }
            }
        }
        history.push(enc.mean_loss(&values, bias));
    }

    let mut model = init.clone();
    model.bias = bias;
    for (c, v) in model.columns.iter_mut().zip(values) {
        c.curve.values_mut().copy_from_slice(&v);
    }
    (model, history)
}

/// Mean logistic loss over the given rows.
pub fn logistic_loss(model: &GamModel, dataset: &Dataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Input("empty index set".into()));
    }
    let scores = model.scores(dataset, indices)?;
    let labels = dataset.labels();
    Ok(scores
        .iter()
        .zip(indices)
        .map(|(&s, &i)| log_loss(s, labels[i] as f64))
        .sum::<f64>()
        / indices.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradient {
    /// One entry per keypoint value of each calibrator.
    pub values: Vec<Vec<f64>>,
    pub bias: f64,
}

/// Gradient of [`logistic_loss`] with respect to every keypoint value and the bias.
pub fn loss_gradient(model: &GamModel, dataset: &Dataset, indices: &[usize]) -> Result<ModelGradient> {
    if indices.is_empty() {
        return Err(Error::Input("empty index set".into()));
    }
    model.check_dataset(dataset)?;
    let mut grad = ModelGradient {
        values: model.columns.iter().map(|c| vec![0.0; c.curve.len()]).collect(),
        bias: 0.0,
    };
    let n = indices.len() as f64;
    let mut row = vec![0.0; model.columns.len()];
    for &i in indices {
        for (d, slot) in row.iter_mut().enumerate() {
            *slot = dataset.column(d)[i];
        }
        let g = (sigmoid(model.predict_score(&row)?) - dataset.labels()[i] as f64) / n;
        grad.bias += g;
        for (d, c) in model.columns.iter().enumerate() {
            for (j, w) in c.curve.grad_values(row[d])?.entries() {
                grad.values[d][j] += g * w;
            }
        }
    }
    Ok(grad)
}

/// Fraction of rows where `predict_proba >= threshold` agrees with the label.
pub fn accuracy(model: &GamModel, dataset: &Dataset, indices: &[usize], threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Argument(format!("threshold {threshold} outside (0, 1)")));
    }
    if indices.is_empty() {
        return Err(Error::Input("accuracy over an empty index set".into()));
    }
    let scores = model.scores(dataset, indices)?;
    let labels = dataset.labels();
    let correct = scores
        .iter()
        .zip(indices)
        .filter(|(&s, &i)| (sigmoid(s) >= threshold) == (labels[i] == 1))
        .count();
    Ok(correct as f64 / indices.len() as f64)
}

pub fn auc(model: &GamModel, dataset: &Dataset, indices: &[usize]) -> Result<f64> {
    let scores = model.scores(dataset, indices)?;
    let labels: Vec<u8> = indices.iter().map(|&i| dataset.labels()[i]).collect();
    auc_from_scores(&scores, &labels)
}

/// Mann-Whitney statistic with mid-ranks for ties.
pub fn auc_from_scores(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric("AUC needs both label classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64 * mid;
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnSpec;

    fn identity_model(n: usize) -> GamModel {
        let cols = (0..n)
            .map(|d| FeatureCalibrator {
                name: format!("f{d}"),
                curve: CalibratorCurve::new(vec![0.0, 1.0], vec![0.0, 1.0], Monotonicity::Increasing)
                    .unwrap(),
            })
            .collect();
        GamModel::new(cols, 0.0)
    }

    #[test]
    fn score_examples() {
        let mut m = identity_model(2);
        assert_eq!(m.predict_score(&[0.5, 0.5]).unwrap(), 1.0);
        for c in &mut m.columns {
            c.curve.set_values(vec![0.0, 0.0]).unwrap();
        }
        assert_eq!(m.predict_score(&[0.3, 0.9]).unwrap(), 0.0);
        assert!(matches!(m.predict_score(&[0.3]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(50.0) > 0.999999);
        assert!((sigmoid(1.0) - 0.7310585786).abs() < 1e-9);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_from_scores(&[1.0; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc_from_scores(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc_from_scores(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1]).unwrap(), 0.0);
        // one tie between a positive and a negative
        assert_eq!(auc_from_scores(&[0.1, 0.5, 0.5], &[0, 0, 1]).unwrap(), 0.75);
        assert!(matches!(auc_from_scores(&[0.1, 0.2], &[1, 1]), Err(Error::Metric(_))));
    }

    fn tiny_dataset() -> Dataset {
        Dataset::new(
            vec![ColumnSpec::numeric("f0", Monotonicity::Increasing)],
            vec![vec![0.0, 0.2, 0.8, 1.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn accuracy_examples() {
        let ds = tiny_dataset();
        let mut m = identity_model(1);
        m.columns[0].curve.set_values(vec![-5.0, 5.0]).unwrap();
        assert_eq!(accuracy(&m, &ds, &[0, 1, 2, 3], 0.5).unwrap(), 1.0);
        m.columns[0].curve.set_values(vec![3.0, 3.0]).unwrap();
        assert_eq!(accuracy(&m, &ds, &[0, 1, 2, 3], 0.5).unwrap(), 0.5);
        assert!(accuracy(&m, &ds, &[], 0.5).is_err());
        assert!(accuracy(&m, &ds, &[0], 1.0).is_err());
    }

    #[test]
    fn model_json_round_trip_and_errors() {
        let mut m = identity_model(2);
        m.bias = 0.1 + 0.2;
        m.columns[1].curve.set_values(vec![1.0 / 3.0, 2.0_f64.sqrt()]).unwrap();
        m.provenance = Some(Provenance {
            seed: 7,
            config_hash: "abc".into(),
        });
        let text = m.to_json();
        let back = GamModel::from_json(&text).unwrap();
        assert_eq!(back, m);

        let other = text.replace(MODEL_FORMAT_VERSION, "shapefair-gam/99");
        assert!(matches!(GamModel::from_json(&other), Err(Error::Version { .. })));

        let cut = &text[..text.len() / 2];
        match GamModel::from_json(cut) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 0 && offset <= cut.len()),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn train_rejects_empty_grid() {
        let ds = tiny_dataset();
        let split = SplitAssignment {
            seed: 0,
            train_indices: vec![0, 1, 2, 3],
            validation_indices: vec![0],
            test_indices: vec![],
        };
        let cfg = TrainConfig {
            learning_rates: vec![],
            ..TrainConfig::default()
        };
        assert!(matches!(train(&ds, &split, &cfg), Err(Error::Argument(_))));
    }

    #[test]
    fn degenerate_training_column_is_named() {
        let ds = Dataset::new(
            vec![ColumnSpec::numeric("flat", Monotonicity::None)],
            vec![vec![1.0; 4]],
            vec![0, 1, 0, 1],
        )
        .unwrap();
        let split = SplitAssignment {
            seed: 0,
            train_indices: vec![0, 1, 2],
            validation_indices: vec![3],
            test_indices: vec![],
        };
        let err = train(&ds, &split, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateColumn { ref column, .. } if column == "flat"));
    }
}
