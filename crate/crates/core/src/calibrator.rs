//! One-dimensional piecewise-linear calibration curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isotonic::{project_monotone, Direction};

/// Shape constraint attached to a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    #[default]
    None,
    Increasing,
    Decreasing,
}

impl Monotonicity {
    pub fn direction(self) -> Option<Direction> {
        match self {
            Monotonicity::None => None,
            Monotonicity::Increasing => Some(Direction::Increasing),
            Monotonicity::Decreasing => Some(Direction::Decreasing),
        }
    }
}

/// Interpolation weights of `eval` with respect to the keypoint values.
///
/// Either one keypoint with weight 1 (clamped or exactly on a key) or two
/// adjacent keypoints whose weights sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeypointWeights {
    Single(usize),
    Pair { lower: usize, upper_weight: f64 },
}

impl KeypointWeights {
    /// `(index, weight)` pairs with non-zero weight.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> {
        let (a, b) = match *self {
            KeypointWeights::Single(i) => ((i, 1.0), None),
            KeypointWeights::Pair {
                lower,
                upper_weight,
            } => ((lower, 1.0 - upper_weight), Some((lower + 1, upper_weight))),
        };
        std::iter::once(a).chain(b)
    }

    pub fn weight_of(&self, j: usize) -> f64 {
        self.entries().filter(|(i, _)| *i == j).map(|(_, w)| w).sum()
    }

    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        match *self {
            KeypointWeights::Single(i) => values[i],
            KeypointWeights::Pair {
                lower,
                upper_weight,
            } => {
                let (a, b) = (values[lower], values[lower + 1]);
                // Clamped so rounding never leaves [a, b]; keeps monotone curves exactly monotone.
                let v = a + upper_weight * (b - a);
                if a <= b {
                    v.clamp(a, b)
                } else {
                    v.clamp(b, a)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratorCurve {
    keys: Vec<f64>,
    values: Vec<f64>,
    monotonicity: Monotonicity,
}

impl CalibratorCurve {
    pub fn new(keys: Vec<f64>, values: Vec<f64>, monotonicity: Monotonicity) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::Argument("calibrator needs at least one key".into()));
        }
        if keys.len() != values.len() {
            return Err(Error::Dimension {
                expected: keys.len(),
                found: values.len(),
            });
        }
        if keys.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Argument("calibrator keys and values must be finite".into()));
        }
        if keys.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("calibrator keys must be strictly increasing".into()));
        }
        Ok(CalibratorCurve {
            keys,
            values,
            monotonicity,
        })
    }

    /// A curve with all values zero.
    pub fn zeros(keys: Vec<f64>, monotonicity: Monotonicity) -> Result<Self> {
        let values = vec![0.0; keys.len()];
        Self::new(keys, values, monotonicity)
    }

    pub fn keys(&self) -> &[f64] {
        &self.keys
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Replaces the values; the length must match the keys.
    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.keys.len() {
            return Err(Error::Dimension {
                expected: self.keys.len(),
                found: values.len(),
            });
        }
        self.values = values;
        Ok(())
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.grad_values(x)?.apply(&self.values))
    }

    /// Partial derivatives of [`eval`](Self::eval) with respect to each value.
    pub fn grad_values(&self, x: f64) -> Result<KeypointWeights> {
        if x.is_nan() {
            return Err(Error::Evaluation("NaN input to calibrator".into()));
        }
        Ok(locate(&self.keys, x))
    }

    /// Largest directed decrease between adjacent keypoints (0 when the
    /// constraint holds or the curve is unconstrained).
    pub fn check_monotone(&self) -> f64 {
        let sign = match self.monotonicity {
            Monotonicity::None => return 0.0,
            Monotonicity::Increasing => 1.0,
            Monotonicity::Decreasing => -1.0,
        };
        self.values
            .windows(2)
            .map(|w| sign * (w[0] - w[1]))
            .fold(0.0, f64::max)
    }

    /// L2 projection of the values onto the curve's monotone cone.
    pub fn project(&mut self) {
        if let Some(dir) = self.monotonicity.direction() {
            project_monotone(&mut self.values, dir);
        }
    }
}

/// Bracketing keypoints for `x` on strictly increasing `keys`.
pub(crate) fn locate(keys: &[f64], x: f64) -> KeypointWeights {
    let last = keys.len() - 1;
    if x <= keys[0] {
        return KeypointWeights::Single(0);
    }
    if x >= keys[last] {
        return KeypointWeights::Single(last);
    }
    // first index with key > x; 1 ..= last
    let upper = keys.partition_point(|&k| k <= x);
    let lower = upper - 1;
    if keys[lower] == x {
        return KeypointWeights::Single(lower);
    }
    let t = (x - keys[lower]) / (keys[upper] - keys[lower]);
    KeypointWeights::Pair {
        lower,
        upper_weight: t,
    }
}
