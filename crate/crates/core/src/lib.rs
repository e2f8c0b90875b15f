//! Shape-constrained additive models and fairness analysis.
//!
//! * [`data`]: CSV ingestion against a schema, deterministic splits, quantile keys.
//! * [`calibrator`]: piecewise-linear one-dimensional curves.
//! * [`isotonic`]: pool-adjacent-violators and monotone projection of score tables.
//! * [`gam`]: the additive model, projected SGD training, accuracy and AUC.
//! * [`metrics`]: one-sided parity / equal opportunity and monotonicity audits.
//! * [`bounds`]: exact checks of the monotonicity-to-parity bounds on discrete cases.
//! * [`fixtures`]: the bundled counterexamples.

// `!(x > 0.0)` style checks reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod calibrator;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod gam;
pub mod isotonic;
pub mod metrics;

pub use calibrator::{CalibratorCurve, KeypointWeights, Monotonicity};
pub use data::{ColumnKind, ColumnSpec, Dataset, Schema, SplitAssignment};
pub use error::{Error, ErrorCategory, Result};
pub use gam::{GamModel, TrainConfig, TrainReport};
pub use isotonic::{Direction, ScoreTable};
