//! Fine-grained adversarial disentanglement: one auto-encoder per factor,
//! each with private adversarial predictors for every other factor, trained
//! by alternating descent on a synthetic pitch/envelope/timbre benchmark.

mod error;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
pub use metrics::{EvalConfig, MetricsReport, ProbeConfig, ProbeMatrix};
pub use model::{DisentangleModel, ModelDims};
pub use numerics::{Matrix, ParamStore, Rng};
pub use synthgen::{Dataset, FactorAssignment, FactorSpec, FeatureVector, LabeledSample, MaskPolicy};
pub use trainer::{BatchLossBreakdown, TrainConfig, TrainHistory};
