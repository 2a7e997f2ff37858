//! Self-contained supervised learners used by the prediction loop: a
//! gradient-boosted regression-tree latency predictor and a logistic
//! propensity-score estimator.

mod gbt;
mod logistic;

pub use gbt::{fit_gbt, GbtHyperparams, LatencyModel};
pub use logistic::{fit_logistic, PropensityModel};
