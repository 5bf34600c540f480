//! Standardization, a one-hidden-layer MLP trained on binary cross-entropy,
//! and the evaluation metrics reported for every model.

mod metrics;
mod mlp;
mod standardize;

pub use metrics::{evaluate_scores, pairwise_auc, EvalReport};
pub use mlp::{
    evaluate, mlp_forward, mlp_gradient, mlp_train, Mlp, Optimizer, TrainConfig, TrainTrace,
    TrainedModel,
};
pub use standardize::{apply_standardizer, fit_standardizer, Standardizer};
