//! Experiment orchestration: descriptor extraction, patient-grouped splits,
//! embedding ingestion and the train/validate/test protocol.

mod config;
mod embed;
mod experiment;
mod extract;
mod split;

pub use config::{EmbeddingSource, ExperimentConfig, Mode};
pub use embed::{load_embeddings, standin_embedder, EmbeddingTable, DEFAULT_EMBEDDING_DIM};
pub use experiment::{
    fit_and_evaluate, run_experiment, run_protocol, training_matrix, CvSummary, ExperimentReport, FitAudit, FitOutcome,
    FoldResult, ScoredScan,
};
pub use extract::{extract_all, extract_scan, feature_names, DescriptorConfig, Family};
pub use split::{make_folds, patient_split, FoldPlan, SplitPlan};
