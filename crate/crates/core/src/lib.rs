//! Forensic analytics for accounting-fraud detection from financial ratios.
//!
//! The crate is organised along the analysis pipeline:
//!
//! * [`ingest`]: CSV parsing of financial statements and SIC → industry mapping.
//! * [`ratios`]: the twenty leverage / profitability / liquidity / efficiency ratios.
//! * [`stats`]: midranks, Mann-Whitney tests, Kendall tau-a and feature selection.
//! * [`sampling`]: matched fraud/control sampling and stratified k-fold splits.
//! * [`models`]: LDA, QDA, logistic regression, AdaBoost, CART, boosted trees, random forests.
//! * [`metrics`]: confusion matrices, the seven evaluation measures and cross-validation.
//! * [`rules`]: red-flag rule extraction from fitted trees and report rendering.
//! * [`synth`]: synthetic statement generation with a class-separation knob.
//! * [`pipeline`]: configuration, seed derivation and the end-to-end run.

pub mod error;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod ratios;
pub mod rules;
pub mod sampling;
pub mod seed;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{map_sic_to_industry, parse_statements, Industry, LineItem, RawStatement};
pub use metrics::{
    classification_metrics, confusion, cross_validate, roc_auc, ConfusionMatrix, EvaluationReport,
    Metric,
};
pub use models::{predict_label, DesignMatrix, FittedModel, Hyperparameters, ModelKind, ModelSpec};
pub use pipeline::{run_pipeline, PipelineConfig, SelectionMode};
pub use ratios::{compute_ratios, Observation, Ratio, RatioVector};
pub use rules::{extract_rules, render_report, Comparator, RedFlagRule};
pub use sampling::{match_controls, stratified_folds, FoldAssignment, MatchedSample};
pub use stats::{
    correlation_matrix, kendall_tau_a, mann_whitney, midrank, select_features, CorrelationMatrix,
    Direction, FeatureSelection, MannWhitneyResult,
};
pub use synth::{generate_dataset, SynthConfig};
