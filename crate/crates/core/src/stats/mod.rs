//! Nonparametric feature analysis: midranks, Mann-Whitney tests, Kendall
//! tau-a correlation, and per-industry ratio selection.

mod kendall;
mod mann_whitney;
mod rank;
mod selection;

pub use kendall::{correlation_matrix, kendall_tau_a, write_correlation_csv, CorrelationMatrix};
pub use mann_whitney::{
    mann_whitney, mann_whitney_with, Direction, MannWhitneyResult, PValueMethod,
    EXACT_MAX_SMALLER_GROUP,
};
pub use rank::midrank;
pub use selection::{
    published_direction, published_preset, select_features, FeatureSelection, Provenance,
    PrunedRatio, RatioTest, SelectionParams,
};
