//! Parameter tuning, evaluation metrics and significance testing.

mod assoc;
mod grid;
mod metrics;
mod wilcoxon;

pub use assoc::{associate, trial_cost, AssociationResult, CostParams};
pub use grid::{
    grid_costs, grid_search, linspace, percentile, standard_grid, threshold_upper_bound, GridResult, GridSpec, Trial,
};
pub use metrics::{detection_metrics, ConfusionMatrix, DetectionMetrics, TypeRecall, DEFAULT_VIEW_RADIUS};
pub use wilcoxon::{
    exact_p_value, normal_p_value, signed_ranks, wilcoxon_signed_rank, Alternative, SignedRanks, EXACT_MAX_N,
};
