//! Turning episode logs into encounter tables, behavioral regressions,
//! optimality gaps and internal-dynamics statistics.

mod behavior;
mod dynamics;
mod encounters;

use thiserror::Error;

use crate::optimal::OptimalError;
use crate::stats::StatsError;

pub use behavior::{
    estimate_travel_steps, gap_vs_discount_regression, leaving_time_regression, optimality_gap,
    score_regression, DistanceGap, GapSolver, OptimalityGapReport,
};
pub use dynamics::{
    activity_range_regression, exit_activity_anova, longest_significant_run, project_encounters,
    quartile_mean_slopes, quartile_split, quartile_traces, sliding_slope_regression, slope_vs_distance_regression,
    state_pca, Alignment, ExitAnova, PairwiseRow, Quartile, SlidingRegression, TracePoint,
};
pub use encounters::{extract_encounters, group_by_distance, PatchEncounter, DEFAULT_MARGIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("no data: {0}")]
    Empty(String),
    #[error("missing dependency: {0}")]
    Dependency(String),
    #[error("too few samples: {0}")]
    TooFew(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Solver(#[from] OptimalError),
}
