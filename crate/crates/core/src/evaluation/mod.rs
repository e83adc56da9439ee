//! Quality and cost metrics plus paired statistical comparisons.

mod bootstrap;
mod compare;
mod metrics;
mod report;
mod stats;

pub use bootstrap::{
    bootstrap_replicate_means, ratio_ci_bootstrap, ratio_ci_from_replicates, relative_deviation, RatioCI,
    MIN_RESAMPLES,
};
pub use compare::{compare_outcome, ComparisonCategory, ComparisonOutcome};
pub use metrics::{
    classification_metrics, estimation_category, testing_time, wee, ClassificationMetrics, EstimationCategory,
};
pub use report::{
    classification_table, compare_reports, estimation_table, evaluate, BenchmarkRow, ClassificationRow,
    CompareReport, EstimationRow, EvalConfig, MeasurementLen, MethodRecords, OutcomeRow, QualityTimeRow,
    SeriesRow, WeeRow,
};
pub use stats::{average_ranks, rank_biserial, vargha_delaney_a12, wilcoxon_signed_rank};

/// Linear-interpolation quantile of an ascending slice (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, 0.5))
}
