use std::fmt;

use serde::{Deserialize, Serialize};

use super::RatioCI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonCategory {
    ImprovedQuality,
    RegressedQuality,
    ImprovedTime,
    RegressedTime,
    NoChange,
}

impl ComparisonCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ComparisonCategory::ImprovedQuality => "improved_quality",
            ComparisonCategory::RegressedQuality => "regressed_quality",
            ComparisonCategory::ImprovedTime => "improved_time",
            ComparisonCategory::RegressedTime => "regressed_time",
            ComparisonCategory::NoChange => "no_change",
        }
    }
}

impl fmt::Display for ComparisonCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub category: ComparisonCategory,
    pub framework_ci: RatioCI,
    pub baseline_ci: RatioCI,
    pub framework_time: f64,
    pub baseline_time: f64,
}

/// Quality verdicts take precedence; time is only compared when both
/// measurement sets are indistinguishable from the steady state.
pub fn compare_outcome(framework: (RatioCI, f64), baseline: (RatioCI, f64)) -> ComparisonOutcome {
    let (f_ok, b_ok) = (framework.0.includes_one(), baseline.0.includes_one());
    let category = match (f_ok, b_ok) {
        (true, false) => ComparisonCategory::ImprovedQuality,
        (false, true) => ComparisonCategory::RegressedQuality,
        (true, true) if framework.1 < baseline.1 => ComparisonCategory::ImprovedTime,
        (true, true) if framework.1 > baseline.1 => ComparisonCategory::RegressedTime,
        _ => ComparisonCategory::NoChange,
    };
    ComparisonOutcome {
        category,
        framework_ci: framework.0,
        baseline_ci: baseline.0,
        framework_time: framework.1,
        baseline_time: baseline.1,
    }
}
