//! Shared domain types and per-segment standardization.
//!
//! Iteration indices are 1-based everywhere: the first measurement of a
//! series is iteration 1 and a steady-state annotation `st` names the first
//! steady iteration.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default per-iteration wall time when a corpus does not record one.
pub const DEFAULT_ITERATION_DURATION_S: f64 = 1.0;

/// Identifies one fork (fresh VM instance) of one benchmark.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BenchmarkId {
    pub project: String,
    pub benchmark: String,
    pub fork: u32,
}

impl BenchmarkId {
    pub fn new(project: impl Into<String>, benchmark: impl Into<String>, fork: u32) -> Self {
        Self {
            project: project.into(),
            benchmark: benchmark.into(),
            fork,
        }
    }

    /// The benchmark this fork belongs to.
    pub fn key(&self) -> BenchmarkKey {
        BenchmarkKey {
            project: self.project.clone(),
            benchmark: self.benchmark.clone(),
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}#{}", self.project, self.benchmark, self.fork)
    }
}

/// A benchmark regardless of fork; the unit of fold assignment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BenchmarkKey {
    pub project: String,
    pub benchmark: String,
}

impl fmt::Display for BenchmarkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.project, self.benchmark)
    }
}

/// Iteration-ordered average execution times of one fork, in seconds per operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSeries {
    pub id: BenchmarkId,
    pub values: Vec<f64>,
    /// Wall-clock seconds per iteration.
    pub iteration_duration: f64,
}

impl MeasurementSeries {
    pub fn new(id: BenchmarkId, values: Vec<f64>) -> Self {
        Self {
            id,
            values,
            iteration_duration: DEFAULT_ITERATION_DURATION_S,
        }
    }

    pub fn with_iteration_duration(mut self, seconds: f64) -> Self {
        self.iteration_duration = seconds;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values of iterations `start..=start + len - 1` (1-based), if in range.
    pub fn window(&self, start: usize, len: usize) -> Option<&[f64]> {
        if start == 0 {
            return None;
        }
        self.values.get(start - 1..start - 1 + len)
    }
}

/// Ground-truth first steady iteration of a series, or "never reached".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AnnotationRepr", into = "AnnotationRepr")]
pub struct SteadyStateAnnotation {
    st: Option<usize>,
}

impl SteadyStateAnnotation {
    /// Steady state reached at iteration `st` (1-based, `st >= 1`).
    pub fn reached_at(st: usize) -> Self {
        assert!(st >= 1, "steady-state iteration is 1-based");
        Self { st: Some(st) }
    }

    pub fn not_reached() -> Self {
        Self { st: None }
    }

    pub fn st(&self) -> Option<usize> {
        self.st
    }

    pub fn reached(&self) -> bool {
        self.st.is_some()
    }

    /// Checks `1 <= st <= n` for a series of length `n`.
    pub fn is_consistent_with(&self, n: usize) -> bool {
        self.st.map_or(true, |st| st >= 1 && st <= n)
    }
}

#[derive(Serialize, Deserialize)]
struct AnnotationRepr {
    st: Option<usize>,
    #[serde(default)]
    reached: Option<bool>,
}

impl TryFrom<AnnotationRepr> for SteadyStateAnnotation {
    type Error = String;

    fn try_from(repr: AnnotationRepr) -> std::result::Result<Self, String> {
        if repr.st == Some(0) {
            return Err("st is 1-based and must be >= 1".into());
        }
        if let Some(reached) = repr.reached {
            if reached != repr.st.is_some() {
                return Err("`reached` disagrees with `st`".into());
            }
        }
        Ok(Self { st: repr.st })
    }
}

impl From<SteadyStateAnnotation> for AnnotationRepr {
    fn from(a: SteadyStateAnnotation) -> Self {
        Self {
            st: a.st,
            reached: Some(a.st.is_some()),
        }
    }
}

/// Stable: entirely inside the steady state. Unstable: holds at least one
/// warm-up measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Stable,
    Unstable,
}

impl Label {
    /// Label of a window starting at iteration `start` given steady state `st`.
    pub fn for_start(start: usize, st: usize) -> Self {
        if start >= st {
            Label::Stable
        } else {
            Label::Unstable
        }
    }

    /// Ridge target encoding.
    pub fn target(self) -> f64 {
        match self {
            Label::Stable => 1.0,
            Label::Unstable => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Stable => "stable",
            Label::Unstable => "unstable",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stable" => Ok(Label::Stable),
            "unstable" => Ok(Label::Unstable),
            other => Err(Error::InvalidInput(format!("unknown label `{other}`"))),
        }
    }
}

/// A contiguous window of measurements cut from a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub source: BenchmarkId,
    /// 1-based iteration of the first value.
    pub start: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub segment: Segment,
    pub label: Label,
}

/// Labeled segments plus the benchmark-to-fold mapping used for cross-validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentDataset {
    pub items: Vec<LabeledSegment>,
    pub fold_assignment: BTreeMap<BenchmarkKey, usize>,
}

impl SegmentDataset {
    pub fn new(items: Vec<LabeledSegment>) -> Self {
        Self {
            items,
            fold_assignment: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Window length shared by every item, if the dataset is non-empty.
    pub fn window(&self) -> Option<usize> {
        self.items.first().map(|item| item.segment.values.len())
    }

    pub fn fold_of(&self, item: &LabeledSegment) -> Option<usize> {
        self.fold_assignment.get(&item.segment.source.key()).copied()
    }

    pub fn count(&self, label: Label) -> usize {
        self.items.iter().filter(|item| item.label == label).count()
    }
}

/// Output of [`standardize_segment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub values: Vec<f64>,
    /// The input had zero variance and was mapped to all zeros.
    pub degenerate: bool,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-normalizes a segment with its own mean and population standard deviation.
///
/// Zero-variance segments map to all zeros and are flagged degenerate.
pub fn standardize_segment(values: &[f64]) -> Result<Standardized> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "segment of length {} cannot be standardized (need >= 2)",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("segment contains non-finite values".into()));
    }
    let (mean, sigma) = mean_std(values);
    // Rounding leaves a residual sigma on the order of ulp(mean) for constant input.
    if sigma == 0.0 || sigma <= mean.abs() * 1e-13 {
        return Ok(Standardized {
            values: vec![0.0; values.len()],
            degenerate: true,
        });
    }
    Ok(Standardized {
        values: values.iter().map(|v| (v - mean) / sigma).collect(),
        degenerate: false,
    })
}

/// A single problem found by [`validate_series`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum ValidationIssue {
    Empty,
    NonFinite { index: usize },
    NonPositive { index: usize },
    LengthMismatch { expected: usize, actual: usize },
    InvalidIterationDuration,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::Empty => f.write_str("empty"),
            ValidationIssue::NonFinite { index } => write!(f, "non-finite value at index {index}"),
            ValidationIssue::NonPositive { index } => {
                write!(f, "non-positive value at index {index}")
            }
            ValidationIssue::LengthMismatch { expected, actual } => {
                write!(f, "length {actual} != expected {expected}")
            }
            ValidationIssue::InvalidIterationDuration => {
                f.write_str("iteration duration must be positive and finite")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Reports empty, non-finite, and non-positive values and length mismatches.
///
/// Indices in the report are 0-based positions into `values`.
pub fn validate_series(series: &MeasurementSeries, expected_len: Option<usize>) -> ValidationReport {
    let mut issues = Vec::new();
    if series.values.is_empty() {
        issues.push(ValidationIssue::Empty);
    }
    for (index, &v) in series.values.iter().enumerate() {
        if !v.is_finite() {
            issues.push(ValidationIssue::NonFinite { index });
        } else if v <= 0.0 {
            issues.push(ValidationIssue::NonPositive { index });
        }
    }
    if let Some(expected) = expected_len {
        if expected != series.values.len() {
            issues.push(ValidationIssue::LengthMismatch {
                expected,
                actual: series.values.len(),
            });
        }
    }
    if !(series.iteration_duration.is_finite() && series.iteration_duration > 0.0) {
        issues.push(ValidationIssue::InvalidIterationDuration);
    }
    ValidationReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn standardize_three_points() {
        let out = standardize_segment(&[1.0, 2.0, 3.0]).unwrap();
        // population sigma = sqrt(2/3); (1 - 2) / sqrt(2/3) = -sqrt(3/2)
        let z = (1.5f64).sqrt();
        assert!(!out.degenerate);
        assert!(close(out.values[0], -z, 1e-12));
        assert!(close(out.values[1], 0.0, 1e-12));
        assert!(close(out.values[2], z, 1e-12));
        assert!(close(out.values[2], 1.2247, 1e-4));
    }

    #[test]
    fn standardize_constant_is_degenerate_zeros() {
        let out = standardize_segment(&[5.0, 5.0, 5.0]).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.values, vec![0.0; 3]);
        let out = standardize_segment(&[0.1; 100]).unwrap();
        assert!(out.degenerate);
    }

    #[test]
    fn standardize_rejects_short_segments() {
        assert!(standardize_segment(&[1.0]).is_err());
        assert!(standardize_segment(&[]).is_err());
    }

    #[test]
    fn label_is_pure_function_of_start_and_st() {
        assert_eq!(Label::for_start(137, 137), Label::Stable);
        assert_eq!(Label::for_start(136, 137), Label::Unstable);
        assert_eq!(Label::for_start(1, 1), Label::Stable);
    }

    #[test]
    fn validate_reports_each_problem() {
        let id = BenchmarkId::new("p", "b", 0);
        let ok = MeasurementSeries::new(id.clone(), vec![1.0; 3000]);
        assert!(validate_series(&ok, Some(3000)).is_valid());

        let mut values = vec![1.0; 10];
        values[4] = f64::NAN;
        let report = validate_series(&MeasurementSeries::new(id.clone(), values), None);
        assert_eq!(report.issues, vec![ValidationIssue::NonFinite { index: 4 }]);

        let report = validate_series(&MeasurementSeries::new(id.clone(), vec![]), None);
        assert_eq!(report.issues, vec![ValidationIssue::Empty]);
        assert_eq!(report.issues[0].to_string(), "empty");

        let report = validate_series(&MeasurementSeries::new(id, vec![1.0, -2.0]), Some(3));
        assert_eq!(
            report.issues,
            vec![
                ValidationIssue::NonPositive { index: 1 },
                ValidationIssue::LengthMismatch { expected: 3, actual: 2 }
            ]
        );
    }

    #[test]
    fn annotation_serde_checks_consistency() {
        let a: SteadyStateAnnotation = serde_json::from_str(r#"{"st": 12}"#).unwrap();
        assert_eq!(a.st(), Some(12));
        assert!(a.reached());
        let b: SteadyStateAnnotation = serde_json::from_str(r#"{"st": null}"#).unwrap();
        assert!(!b.reached());
        assert!(serde_json::from_str::<SteadyStateAnnotation>(r#"{"st": 0}"#).is_err());
        assert!(
            serde_json::from_str::<SteadyStateAnnotation>(r#"{"st": 5, "reached": false}"#).is_err()
        );
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            r#"{"st":12,"reached":true}"#
        );
    }

    #[test]
    fn window_is_one_based() {
        let s = MeasurementSeries::new(BenchmarkId::new("p", "b", 0), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.window(2, 2), Some(&[2.0, 3.0][..]));
        assert_eq!(s.window(4, 2), None);
        assert_eq!(s.window(0, 1), None);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn segment() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-100.0f64..100.0, 2..64)
        }

        proptest! {
            #[test]
            fn standardized_has_zero_mean_unit_sd(values in segment()) {
                let out = standardize_segment(&values).unwrap();
                prop_assume!(!out.degenerate);
                let (m, s) = mean_std(&out.values);
                prop_assert!(m.abs() < 1e-9);
                prop_assert!((s - 1.0).abs() < 1e-9);
            }

            #[test]
            fn standardize_is_idempotent(values in segment()) {
                let once = standardize_segment(&values).unwrap();
                prop_assume!(!once.degenerate);
                let twice = standardize_segment(&once.values).unwrap();
                for (a, b) in once.values.iter().zip(&twice.values) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }

            #[test]
            fn standardize_is_affine_invariant(values in segment(), a in 0.01f64..100.0, b in -50.0f64..50.0) {
                let base = standardize_segment(&values).unwrap();
                prop_assume!(!base.degenerate);
                let shifted: Vec<f64> = values.iter().map(|v| a * v + b).collect();
                let out = standardize_segment(&shifted).unwrap();
                for (x, y) in base.values.iter().zip(&out.values) {
                    prop_assert!((x - y).abs() < 1e-6);
                }
            }
        }
    }
}
