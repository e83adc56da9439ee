use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// Warm-up estimation error in seconds. The estimated window starts at
/// iteration `estimated_warmup + 1`.
pub fn wee(estimated_warmup: usize, st: usize, iteration_duration: f64) -> f64 {
    (estimated_warmup + 1).abs_diff(st) as f64 * iteration_duration
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationCategory {
    Underestimate,
    Overestimate,
    ExactMatch,
}

pub fn estimation_category(estimated_warmup: usize, st: usize) -> EstimationCategory {
    use std::cmp::Ordering::*;
    match (estimated_warmup + 1).cmp(&st) {
        Less => EstimationCategory::Underestimate,
        Equal => EstimationCategory::ExactMatch,
        Greater => EstimationCategory::Overestimate,
    }
}

/// Seconds spent on warm-up plus measurement across `forks` forks.
pub fn testing_time(warmup_iterations: usize, measurement_iterations: usize, iteration_duration: f64, forks: usize) -> f64 {
    (warmup_iterations + measurement_iterations) as f64 * iteration_duration * forks as f64
}

/// Stable is the positive class. Cells whose denominator is zero are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub recall_unstable: Option<f64>,
    pub f1: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn classification_metrics(predictions: &[Label], truths: &[Label]) -> Result<ClassificationMetrics> {
    if predictions.len() != truths.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut tp, mut fp, mut tn, mut fneg) = (0, 0, 0, 0);
    for (p, t) in predictions.iter().zip(truths) {
        match (p, t) {
            (Label::Stable, Label::Stable) => tp += 1,
            (Label::Stable, Label::Unstable) => fp += 1,
            (Label::Unstable, Label::Unstable) => tn += 1,
            (Label::Unstable, Label::Stable) => fneg += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let recall_unstable = ratio(tn, tn + fp);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let balanced_accuracy = match (recall, recall_unstable) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        _ => None,
    };
    Ok(ClassificationMetrics {
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fneg,
        precision,
        recall,
        recall_unstable,
        f1,
        balanced_accuracy,
    })
}
