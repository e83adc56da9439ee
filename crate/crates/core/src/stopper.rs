//! Sliding-window replay of dynamic warm-up stopping.
//!
//! The window starts at iteration 1 and shifts by one iteration per
//! unstable verdict. The warm-up estimate is the number of iterations before
//! the returned window, so a window starting at iteration `st` means an
//! estimate of `st - 1`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BenchmarkId, Label, MeasurementSeries};
use crate::error::{Error, Result};
use crate::io::FoldMap;
use crate::rocket::RocketModel;

/// Anything that can judge a raw measurement window.
pub trait WindowClassifier: Send + Sync {
    fn classify(&self, window: &[f64]) -> Result<Label>;
    fn descriptor(&self) -> String;
}

/// Adapts a closure into a [`WindowClassifier`].
pub struct FnClassifier<F> {
    name: String,
    f: F,
}

impl<F> FnClassifier<F>
where
    F: Fn(&[f64]) -> Label + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f }
    }
}

impl<F> WindowClassifier for FnClassifier<F>
where
    F: Fn(&[f64]) -> Label + Send + Sync,
{
    fn classify(&self, window: &[f64]) -> Result<Label> {
        Ok((self.f)(window))
    }

    fn descriptor(&self) -> String {
        self.name.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopConfig {
    pub window: usize,
    pub max_warmup_iterations: usize,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            window: 100,
            max_warmup_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    /// The classifier (or stability heuristic) declared the window stable.
    ModelStable,
    CapReached,
    SeriesExhausted,
    /// Warm-up count taken from a fixed configuration.
    FixedWarmup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopResult {
    pub warmup_iterations: usize,
    /// Values of iterations `warmup_iterations + 1 ..= warmup_iterations + len`.
    pub measurements: Vec<f64>,
    pub halt_reason: HaltReason,
    pub queries: usize,
}

impl StopResult {
    /// Builds a result whose window starts right after `warmup` iterations.
    pub(crate) fn at(series: &MeasurementSeries, warmup: usize, len: usize, reason: HaltReason, queries: usize) -> Self {
        let end = (warmup + len).min(series.len());
        Self {
            warmup_iterations: warmup,
            measurements: series.values[warmup.min(end)..end].to_vec(),
            halt_reason: reason,
            queries,
        }
    }
}

/// Replays the stopping loop on one series.
pub fn run_stopper(
    series: &MeasurementSeries,
    classifier: &dyn WindowClassifier,
    config: &StopConfig,
) -> Result<StopResult> {
    let w = config.window;
    if w < 2 {
        return Err(Error::InvalidInput("window must be >= 2".into()));
    }
    let n = series.len();
    if n < w {
        return Err(Error::InsufficientData(format!(
            "{}: {} values, window needs {}",
            series.id, n, w
        )));
    }
    let last_feasible = n - w;
    let cap = config.max_warmup_iterations;
    let mut queries = 0;
    for warmup in 0..=cap.min(last_feasible) {
        queries += 1;
        if classifier.classify(&series.values[warmup..warmup + w])? == Label::Stable {
            return Ok(StopResult::at(series, warmup, w, HaltReason::ModelStable, queries));
        }
    }
    if cap <= last_feasible {
        Ok(StopResult::at(series, cap, w, HaltReason::CapReached, queries))
    } else {
        Ok(StopResult::at(series, last_feasible, w, HaltReason::SeriesExhausted, queries))
    }
}

/// Cross-validated fold models plus the benchmark-to-fold map, resolving
/// each benchmark to the model that never saw it.
pub struct FoldModels {
    pub fold_map: FoldMap,
    pub models: Vec<RocketModel>,
}

impl FoldModels {
    pub fn model_path(dir: &Path, fold: usize) -> std::path::PathBuf {
        dir.join(format!("fold-{fold}.model"))
    }

    /// Loads `fold-<i>.model` for every fold named in `fold_map`.
    pub fn load(dir: &Path, fold_map: FoldMap, window: usize) -> Result<Self> {
        let k = fold_map.values().copied().max().map_or(0, |m| m + 1);
        let models = (0..k)
            .map(|f| {
                let path = Self::model_path(dir, f);
                if !path.exists() {
                    return Err(Error::MissingConfig(format!("fold model {}", path.display())));
                }
                RocketModel::load(&path, Some(window))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { fold_map, models })
    }

    pub fn classifier_for(&self, id: &BenchmarkId) -> Result<&RocketModel> {
        let key = id.key();
        let fold = *self
            .fold_map
            .get(&key)
            .ok_or_else(|| Error::MissingConfig(format!("fold for {key}")))?;
        let model = self
            .models
            .get(fold)
            .ok_or_else(|| Error::MissingConfig(format!("model for fold {fold}")))?;
        if model.held_out_fold != Some(fold) {
            return Err(Error::InvalidInput(format!(
                "model for fold {fold} was not trained with that fold held out ({:?})",
                model.held_out_fold
            )));
        }
        Ok(model)
    }
}

/// Replays every series in parallel with the classifier chosen by `select`.
pub fn run_corpus<'a, S>(corpus: &[MeasurementSeries], select: S, config: &StopConfig) -> Result<Vec<StopResult>>
where
    S: Fn(&BenchmarkId) -> Result<&'a dyn WindowClassifier> + Sync,
{
    corpus
        .par_iter()
        .map(|series| {
            let classifier = select(&series.id)?;
            log::debug!("{}: replay with {}", series.id, classifier.descriptor());
            run_stopper(series, classifier, config)
        })
        .collect()
}
