use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{feature_matrix, generate_kernels, label_for_score, RocketConfig, RocketModel};
use crate::data::{BenchmarkId, Label, SegmentDataset};
use crate::error::{Error, Result};

/// Held-out prediction for one dataset item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPrediction {
    pub project: String,
    pub benchmark: String,
    pub fork: u32,
    pub start: usize,
    pub fold: usize,
    pub truth: Label,
    pub predicted: Label,
    pub score: f64,
}

impl CvPrediction {
    pub fn id(&self) -> BenchmarkId {
        BenchmarkId::new(self.project.clone(), self.benchmark.clone(), self.fork)
    }
}

#[derive(Debug, Clone)]
pub struct CvOutput {
    /// `models[f]` was trained on every fold except `f`.
    pub models: Vec<RocketModel>,
    /// One prediction per dataset item, in dataset order.
    pub predictions: Vec<CvPrediction>,
}

/// Benchmark-grouped k-fold cross-validation.
///
/// All folds share one kernel bank drawn from `config.seed`, so features are
/// computed once.
pub fn cross_validate(dataset: &SegmentDataset, config: &RocketConfig) -> Result<CvOutput> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let folds: Vec<usize> = dataset
        .items
        .iter()
        .map(|item| {
            dataset.fold_of(item).ok_or_else(|| {
                Error::InvalidInput(format!("{} has no fold assignment", item.segment.source.key()))
            })
        })
        .collect::<Result<_>>()?;
    let k = dataset
        .fold_assignment
        .values()
        .copied()
        .max()
        .map_or(0, |m| m + 1);
    for f in 0..k {
        if !folds.contains(&f) {
            return Err(Error::EmptyFold(f));
        }
    }

    let window = dataset.window().unwrap_or(0);
    let kernels = generate_kernels(config.kernels, window, config.seed)?;
    let features = feature_matrix(
        dataset.items.par_iter().map(|i| i.segment.values.as_slice()),
        &kernels,
    )?;
    let labels: Vec<Label> = dataset.items.iter().map(|i| i.label).collect();

    let mut models = Vec::with_capacity(k);
    let mut predictions: Vec<Option<CvPrediction>> = vec![None; dataset.len()];
    for fold in 0..k {
        let train: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != fold).collect();
        let test: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == fold).collect();
        log::info!("fold {fold}: {} train / {} test segments", train.len(), test.len());

        let train_x: DMatrix<f64> = features.select_rows(&train);
        let train_y: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
        let mut model = RocketModel::fit(window, config, kernels.clone(), &train_x, &train_y)?;
        drop(train_x);
        model.held_out_fold = Some(fold);

        for &i in &test {
            let row: Vec<f64> = features.row(i).iter().copied().collect();
            let score = model.ridge.score(&row);
            let source = &dataset.items[i].segment.source;
            predictions[i] = Some(CvPrediction {
                project: source.project.clone(),
                benchmark: source.benchmark.clone(),
                fork: source.fork,
                start: dataset.items[i].segment.start,
                fold,
                truth: labels[i],
                predicted: label_for_score(score),
                score,
            });
        }
        models.push(model);
    }
    Ok(CvOutput {
        models,
        predictions: predictions.into_iter().map(|p| p.expect("every item is in one fold")).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rocket::tests::toy_items;
    use crate::segmentation::{assign_folds, SamplingConfig};

    #[test]
    fn folds_partition_predictions() {
        let dataset = SegmentDataset::new(toy_items(3, 140, 40));
        let dataset = assign_folds(dataset, &SamplingConfig { window: 40, ..Default::default() }).unwrap();
        let config = RocketConfig { kernels: 30, seed: 1, ..Default::default() };
        let out = cross_validate(&dataset, &config).unwrap();
        assert_eq!(out.models.len(), 5);
        assert_eq!(out.predictions.len(), dataset.len());
        for (p, item) in out.predictions.iter().zip(&dataset.items) {
            assert_eq!(dataset.fold_assignment[&item.segment.source.key()], p.fold);
            assert_eq!(out.models[p.fold].held_out_fold, Some(p.fold));
        }
        // deterministic
        let again = cross_validate(&dataset, &config).unwrap();
        assert_eq!(again.predictions, out.predictions);
    }

    #[test]
    fn missing_fold_is_an_error() {
        let mut dataset = SegmentDataset::new(toy_items(3, 40, 40));
        dataset = assign_folds(dataset, &SamplingConfig { window: 40, ..Default::default() }).unwrap();
        let key = dataset.fold_assignment.keys().next().unwrap().clone();
        let victim = dataset.fold_assignment[&key];
        let keys: Vec<_> = dataset
            .fold_assignment
            .iter()
            .filter(|(_, &f)| f == victim)
            .map(|(k, _)| k.clone())
            .collect();
        dataset.items.retain(|i| !keys.contains(&i.segment.source.key()));
        let err = cross_validate(&dataset, &RocketConfig { kernels: 10, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::EmptyFold(f) if f == victim));
    }
}
