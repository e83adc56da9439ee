//! ROCKET classifier: random kernels, pooled features, ridge decision.

mod cv;
mod kernel;
mod ridge;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standardize_segment, Label, LabeledSegment};
use crate::error::{Error, Result};

pub use cv::{cross_validate, CvOutput, CvPrediction};
pub use kernel::{generate_kernels, transform, Kernel, KERNEL_LENGTHS};
pub use ridge::{
    default_alphas, fit_feature_stats, fit_ridge, log_grid, loo_errors, normalize, FeatureStat, RidgeFit,
    SCALE_FLOOR,
};

/// First line of every model file.
pub const MODEL_MAGIC: &str = "WARMSTOP-ROCKET";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RocketConfig {
    pub kernels: usize,
    pub seed: u64,
    pub alphas: Vec<f64>,
}

impl Default for RocketConfig {
    fn default() -> Self {
        Self {
            kernels: 500,
            seed: 0,
            alphas: default_alphas(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocketModel {
    pub window: usize,
    pub seed: u64,
    pub kernels: Vec<Kernel>,
    pub ridge: RidgeFit,
    /// Fold excluded from training, for cross-validated models.
    pub held_out_fold: Option<usize>,
}

/// Standardizes each segment and applies the kernel bank, one row per segment.
pub fn feature_matrix<'a, I>(segments: I, kernels: &[Kernel]) -> Result<DMatrix<f64>>
where
    I: IntoParallelIterator<Item = &'a [f64]>,
{
    let rows: Vec<Vec<f64>> = segments
        .into_par_iter()
        .map(|values| standardize_segment(values).map(|z| transform(&z.values, kernels)))
        .collect::<Result<_>>()?;
    let p = 2 * kernels.len();
    let n = rows.len();
    Ok(DMatrix::from_row_iterator(n, p, rows.into_iter().flatten()))
}

impl RocketModel {
    /// Generates kernels and fits the ridge classifier on `items`.
    pub fn train(items: &[LabeledSegment], config: &RocketConfig) -> Result<Self> {
        let window = items.first().ok_or(Error::EmptyDataset)?.segment.values.len();
        let kernels = generate_kernels(config.kernels, window, config.seed)?;
        let features = feature_matrix(items.par_iter().map(|i| i.segment.values.as_slice()), &kernels)?;
        let labels: Vec<Label> = items.iter().map(|i| i.label).collect();
        Self::fit(window, config, kernels, &features, &labels)
    }

    /// Fits on precomputed features produced by `kernels`.
    pub fn fit(
        window: usize,
        config: &RocketConfig,
        kernels: Vec<Kernel>,
        features: &DMatrix<f64>,
        labels: &[Label],
    ) -> Result<Self> {
        let ridge = fit_ridge(features, labels, &config.alphas)?;
        Ok(Self {
            window,
            seed: config.seed,
            kernels,
            ridge,
            held_out_fold: None,
        })
    }

    pub fn feature_len(&self) -> usize {
        2 * self.kernels.len()
    }

    /// Linear score of a raw window; positive means stable.
    pub fn score(&self, segment: &[f64]) -> Result<f64> {
        if segment.len() != self.window {
            return Err(Error::WindowMismatch {
                expected: self.window,
                actual: segment.len(),
            });
        }
        let z = standardize_segment(segment)?;
        Ok(self.ridge.score(&transform(&z.values, &self.kernels)))
    }

    /// Stable iff the score is strictly positive; ties resolve to unstable.
    pub fn predict(&self, segment: &[f64]) -> Result<Label> {
        self.score(segment).map(label_for_score)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomically(path, |out| self.write_to(out))
    }

    pub fn write_to(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}")?;
        serde_json::to_writer(&mut *out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// Loads a model, optionally checking it was built for `expected_window`.
    pub fn load(path: &Path, expected_window: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(BufReader::new(file), expected_window)
    }

    pub fn read_from(mut reader: impl BufRead, expected_window: Option<usize>) -> Result<Self> {
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let mut parts = header.trim_end().splitn(2, ' ');
        if parts.next() != Some(MODEL_MAGIC) {
            return Err(Error::ModelFormat("bad magic header".into()));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::ModelFormat("missing version".into()))?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {version} (expected {MODEL_VERSION})"
            )));
        }
        let model: RocketModel =
            serde_json::from_reader(reader).map_err(|e| Error::ModelFormat(format!("corrupt body: {e}")))?;
        model.check()?;
        if let Some(w) = expected_window {
            if w != model.window {
                return Err(Error::WindowMismatch {
                    expected: model.window,
                    actual: w,
                });
            }
        }
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let p = self.feature_len();
        if self.kernels.is_empty() || self.ridge.weights.len() != p || self.ridge.feature_stats.len() != p {
            return Err(Error::ModelFormat("inconsistent feature dimensions".into()));
        }
        if self.ridge.feature_stats.iter().any(|s| !(s.scale > 0.0)) {
            return Err(Error::ModelFormat("non-positive feature scale".into()));
        }
        if self.kernels.iter().any(|k| k.dilation == 0 || k.span() >= self.window + 2 * k.padding) {
            return Err(Error::ModelFormat("kernel does not fit the window".into()));
        }
        Ok(())
    }
}

pub fn label_for_score(score: f64) -> Label {
    if score > 0.0 {
        Label::Stable
    } else {
        Label::Unstable
    }
}

impl crate::stopper::WindowClassifier for RocketModel {
    fn classify(&self, window: &[f64]) -> Result<Label> {
        self.predict(window)
    }

    fn descriptor(&self) -> String {
        match self.held_out_fold {
            Some(f) => format!("rocket(k={}, seed={}, held_out_fold={f})", self.kernels.len(), self.seed),
            None => format!("rocket(k={}, seed={})", self.kernels.len(), self.seed),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::data::{BenchmarkId, Segment};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn toy_items(seed: u64, count: usize, window: usize) -> Vec<LabeledSegment> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                let unstable = i % 2 == 0;
                let warm = if unstable { rng.random_range(10..window / 2) } else { 0 };
                let values = (0..window)
                    .map(|t| {
                        let base = if t < warm { 2.0 } else { 1.0 };
                        base + rng.random_range(-0.02..0.02)
                    })
                    .collect();
                LabeledSegment {
                    segment: Segment {
                        source: BenchmarkId::new("p", format!("b{}", i % 7), 0),
                        start: 1,
                        values,
                    },
                    label: if unstable { Label::Unstable } else { Label::Stable },
                }
            })
            .collect()
    }

    fn small_model() -> (RocketModel, Vec<LabeledSegment>) {
        let items = toy_items(1, 80, 40);
        let config = RocketConfig {
            kernels: 40,
            seed: 9,
            ..Default::default()
        };
        (RocketModel::train(&items, &config).unwrap(), items)
    }

    #[test]
    fn learns_toy_problem() {
        let (model, _) = small_model();
        let held_out = toy_items(2, 60, 40);
        let correct = held_out
            .iter()
            .filter(|i| model.predict(&i.segment.values).unwrap() == i.label)
            .count();
        assert!(correct >= 55, "{correct}/60");
        assert_eq!(model.ridge.weights.len() + 1, 2 * 40 + 1);
        assert!(default_alphas().contains(&model.ridge.alpha));
    }

    #[test]
    fn score_sign_rule() {
        assert_eq!(label_for_score(0.7), Label::Stable);
        assert_eq!(label_for_score(0.0), Label::Unstable);
        assert_eq!(label_for_score(-0.0), Label::Unstable);
        assert_eq!(label_for_score(-1.0), Label::Unstable);
    }

    #[test]
    fn wrong_window_length() {
        let (model, _) = small_model();
        assert!(matches!(
            model.predict(&[1.0; 39]),
            Err(Error::WindowMismatch { expected: 40, actual: 39 })
        ));
    }

    #[test]
    fn save_load_roundtrip_is_bit_identical() {
        let (model, _) = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        model.save(&path).unwrap();
        let back = RocketModel::load(&path, Some(40)).unwrap();
        assert_eq!(back, model);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let seg: Vec<f64> = (0..40).map(|_| rng.random_range(0.5..3.0)).collect();
            assert_eq!(
                model.score(&seg).unwrap().to_bits(),
                back.score(&seg).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn load_rejects_bad_files() {
        let (model, _) = small_model();
        let dir = tempfile::tempdir().unwrap();

        let bad_magic = dir.path().join("a");
        std::fs::write(&bad_magic, "NOT-A-MODEL 1\n{}\n").unwrap();
        assert!(matches!(RocketModel::load(&bad_magic, None), Err(Error::ModelFormat(_))));

        let bad_version = dir.path().join("b");
        std::fs::write(&bad_version, format!("{MODEL_MAGIC} 99\n{{}}\n")).unwrap();
        let err = RocketModel::load(&bad_version, None).unwrap_err();
        assert!(err.to_string().contains("version"));

        let corrupt = dir.path().join("c");
        std::fs::write(&corrupt, format!("{MODEL_MAGIC} 1\n{{\"window\": 4")).unwrap();
        assert!(matches!(RocketModel::load(&corrupt, None), Err(Error::ModelFormat(_))));

        let good = dir.path().join("d");
        model.save(&good).unwrap();
        assert!(matches!(
            RocketModel::load(&good, Some(100)),
            Err(Error::WindowMismatch { .. })
        ));
    }

    #[test]
    fn constant_segment_is_classifiable() {
        let (model, _) = small_model();
        let s = model.score(&[3.0; 40]).unwrap();
        assert!(s.is_finite());
    }
}
