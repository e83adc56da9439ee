//! Labeled segment sampling and benchmark-grouped fold assignment.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    BenchmarkId, BenchmarkKey, Label, LabeledSegment, MeasurementSeries, Segment, SegmentDataset,
    SteadyStateAnnotation,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub window: usize,
    pub per_class_per_series: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            window: 100,
            per_class_per_series: 50,
            folds: 5,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidInput("window must be >= 2".into()));
        }
        if self.per_class_per_series < 1 {
            return Err(Error::InvalidInput("per_class_per_series must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidInput("folds must be >= 2".into()));
        }
        Ok(())
    }
}

/// Step sizes `(unstable, stable)` for a series of length `n` reaching steady
/// state at `st`: `floor((st - 1) / k)` and `floor((n - st) / k)`.
pub fn step_sizes(n: usize, st: usize, per_class: usize) -> (usize, usize) {
    ((st - 1) / per_class, (n - st) / per_class)
}

/// Equidistant starts from `first`, at most `count`, each satisfying `admit`.
/// A zero step degrades to one start per distinct position.
fn evenly_spaced(first: usize, step: usize, count: usize, admit: impl Fn(usize) -> bool) -> Vec<usize> {
    let step = step.max(1);
    (0..count)
        .map(|i| first + i * step)
        .take_while(|&s| admit(s))
        .collect()
}

/// Samples up to `per_class_per_series` segments of each class from one series.
pub fn sample_segments(
    series: &MeasurementSeries,
    annotation: &SteadyStateAnnotation,
    config: &SamplingConfig,
) -> Result<Vec<LabeledSegment>> {
    config.validate()?;
    let st = annotation
        .st()
        .ok_or_else(|| Error::NoSteadyState(series.id.to_string()))?;
    let n = series.len();
    if st > n {
        return Err(Error::InvalidInput(format!(
            "{}: st {} beyond series length {}",
            series.id, st, n
        )));
    }
    let w = config.window;
    let k = config.per_class_per_series;
    let (step_u, step_s) = step_sizes(n, st, k);
    let fits = |s: usize| s + w - 1 <= n;

    let unstable = evenly_spaced(1, step_u, k, |s| s < st && fits(s));
    let stable = evenly_spaced(st, step_s, k, fits);

    let cut = |start: usize, label: Label| LabeledSegment {
        segment: Segment {
            source: series.id.clone(),
            start,
            values: series.values[start - 1..start - 1 + w].to_vec(),
        },
        label,
    };
    Ok(unstable
        .into_iter()
        .map(|s| cut(s, Label::Unstable))
        .chain(stable.into_iter().map(|s| cut(s, Label::Stable)))
        .collect())
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct BuildReport {
    pub series_used: usize,
    pub missing_annotation: Vec<BenchmarkId>,
    pub not_reached: Vec<BenchmarkId>,
}

impl BuildReport {
    pub fn warnings(&self) -> usize {
        self.missing_annotation.len() + self.not_reached.len()
    }
}

/// Concatenates per-series samples; unannotated and never-steady series are skipped.
pub fn build_dataset(
    corpus: &[MeasurementSeries],
    annotations: &BTreeMap<BenchmarkId, SteadyStateAnnotation>,
    config: &SamplingConfig,
) -> Result<(SegmentDataset, BuildReport)> {
    config.validate()?;
    let mut report = BuildReport::default();
    let mut items = Vec::new();
    for series in corpus {
        match annotations.get(&series.id) {
            None => {
                log::warn!("{}: no annotation, skipped", series.id);
                report.missing_annotation.push(series.id.clone());
            }
            Some(a) if !a.reached() => report.not_reached.push(series.id.clone()),
            Some(a) => {
                items.extend(sample_segments(series, a, config)?);
                report.series_used += 1;
            }
        }
    }
    Ok((SegmentDataset::new(items), report))
}

/// Maps every benchmark in the dataset to a fold, stratified by project.
///
/// Benchmarks of each project are shuffled with the configured seed and dealt
/// round-robin; the dealing position carries over between projects so overall
/// fold sizes stay balanced too.
pub fn assign_folds(mut dataset: SegmentDataset, config: &SamplingConfig) -> Result<SegmentDataset> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut by_project: BTreeMap<String, BTreeSet<BenchmarkKey>> = BTreeMap::new();
    for item in &dataset.items {
        let key = item.segment.source.key();
        by_project.entry(key.project.clone()).or_default().insert(key);
    }
    let total: usize = by_project.values().map(BTreeSet::len).sum();
    if total < config.folds {
        return Err(Error::InvalidInput(format!(
            "{total} benchmarks cannot fill {} folds",
            config.folds
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for benchmarks in by_project.into_values() {
        let mut benchmarks: Vec<BenchmarkKey> = benchmarks.into_iter().collect();
        benchmarks.shuffle(&mut rng);
        for key in benchmarks {
            assignment.insert(key, next % config.folds);
            next += 1;
        }
    }
    dataset.fold_assignment = assignment;
    Ok(dataset)
}

/// Items whose recorded label or position disagrees with the annotations.
pub fn label_violations(
    dataset: &SegmentDataset,
    annotations: &BTreeMap<BenchmarkId, SteadyStateAnnotation>,
) -> Vec<(BenchmarkId, usize)> {
    dataset
        .items
        .iter()
        .filter(|item| {
            let seg = &item.segment;
            match annotations.get(&seg.source).and_then(|a| a.st()) {
                Some(st) => Label::for_start(seg.start, st) != item.label,
                None => true,
            }
        })
        .map(|item| (item.segment.source.clone(), item.segment.start))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize, fork: u32) -> MeasurementSeries {
        MeasurementSeries::new(
            BenchmarkId::new("p", "b", fork),
            (1..=n).map(|i| i as f64).collect(),
        )
    }

    #[test]
    fn reference_step_sizes() {
        assert_eq!(step_sizes(3000, 1001, 50), (20, 39));
    }

    #[test]
    fn samples_follow_arithmetic_progressions() {
        let s = series(3000, 0);
        let segs = sample_segments(&s, &SteadyStateAnnotation::reached_at(1001), &SamplingConfig::default()).unwrap();
        let unstable: Vec<usize> = segs.iter().filter(|x| x.label == Label::Unstable).map(|x| x.segment.start).collect();
        let stable: Vec<usize> = segs.iter().filter(|x| x.label == Label::Stable).map(|x| x.segment.start).collect();
        assert_eq!(unstable.len(), 50);
        assert_eq!(unstable[..3], [1, 21, 41]);
        assert_eq!(*unstable.last().unwrap(), 1 + 49 * 20);
        assert_eq!(stable[..2], [1001, 1040]);
        // 1001 + 39 i + 99 <= 3000  =>  i <= 48
        assert_eq!(stable.len(), 49);
        for seg in &segs {
            assert_eq!(seg.segment.values.len(), 100);
            assert_eq!(seg.segment.values[0], seg.segment.start as f64);
        }
    }

    #[test]
    fn empty_warmup_gives_only_stable() {
        let segs = sample_segments(&series(3000, 0), &SteadyStateAnnotation::reached_at(1), &SamplingConfig::default()).unwrap();
        assert_eq!(segs.len(), 50);
        assert!(segs.iter().all(|s| s.label == Label::Stable));
    }

    #[test]
    fn short_warmup_uses_each_start_once() {
        let segs = sample_segments(&series(3000, 0), &SteadyStateAnnotation::reached_at(31), &SamplingConfig::default()).unwrap();
        let unstable: Vec<usize> = segs.iter().filter(|x| x.label == Label::Unstable).map(|x| x.segment.start).collect();
        assert_eq!(unstable, (1..31).collect::<Vec<_>>());
    }

    #[test]
    fn unreached_is_an_error() {
        let err = sample_segments(&series(300, 0), &SteadyStateAnnotation::not_reached(), &SamplingConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoSteadyState(_)));
    }

    #[test]
    fn build_dataset_is_additive_and_skips() {
        let corpus = vec![series(3000, 0), series(3000, 1), series(3000, 2)];
        let mut ann = BTreeMap::new();
        ann.insert(corpus[0].id.clone(), SteadyStateAnnotation::reached_at(1001));
        ann.insert(corpus[1].id.clone(), SteadyStateAnnotation::reached_at(1001));
        let (ds, report) = build_dataset(&corpus, &ann, &SamplingConfig::default()).unwrap();
        assert_eq!(ds.len(), 2 * 99);
        assert_eq!(report.missing_annotation, vec![corpus[2].id.clone()]);
        assert!(label_violations(&ds, &ann).is_empty());

        let mut none = BTreeMap::new();
        for s in &corpus {
            none.insert(s.id.clone(), SteadyStateAnnotation::not_reached());
        }
        let (ds, report) = build_dataset(&corpus, &none, &SamplingConfig::default()).unwrap();
        assert!(ds.is_empty());
        assert_eq!(report.warnings(), 3);
    }

    fn dataset_of(project_sizes: &[(&str, usize)]) -> SegmentDataset {
        let items = project_sizes
            .iter()
            .flat_map(|&(project, count)| {
                (0..count).map(move |b| LabeledSegment {
                    segment: Segment {
                        source: BenchmarkId::new(project, format!("bench{b}"), 0),
                        start: 1,
                        values: vec![1.0, 2.0],
                    },
                    label: Label::Stable,
                })
            })
            .collect();
        SegmentDataset::new(items)
    }

    fn per_fold(ds: &SegmentDataset, project: &str, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for (key, &f) in &ds.fold_assignment {
            if key.project == project {
                counts[f] += 1;
            }
        }
        counts
    }

    #[test]
    fn even_split_within_project() {
        let ds = assign_folds(dataset_of(&[("a", 10)]), &SamplingConfig::default()).unwrap();
        assert_eq!(per_fold(&ds, "a", 5), vec![2; 5]);
    }

    #[test]
    fn uneven_projects_differ_by_at_most_one() {
        let ds = assign_folds(dataset_of(&[("a", 7), ("b", 3), ("c", 12)]), &SamplingConfig::default()).unwrap();
        for p in ["a", "b", "c"] {
            let c = per_fold(&ds, p, 5);
            assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1, "{p}: {c:?}");
        }
        assert!(per_fold(&ds, "a", 5).iter().all(|&c| c == 1 || c == 2));
    }

    #[test]
    fn fold_assignment_is_seeded() {
        let cfg = SamplingConfig { seed: 42, ..Default::default() };
        let a = assign_folds(dataset_of(&[("a", 20)]), &cfg).unwrap();
        let b = assign_folds(dataset_of(&[("a", 20)]), &cfg).unwrap();
        assert_eq!(a.fold_assignment, b.fold_assignment);
        let c = assign_folds(dataset_of(&[("a", 20)]), &SamplingConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.fold_assignment, c.fold_assignment);
    }

    #[test]
    fn too_few_benchmarks_for_folds() {
        assert!(assign_folds(dataset_of(&[("a", 4)]), &SamplingConfig::default()).is_err());
        assert!(matches!(
            assign_folds(SegmentDataset::default(), &SamplingConfig::default()),
            Err(Error::EmptyDataset)
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn labels_and_progressions_hold(n in 120usize..1500, st_frac in 0.0f64..1.0, w in 2usize..100, k in 1usize..60) {
                let st = 1 + ((n - w) as f64 * st_frac) as usize;
                let s = series(n, 0);
                let cfg = SamplingConfig { window: w, per_class_per_series: k, ..Default::default() };
                let segs = sample_segments(&s, &SteadyStateAnnotation::reached_at(st), &cfg).unwrap();
                prop_assert!(segs.len() <= 2 * k);
                let (su, ss) = step_sizes(n, st, k);
                for (label, step) in [(Label::Unstable, su), (Label::Stable, ss)] {
                    let starts: Vec<usize> = segs.iter().filter(|x| x.label == label).map(|x| x.segment.start).collect();
                    for pair in starts.windows(2) {
                        prop_assert_eq!(pair[1] - pair[0], step.max(1));
                    }
                }
                for seg in &segs {
                    prop_assert_eq!(seg.label, Label::for_start(seg.segment.start, st));
                    prop_assert!(seg.segment.start + w - 1 <= n);
                    prop_assert_eq!(seg.segment.values.len(), w);
                }
            }
        }
    }
}
