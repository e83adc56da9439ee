//! Corpus-level evaluation of replay results and the comparison tables built
//! from it.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    bootstrap_replicate_means, compare_outcome, estimation_category, median, rank_biserial, ratio_ci_from_replicates,
    relative_deviation, vargha_delaney_a12, wee, wilcoxon_signed_rank, ClassificationMetrics, ComparisonCategory,
    EstimationCategory, RatioCI, MIN_RESAMPLES,
};
use crate::baselines::SopConfig;
use crate::data::{BenchmarkId, BenchmarkKey, Label, MeasurementSeries};
use crate::error::{Error, Result};
use crate::io::{Annotations, StopRecord};
use crate::rocket::CvPrediction;

/// How many measurement iterations a method returns after warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementLen {
    Window(usize),
    /// The benchmark's configured measurement iteration count.
    Sop,
}

#[derive(Debug, Clone)]
pub struct MethodRecords {
    pub name: String,
    pub records: Vec<StopRecord>,
    pub measurement: MeasurementLen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub alpha: f64,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            resamples: 10_000,
            seed: 0,
        }
    }
}

pub const NOT_DIFFERENT: &str = "not_different";
pub const DIFFERENT: &str = "different";

/// One method on one benchmark. `category` is the measurement-deviation
/// verdict: whether the ratio CI against the steady state includes 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: String,
    pub project: String,
    pub benchmark: String,
    pub forks: usize,
    pub wee_s: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub rel_dev_pct: f64,
    pub testing_time_s: f64,
    pub category: String,
    pub alpha: f64,
    pub resamples: usize,
}

impl BenchmarkRow {
    pub fn key(&self) -> BenchmarkKey {
        BenchmarkKey {
            project: self.project.clone(),
            benchmark: self.benchmark.clone(),
        }
    }

    pub fn ci(&self) -> RatioCI {
        RatioCI {
            lower: self.ci_lower,
            upper: self.ci_upper,
            center: self.ci_lower + (self.ci_upper - self.ci_lower) / 2.0,
            alpha: self.alpha,
            resamples: self.resamples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub method: String,
    pub project: String,
    pub benchmark: String,
    pub fork: u32,
    pub st: usize,
    pub warmup_iterations: usize,
    pub wee_s: f64,
    pub estimation: EstimationCategory,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationReport {
    pub benchmarks: Vec<BenchmarkRow>,
    pub series: Vec<SeriesRow>,
}

struct Reached<'a> {
    series: &'a MeasurementSeries,
    st: usize,
}

/// Evaluates every method on every benchmark with at least one fork that
/// reaches a steady state.
///
/// The measurement set M of a method pools the returned windows of the first
/// `forks` reached forks (SOP fork count, or all reached forks without a SOP
/// table). The steady-state reference M* pools iterations `st..=n` of every
/// reached fork. The M* bootstrap replicates are drawn once per benchmark
/// and paired with each method's own M replicates.
pub fn evaluate(
    corpus: &[MeasurementSeries],
    annotations: &Annotations,
    sop: Option<&SopConfig>,
    methods: &[MethodRecords],
    config: &EvalConfig,
) -> Result<EvaluationReport> {
    if config.resamples < MIN_RESAMPLES {
        return Err(Error::InvalidInput(format!("at least {MIN_RESAMPLES} resamples required")));
    }
    if methods.iter().any(|m| m.measurement == MeasurementLen::Sop) && sop.is_none() {
        return Err(Error::MissingConfig("SOP table for a fixed-warm-up method".into()));
    }
    let mut by_key: BTreeMap<BenchmarkKey, Vec<Reached>> = BTreeMap::new();
    for series in corpus {
        match annotations.get(&series.id).and_then(|a| a.st()) {
            Some(st) => by_key.entry(series.id.key()).or_default().push(Reached { series, st }),
            None => log::debug!("{}: no steady state, excluded from evaluation", series.id),
        }
    }
    for forks in by_key.values_mut() {
        forks.sort_by_key(|r| r.series.id.fork);
    }
    let lookups: Vec<BTreeMap<BenchmarkId, &StopRecord>> = methods
        .iter()
        .map(|m| m.records.iter().map(|r| (r.id(), r)).collect())
        .collect();

    let parts: Vec<EvaluationReport> = by_key
        .par_iter()
        .map(|(key, reached)| evaluate_benchmark(key, reached, sop, methods, &lookups, config))
        .collect::<Result<_>>()?;
    let mut report = EvaluationReport::default();
    for part in parts {
        report.benchmarks.extend(part.benchmarks);
        report.series.extend(part.series);
    }
    report
        .benchmarks
        .sort_by(|a, b| (&a.method, &a.project, &a.benchmark).cmp(&(&b.method, &b.project, &b.benchmark)));
    report.series.sort_by(|a, b| {
        (&a.method, &a.project, &a.benchmark, a.fork).cmp(&(&b.method, &b.project, &b.benchmark, b.fork))
    });
    Ok(report)
}

fn evaluate_benchmark(
    key: &BenchmarkKey,
    reached: &[Reached],
    sop: Option<&SopConfig>,
    methods: &[MethodRecords],
    lookups: &[BTreeMap<BenchmarkId, &StopRecord>],
    config: &EvalConfig,
) -> Result<EvaluationReport> {
    let sop_entry = sop.and_then(|s| s.entries.get(key));
    let fork_limit = match sop_entry {
        Some(e) if e.forks > 0 => e.forks.min(reached.len()),
        _ => reached.len(),
    };
    let m_star: Vec<Vec<f64>> = reached.iter().map(|r| r.series.values[r.st - 1..].to_vec()).collect();
    let star_seed = crate::seed::derive_for(config.seed, crate::seed::stages::BOOTSTRAP, &format!("{key}/steady"));
    let star_reps = bootstrap_replicate_means(&m_star, config.resamples, star_seed)?;

    let mut out = EvaluationReport::default();
    for (method, lookup) in methods.iter().zip(lookups) {
        let len = match method.measurement {
            MeasurementLen::Window(w) => w,
            MeasurementLen::Sop => sop.expect("checked above").get(key)?.measurement_iterations,
        };
        let mut m = Vec::with_capacity(fork_limit);
        let mut weesum = 0.0;
        let mut time = 0.0;
        for (i, r) in reached.iter().enumerate() {
            let record = lookup
                .get(&r.series.id)
                .ok_or_else(|| Error::MissingConfig(format!("{} result for {}", method.name, r.series.id)))?;
            let warmup = record.warmup_iterations;
            let dur = r.series.iteration_duration;
            let e = wee(warmup, r.st, dur);
            out.series.push(SeriesRow {
                method: method.name.clone(),
                project: key.project.clone(),
                benchmark: key.benchmark.clone(),
                fork: r.series.id.fork,
                st: r.st,
                warmup_iterations: warmup,
                wee_s: e,
                estimation: estimation_category(warmup, r.st),
            });
            if i < fork_limit {
                let values = r.series.values.get(warmup..warmup + len).ok_or_else(|| {
                    Error::InsufficientData(format!(
                        "{}: {} result needs iterations {}..={}",
                        r.series.id,
                        method.name,
                        warmup + 1,
                        warmup + len
                    ))
                })?;
                if values.is_empty() {
                    return Err(Error::InsufficientData(format!("{}: empty measurement set", r.series.id)));
                }
                m.push(values.to_vec());
                weesum += e;
                time += super::testing_time(warmup, len, dur, 1);
            }
        }
        let seed = crate::seed::derive_for(
            config.seed,
            crate::seed::stages::BOOTSTRAP,
            &format!("{key}/{}", method.name),
        );
        let reps = bootstrap_replicate_means(&m, config.resamples, seed)?;
        let ci = ratio_ci_from_replicates(&reps, &star_reps, config.alpha)?;
        out.benchmarks.push(BenchmarkRow {
            method: method.name.clone(),
            project: key.project.clone(),
            benchmark: key.benchmark.clone(),
            forks: fork_limit,
            wee_s: weesum / fork_limit as f64,
            ci_lower: ci.lower,
            ci_upper: ci.upper,
            rel_dev_pct: relative_deviation(&ci),
            testing_time_s: time,
            category: if ci.includes_one() { NOT_DIFFERENT } else { DIFFERENT }.to_string(),
            alpha: ci.alpha,
            resamples: ci.resamples,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub baseline: String,
    pub project: String,
    pub benchmark: String,
    pub category: ComparisonCategory,
    pub framework_rel_dev_pct: f64,
    pub baseline_rel_dev_pct: f64,
    pub framework_time_s: f64,
    pub baseline_time_s: f64,
}

/// Share of benchmarks per outcome, against one baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityTimeRow {
    pub baseline: String,
    pub benchmarks: usize,
    pub improved_quality_pct: f64,
    pub regressed_quality_pct: f64,
    pub net_quality_pct: f64,
    pub improved_time_pct: f64,
    pub regressed_time_pct: f64,
    pub net_time_pct: f64,
    pub median_rel_dev_framework_pct: Option<f64>,
    pub median_rel_dev_baseline_pct: Option<f64>,
    pub median_time_framework_s: Option<f64>,
    pub median_time_baseline_s: Option<f64>,
}

/// Paired WEE comparison; positive differences favor the framework.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeRow {
    pub baseline: String,
    pub pairs: usize,
    pub median_wee_framework_s: Option<f64>,
    pub median_wee_baseline_s: Option<f64>,
    pub wilcoxon_p: Option<f64>,
    pub a12: Option<f64>,
    pub rank_biserial: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRow {
    pub method: String,
    pub series: usize,
    pub overestimate_pct: f64,
    pub underestimate_pct: f64,
    pub exact_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub model: String,
    pub segments: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompareReport {
    pub outcomes: Vec<OutcomeRow>,
    pub quality_time: Vec<QualityTimeRow>,
    pub wee: Vec<WeeRow>,
    pub estimation: Vec<EstimationRow>,
}

fn pct(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// Compares `framework` against every other method in the rows.
pub fn compare_reports(benchmarks: &[BenchmarkRow], series: &[SeriesRow], framework: &str) -> Result<CompareReport> {
    let methods: BTreeSet<&str> = benchmarks.iter().map(|r| r.method.as_str()).collect();
    if !methods.contains(framework) {
        return Err(Error::InvalidInput(format!("no rows for framework method {framework:?}")));
    }
    let bench_of = |method: &str| -> BTreeMap<BenchmarkKey, &BenchmarkRow> {
        benchmarks.iter().filter(|r| r.method == method).map(|r| (r.key(), r)).collect()
    };
    let series_of = |method: &str| -> BTreeMap<(String, String, u32), f64> {
        series
            .iter()
            .filter(|r| r.method == method)
            .map(|r| ((r.project.clone(), r.benchmark.clone(), r.fork), r.wee_s))
            .collect()
    };
    let fw_bench = bench_of(framework);
    let fw_series = series_of(framework);

    let mut report = CompareReport::default();
    for baseline in methods.iter().copied().filter(|m| *m != framework) {
        let base_bench = bench_of(baseline);
        let mut counts: BTreeMap<ComparisonCategory, usize> = BTreeMap::new();
        let (mut fw_dev, mut base_dev, mut fw_time, mut base_time) = (vec![], vec![], vec![], vec![]);
        let mut compared = 0;
        for (key, fw) in &fw_bench {
            let Some(base) = base_bench.get(key) else { continue };
            compared += 1;
            let outcome = compare_outcome((fw.ci(), fw.testing_time_s), (base.ci(), base.testing_time_s));
            *counts.entry(outcome.category).or_default() += 1;
            fw_dev.push(fw.rel_dev_pct);
            base_dev.push(base.rel_dev_pct);
            fw_time.push(fw.testing_time_s);
            base_time.push(base.testing_time_s);
            report.outcomes.push(OutcomeRow {
                baseline: baseline.to_string(),
                project: key.project.clone(),
                benchmark: key.benchmark.clone(),
                category: outcome.category,
                framework_rel_dev_pct: fw.rel_dev_pct,
                baseline_rel_dev_pct: base.rel_dev_pct,
                framework_time_s: fw.testing_time_s,
                baseline_time_s: base.testing_time_s,
            });
        }
        let c = |cat| counts.get(&cat).copied().unwrap_or(0);
        use ComparisonCategory::*;
        report.quality_time.push(QualityTimeRow {
            baseline: baseline.to_string(),
            benchmarks: compared,
            improved_quality_pct: pct(c(ImprovedQuality), compared),
            regressed_quality_pct: pct(c(RegressedQuality), compared),
            net_quality_pct: pct(c(ImprovedQuality), compared) - pct(c(RegressedQuality), compared),
            improved_time_pct: pct(c(ImprovedTime), compared),
            regressed_time_pct: pct(c(RegressedTime), compared),
            net_time_pct: pct(c(ImprovedTime), compared) - pct(c(RegressedTime), compared),
            median_rel_dev_framework_pct: median(&fw_dev),
            median_rel_dev_baseline_pct: median(&base_dev),
            median_time_framework_s: median(&fw_time),
            median_time_baseline_s: median(&base_time),
        });

        let base_series = series_of(baseline);
        let (mut a, mut b) = (vec![], vec![]);
        for (k, fw) in &fw_series {
            if let Some(base) = base_series.get(k) {
                a.push(*fw);
                b.push(*base);
            }
        }
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
        report.wee.push(WeeRow {
            baseline: baseline.to_string(),
            pairs: a.len(),
            median_wee_framework_s: median(&a),
            median_wee_baseline_s: median(&b),
            wilcoxon_p: wilcoxon_signed_rank(&diffs).ok(),
            a12: vargha_delaney_a12(&a, &b).ok(),
            rank_biserial: rank_biserial(&diffs).ok(),
        });
    }
    report.estimation = estimation_table(series);
    Ok(report)
}

/// Over/under/exact shares of warm-up estimates per method.
pub fn estimation_table(series: &[SeriesRow]) -> Vec<EstimationRow> {
    let mut by_method: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    for r in series {
        let slot = match r.estimation {
            EstimationCategory::Overestimate => 0,
            EstimationCategory::Underestimate => 1,
            EstimationCategory::ExactMatch => 2,
        };
        by_method.entry(&r.method).or_default()[slot] += 1;
    }
    by_method
        .into_iter()
        .map(|(method, c)| {
            let n = c.iter().sum();
            EstimationRow {
                method: method.to_string(),
                series: n,
                overestimate_pct: pct(c[0], n),
                underestimate_pct: pct(c[1], n),
                exact_pct: pct(c[2], n),
            }
        })
        .collect()
}

pub fn classification_table(model: &str, predictions: &[CvPrediction]) -> Result<ClassificationRow> {
    let preds: Vec<Label> = predictions.iter().map(|p| p.predicted).collect();
    let truths: Vec<Label> = predictions.iter().map(|p| p.truth).collect();
    let m: ClassificationMetrics = super::classification_metrics(&preds, &truths)?;
    Ok(ClassificationRow {
        model: model.to_string(),
        segments: predictions.len(),
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        balanced_accuracy: m.balanced_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::SopEntry;
    use crate::data::SteadyStateAnnotation;
    use crate::stopper::HaltReason;

    fn corpus() -> (Vec<MeasurementSeries>, Annotations) {
        let mut corpus = vec![];
        let mut ann = Annotations::new();
        for fork in 0..3 {
            let id = BenchmarkId::new("p", "b", fork);
            let values: Vec<f64> = (1..=400)
                .map(|i| if i < 101 { 2.0 } else { 1.0 + 0.01 * ((i * 37 + fork as usize) % 7) as f64 })
                .collect();
            corpus.push(MeasurementSeries::new(id.clone(), values));
            ann.insert(id, SteadyStateAnnotation::reached_at(101));
        }
        let id = BenchmarkId::new("p", "never", 0);
        corpus.push(MeasurementSeries::new(id.clone(), vec![1.0; 400]));
        ann.insert(id, SteadyStateAnnotation::not_reached());
        (corpus, ann)
    }

    fn records(warmup: usize) -> Vec<StopRecord> {
        (0..3)
            .map(|f| StopRecord {
                project: "p".into(),
                benchmark: "b".into(),
                fork: f,
                warmup_iterations: warmup,
                halt_reason: HaltReason::ModelStable,
                queries: warmup + 1,
            })
            .collect()
    }

    #[test]
    fn early_stop_deviates_and_exact_stop_does_not() {
        let (corpus, ann) = corpus();
        let mut sop = SopConfig::default();
        sop.entries.insert(
            BenchmarkKey { project: "p".into(), benchmark: "b".into() },
            SopEntry { warmup_iterations: 20, measurement_iterations: 50, forks: 2 },
        );
        let methods = vec![
            MethodRecords { name: "model".into(), records: records(100), measurement: MeasurementLen::Window(100) },
            MethodRecords { name: "sop".into(), records: records(20), measurement: MeasurementLen::Sop },
        ];
        let cfg = EvalConfig { resamples: 1000, ..Default::default() };
        let report = evaluate(&corpus, &ann, Some(&sop), &methods, &cfg).unwrap();
        assert_eq!(report.benchmarks.len(), 2);
        assert_eq!(report.series.len(), 6);
        let model = &report.benchmarks[0];
        let base = &report.benchmarks[1];
        assert_eq!((model.method.as_str(), base.method.as_str()), ("model", "sop"));
        assert_eq!(model.category, NOT_DIFFERENT);
        assert_eq!(model.wee_s, 0.0);
        assert_eq!(model.testing_time_s, 2.0 * 200.0);
        assert_eq!(base.category, DIFFERENT);
        assert_eq!(base.wee_s, 80.0);
        assert_eq!(base.testing_time_s, 2.0 * 70.0);
        assert_eq!(evaluate(&corpus, &ann, Some(&sop), &methods, &cfg).unwrap(), report);

        let cmp = compare_reports(&report.benchmarks, &report.series, "model").unwrap();
        assert_eq!(cmp.outcomes.len(), 1);
        assert_eq!(cmp.outcomes[0].category, ComparisonCategory::ImprovedQuality);
        assert_eq!(cmp.quality_time[0].net_quality_pct, 100.0);
        assert_eq!(cmp.wee[0].a12, Some(1.0));
        assert_eq!(cmp.wee[0].rank_biserial, Some(1.0));
        let est: BTreeMap<_, _> = cmp.estimation.iter().map(|r| (r.method.as_str(), r)).collect();
        assert_eq!(est["model"].exact_pct, 100.0);
        assert_eq!(est["sop"].underestimate_pct, 100.0);
    }

    #[test]
    fn missing_records_are_errors() {
        let (corpus, ann) = corpus();
        let methods = vec![MethodRecords {
            name: "model".into(),
            records: records(100)[..2].to_vec(),
            measurement: MeasurementLen::Window(100),
        }];
        let cfg = EvalConfig { resamples: 1000, ..Default::default() };
        assert!(matches!(evaluate(&corpus, &ann, None, &methods, &cfg), Err(Error::MissingConfig(_))));
        let sop_method = vec![MethodRecords { name: "sop".into(), records: vec![], measurement: MeasurementLen::Sop }];
        assert!(evaluate(&corpus, &ann, None, &sop_method, &cfg).is_err());
    }
}
