//! Post-hoc steady-state annotation.
//!
//! A full series is segmented with PELT under a Gaussian change-in-mean-and-variance
//! cost. The steady state starts at the earliest segment from which every
//! segment up to the last one has a mean equivalent to the last segment's.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BenchmarkId, MeasurementSeries, SteadyStateAnnotation};
use crate::error::{Error, Result};

/// Lower bound on segment variance inside the cost, in units of the
/// series mean squared.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Multiplier of `ln(n)` used by [`Penalty::Default`].
pub const DEFAULT_PENALTY_FACTOR: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// `15 * ln(n)`.
    Default,
    Value(f64),
}

impl Penalty {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            Penalty::Default => DEFAULT_PENALTY_FACTOR * (n as f64).ln(),
            Penalty::Value(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SteadyStateConfig {
    pub penalty: Penalty,
    pub min_segment_length: usize,
    pub equivalence_rel_tol: f64,
    /// Seconds.
    pub equivalence_abs_tol: f64,
    /// A final run starting later than `n - tail_exclusion` counts as not reached.
    pub tail_exclusion: usize,
}

impl Default for SteadyStateConfig {
    fn default() -> Self {
        Self {
            penalty: Penalty::Default,
            min_segment_length: 2,
            equivalence_rel_tol: 0.05,
            equivalence_abs_tol: 0.0,
            tail_exclusion: 100,
        }
    }
}

impl SteadyStateConfig {
    fn validate(&self) -> Result<()> {
        if self.min_segment_length < 2 {
            return Err(Error::InvalidInput("min_segment_length must be >= 2".into()));
        }
        if let Penalty::Value(p) = self.penalty {
            if p.is_nan() || p < 0.0 {
                return Err(Error::InvalidInput(format!("penalty must be >= 0, got {p}")));
            }
        }
        if !(self.equivalence_rel_tol.is_finite() && self.equivalence_rel_tol > 0.0) {
            return Err(Error::InvalidInput("equivalence_rel_tol must be positive and finite".into()));
        }
        if !(self.equivalence_abs_tol.is_finite() && self.equivalence_abs_tol >= 0.0) {
            return Err(Error::InvalidInput(
                "equivalence_abs_tol must be non-negative and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Summary of one segment; `start` and `end` are 1-based and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub start: usize,
    pub end: usize,
    pub mean: f64,
    pub variance: f64,
}

impl SegmentStats {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointResult {
    /// Last iteration (1-based) of every segment except the final one.
    pub changepoints: Vec<usize>,
    pub segment_stats: Vec<SegmentStats>,
    /// Minimized objective: total segment cost plus penalty per changepoint.
    pub objective: f64,
}

/// Gaussian negative log-likelihood (times two) of segments, with both mean
/// and variance fitted per segment, evaluated in O(1) from prefix sums.
///
/// The series is rescaled by its mean before costing so the variance floor is
/// relative; the optimal segmentation does not depend on the scale otherwise.
pub(crate) struct GaussianCost {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl GaussianCost {
    pub(crate) fn new(values: &[f64]) -> Self {
        let scale = values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64;
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let mut sum = Vec::with_capacity(values.len() + 1);
        let mut sum_sq = Vec::with_capacity(values.len() + 1);
        let (mut s, mut s2) = (0.0, 0.0);
        sum.push(0.0);
        sum_sq.push(0.0);
        for &v in values {
            // Centering near zero keeps the prefix-sum variance well conditioned.
            let x = v / scale - 1.0;
            s += x;
            s2 += x * x;
            sum.push(s);
            sum_sq.push(s2);
        }
        Self { sum, sum_sq }
    }

    /// Cost of the half-open 0-based range `start..end`.
    pub(crate) fn cost(&self, start: usize, end: usize) -> f64 {
        let m = (end - start) as f64;
        let s = self.sum[end] - self.sum[start];
        let s2 = self.sum_sq[end] - self.sum_sq[start];
        let var = (s2 / m - (s / m).powi(2)).max(0.0);
        let v = var.max(VARIANCE_FLOOR);
        m * (2.0 * std::f64::consts::PI * v).ln() + m * var / v
    }
}

/// Optimal penalized segmentation via PELT.
pub fn pelt_changepoints(series: &MeasurementSeries, config: &SteadyStateConfig) -> Result<ChangePointResult> {
    config.validate()?;
    let values = &series.values;
    let n = values.len();
    let min_len = config.min_segment_length;
    if n < 2 * min_len {
        return Err(Error::InsufficientData(format!(
            "{}: {} values, need at least {}",
            series.id,
            n,
            2 * min_len
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{}: non-finite values", series.id)));
    }
    let penalty = config.penalty.resolve(n);
    let cost = GaussianCost::new(values);

    let bounds = if penalty.is_infinite() {
        vec![(0, n)]
    } else {
        pelt_bounds(&cost, n, min_len, penalty)
    };

    let segment_stats: Vec<SegmentStats> = bounds
        .iter()
        .map(|&(s, e)| segment_stats(values, s, e))
        .collect();
    let changepoints = bounds[..bounds.len() - 1].iter().map(|&(_, e)| e).collect();
    let mut objective: f64 = bounds.iter().map(|&(s, e)| cost.cost(s, e)).sum();
    if bounds.len() > 1 {
        objective += penalty * (bounds.len() - 1) as f64;
    }
    Ok(ChangePointResult {
        changepoints,
        segment_stats,
        objective,
    })
}

/// Returns 0-based half-open segment bounds covering `0..n`.
fn pelt_bounds(cost: &GaussianCost, n: usize, min_len: usize, penalty: f64) -> Vec<(usize, usize)> {
    let mut best = vec![f64::INFINITY; n + 1];
    let mut last = vec![0usize; n + 1];
    best[0] = -penalty;

    struct Candidate {
        pos: usize,
        // Pruned candidates stay usable until the dominating position can
        // itself start a segment of admissible length.
        expires_at: Option<usize>,
    }
    let mut candidates = vec![Candidate { pos: 0, expires_at: None }];

    for t in min_len..=n {
        candidates.retain(|c| c.expires_at.map_or(true, |e| t < e));

        let mut f_t = f64::INFINITY;
        let mut arg = 0;
        for c in &candidates {
            if t - c.pos < min_len {
                continue;
            }
            let total = best[c.pos] + cost.cost(c.pos, t) + penalty;
            if total < f_t {
                f_t = total;
                arg = c.pos;
            }
        }
        best[t] = f_t;
        last[t] = arg;

        if f_t.is_finite() {
            let slack = 1e-9 * (1.0 + f_t.abs());
            for c in candidates.iter_mut() {
                if c.expires_at.is_none()
                    && t - c.pos >= min_len
                    && best[c.pos] + cost.cost(c.pos, t) > f_t + slack
                {
                    c.expires_at = Some(t + min_len);
                }
            }
            candidates.push(Candidate { pos: t, expires_at: None });
        }
    }

    let mut bounds = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = last[t];
        bounds.push((s, t));
        t = s;
    }
    bounds.reverse();
    bounds
}

fn segment_stats(values: &[f64], start: usize, end: usize) -> SegmentStats {
    let slice = &values[start..end];
    let m = slice.len() as f64;
    let mean = slice.iter().sum::<f64>() / m;
    let variance = slice.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    SegmentStats {
        start: start + 1,
        end,
        mean,
        variance,
    }
}

/// Derives the steady-state annotation from a segmentation of `series`.
pub fn classify_steady_state(
    series: &MeasurementSeries,
    cps: &ChangePointResult,
    config: &SteadyStateConfig,
) -> Result<SteadyStateAnnotation> {
    let n = series.len();
    let segments = &cps.segment_stats;
    let final_seg = segments
        .last()
        .ok_or_else(|| Error::InvalidInput("segmentation has no segments".into()))?;
    if final_seg.end != n || segments[0].start != 1 {
        return Err(Error::InvalidInput(format!(
            "segmentation does not cover 1..={n} of {}",
            series.id
        )));
    }
    let tolerance = config
        .equivalence_abs_tol
        .max(config.equivalence_rel_tol * final_seg.mean.abs());

    let mut earliest = segments.len() - 1;
    while earliest > 0 && (segments[earliest - 1].mean - final_seg.mean).abs() <= tolerance {
        earliest -= 1;
    }
    let st = segments[earliest].start;
    if st > n.saturating_sub(config.tail_exclusion) {
        Ok(SteadyStateAnnotation::not_reached())
    } else {
        Ok(SteadyStateAnnotation::reached_at(st))
    }
}

/// Segments and classifies one series.
pub fn annotate_series(series: &MeasurementSeries, config: &SteadyStateConfig) -> Result<SteadyStateAnnotation> {
    let cps = pelt_changepoints(series, config)?;
    classify_steady_state(series, &cps, config)
}

#[derive(Debug, Default)]
pub struct AnnotationBatch {
    pub annotations: BTreeMap<BenchmarkId, SteadyStateAnnotation>,
    /// Series that could not be annotated, with the reason.
    pub errors: Vec<(BenchmarkId, Error)>,
}

/// Annotates every series in parallel; failures are collected, not fatal.
pub fn annotate_corpus(corpus: &[MeasurementSeries], config: &SteadyStateConfig) -> AnnotationBatch {
    let results: Vec<(BenchmarkId, Result<SteadyStateAnnotation>)> = corpus
        .par_iter()
        .map(|s| (s.id.clone(), annotate_series(s, config)))
        .collect();
    let mut batch = AnnotationBatch::default();
    for (id, res) in results {
        match res {
            Ok(a) => {
                batch.annotations.insert(id, a);
            }
            Err(e) => {
                log::warn!("annotation failed for {id}: {e}");
                batch.errors.push((id, e));
            }
        }
    }
    batch
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn series(values: Vec<f64>) -> MeasurementSeries {
        MeasurementSeries::new(BenchmarkId::new("p", "b", 0), values)
    }

    fn two_levels(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.01).unwrap();
        (0..100)
            .map(|i| if i < 50 { 10.0 } else { 1.0 } + noise.sample(&mut rng))
            .collect()
    }

    /// Brute force over every single split position, with the objective
    /// written out directly from two-pass segment statistics.
    fn best_single_split(values: &[f64], penalty: f64, min_len: usize) -> Option<usize> {
        let scale = values.iter().sum::<f64>() / values.len() as f64;
        let cost = |s: &[f64]| {
            let x: Vec<f64> = s.iter().map(|v| v / scale).collect();
            let m = x.len() as f64;
            let mean = x.iter().sum::<f64>() / m;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            let v = var.max(VARIANCE_FLOOR);
            m * (2.0 * std::f64::consts::PI * v).ln() + m * var / v
        };
        let mut best = (cost(values), None);
        for k in min_len..=values.len() - min_len {
            let c = cost(&values[..k]) + cost(&values[k..]) + penalty;
            if c < best.0 {
                best = (c, Some(k));
            }
        }
        best.1
    }

    #[test]
    fn constant_series_has_no_changepoints() {
        let cps = pelt_changepoints(&series(vec![3.5; 100]), &SteadyStateConfig::default()).unwrap();
        assert!(cps.changepoints.is_empty());
        assert_eq!(cps.segment_stats.len(), 1);
    }

    #[test]
    fn level_shift_found_at_fifty() {
        for seed in 0..5 {
            let values = two_levels(seed);
            let config = SteadyStateConfig::default();
            let oracle = best_single_split(&values, config.penalty.resolve(100), 2);
            assert_eq!(oracle, Some(50));
            let cps = pelt_changepoints(&series(values), &config).unwrap();
            assert_eq!(cps.changepoints, vec![50], "seed {seed}");
            assert_eq!(cps.segment_stats[1].start, 51);
        }
    }

    #[test]
    fn infinite_penalty_means_no_changepoints() {
        let config = SteadyStateConfig {
            penalty: Penalty::Value(f64::INFINITY),
            ..Default::default()
        };
        let cps = pelt_changepoints(&series(two_levels(1)), &config).unwrap();
        assert!(cps.changepoints.is_empty());
    }

    #[test]
    fn short_series_is_insufficient() {
        let config = SteadyStateConfig {
            min_segment_length: 10,
            ..Default::default()
        };
        let err = pelt_changepoints(&series(vec![1.0; 19]), &config).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn min_segment_length_is_respected() {
        let mut values = vec![1.0; 40];
        values[20] = 50.0;
        values[21] = 50.0;
        let config = SteadyStateConfig {
            min_segment_length: 5,
            penalty: Penalty::Value(1.0),
            ..Default::default()
        };
        let cps = pelt_changepoints(&series(values), &config).unwrap();
        assert!(cps.segment_stats.iter().all(|s| s.len() >= 5));
    }

    fn stats(bounds: &[(usize, usize, f64)]) -> ChangePointResult {
        ChangePointResult {
            changepoints: bounds[..bounds.len() - 1].iter().map(|b| b.1).collect(),
            segment_stats: bounds
                .iter()
                .map(|&(start, end, mean)| SegmentStats { start, end, mean, variance: 0.0 })
                .collect(),
            objective: 0.0,
        }
    }

    #[test]
    fn single_segment_is_steady_from_start() {
        let s = series(vec![1.0; 3000]);
        let a = classify_steady_state(&s, &stats(&[(1, 3000, 1.0)]), &SteadyStateConfig::default()).unwrap();
        assert_eq!(a.st(), Some(1));
    }

    #[test]
    fn steady_state_starts_at_first_equivalent_segment() {
        let s = series(vec![1.0; 3000]);
        let cps = stats(&[(1, 400, 10.0), (401, 3000, 1.0)]);
        let a = classify_steady_state(&s, &cps, &SteadyStateConfig::default()).unwrap();
        assert_eq!(a.st(), Some(401));

        // 1.04 is within 5% of 1.0; 10.0 is not.
        let cps = stats(&[(1, 400, 10.0), (401, 900, 1.04), (901, 3000, 1.0)]);
        let a = classify_steady_state(&s, &cps, &SteadyStateConfig::default()).unwrap();
        assert_eq!(a.st(), Some(401));

        // A non-equivalent segment in between blocks earlier equivalent ones.
        let cps = stats(&[(1, 400, 1.0), (401, 900, 2.0), (901, 3000, 1.0)]);
        let a = classify_steady_state(&s, &cps, &SteadyStateConfig::default()).unwrap();
        assert_eq!(a.st(), Some(901));
    }

    #[test]
    fn late_steady_state_is_not_reached() {
        let s = series(vec![1.0; 3000]);
        let cps = stats(&[(1, 2949, 5.0), (2950, 3000, 1.0)]);
        let a = classify_steady_state(&s, &cps, &SteadyStateConfig::default()).unwrap();
        assert!(!a.reached());
        let cps = stats(&[(1, 2899, 5.0), (2900, 3000, 1.0)]);
        let a = classify_steady_state(&s, &cps, &SteadyStateConfig::default()).unwrap();
        assert_eq!(a.st(), Some(2900));
    }

    #[test]
    fn absolute_tolerance_dominates_when_larger() {
        let s = series(vec![1.0; 3000]);
        let cps = stats(&[(1, 400, 1.5), (401, 3000, 1.0)]);
        let config = SteadyStateConfig {
            equivalence_abs_tol: 0.6,
            ..Default::default()
        };
        let a = classify_steady_state(&s, &cps, &config).unwrap();
        assert_eq!(a.st(), Some(1));
    }

    #[test]
    fn annotate_corpus_collects_errors() {
        assert!(annotate_corpus(&[], &SteadyStateConfig::default()).annotations.is_empty());

        let corpus: Vec<_> = (0..3)
            .map(|f| MeasurementSeries::new(BenchmarkId::new("p", "b", f), vec![2.0; 500]))
            .chain(std::iter::once(MeasurementSeries::new(
                BenchmarkId::new("p", "short", 0),
                vec![1.0; 3],
            )))
            .collect();
        let batch = annotate_corpus(&corpus, &SteadyStateConfig::default());
        assert_eq!(batch.annotations.len(), 3);
        assert!(batch.annotations.values().all(|a| a.st() == Some(1)));
        assert_eq!(batch.errors.len(), 1);
        assert_eq!(batch.errors[0].0.benchmark, "short");
    }

    #[test]
    fn cost_is_scale_free() {
        let values = two_levels(9);
        let scaled: Vec<f64> = values.iter().map(|v| v * 1e-9).collect();
        let config = SteadyStateConfig::default();
        let a = pelt_changepoints(&series(values), &config).unwrap();
        let b = pelt_changepoints(&series(scaled), &config).unwrap();
        assert_eq!(a.changepoints, b.changepoints);
    }
}
