//! Comparison methods: a developer-fixed warm-up count and three dynamic
//! stability heuristics (coefficient of variation, relative confidence
//! interval width, Kullback-Leibler divergence).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{mean_std, BenchmarkKey, MeasurementSeries};
use crate::error::{Error, Result};
use crate::evaluation::quantile_sorted;
use crate::stopper::{HaltReason, StopResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SopEntry {
    pub warmup_iterations: usize,
    pub measurement_iterations: usize,
    pub forks: usize,
}

/// Per-benchmark fixed configuration as written by developers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SopConfig {
    pub entries: BTreeMap<BenchmarkKey, SopEntry>,
}

impl SopConfig {
    pub fn get(&self, key: &BenchmarkKey) -> Result<&SopEntry> {
        self.entries
            .get(key)
            .ok_or_else(|| Error::MissingConfig(format!("SOP entry for {key}")))
    }
}

/// Uses the configured warm-up count and measurement iteration count verbatim.
pub fn sop_stop(series: &MeasurementSeries, sop: &SopConfig) -> Result<StopResult> {
    let entry = sop.get(&series.id.key())?;
    let needed = entry.warmup_iterations + entry.measurement_iterations;
    if series.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{}: {} values, SOP needs {needed}",
            series.id,
            series.len()
        )));
    }
    Ok(StopResult::at(
        series,
        entry.warmup_iterations,
        entry.measurement_iterations,
        HaltReason::FixedWarmup,
        0,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    Cv,
    Rciw,
    Kld,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 3] = [HeuristicKind::Cv, HeuristicKind::Rciw, HeuristicKind::Kld];

    pub fn as_str(self) -> &'static str {
        match self {
            HeuristicKind::Cv => "cv",
            HeuristicKind::Rciw => "rciw",
            HeuristicKind::Kld => "kld",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cv" => Ok(HeuristicKind::Cv),
            "rciw" => Ok(HeuristicKind::Rciw),
            "kld" => Ok(HeuristicKind::Kld),
            other => Err(Error::InvalidInput(format!("unknown heuristic {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub kind: HeuristicKind,
    pub window: usize,
    pub stability_run: usize,
    /// For CV and RCIW, the tolerated spread (max - min) of the last
    /// `stability_run` values. For KLD, both the divergence limit and the
    /// complement of the required fraction of passing checks.
    pub threshold: f64,
    pub bootstrap_iters: usize,
    pub confidence_alpha: f64,
    pub seed: u64,
    pub cap: usize,
}

impl HeuristicConfig {
    pub fn new(kind: HeuristicKind) -> Self {
        Self {
            kind,
            window: 100,
            stability_run: 5,
            threshold: match kind {
                HeuristicKind::Kld => 0.05,
                _ => 0.01,
            },
            bootstrap_iters: 1000,
            confidence_alpha: 0.05,
            seed: 0,
            cap: 500,
        }
    }

    fn check(&self) -> Result<()> {
        if self.window < 4 {
            return Err(Error::InvalidInput("heuristic window must be >= 4".into()));
        }
        if self.stability_run == 0 {
            return Err(Error::InvalidInput("stability_run must be >= 1".into()));
        }
        if !self.threshold.is_finite() || self.threshold < 0.0 {
            return Err(Error::InvalidInput("threshold must be finite and non-negative".into()));
        }
        if self.kind == HeuristicKind::Rciw && self.bootstrap_iters == 0 {
            return Err(Error::InvalidInput("bootstrap_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Population coefficient of variation.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let (mean, sd) = mean_std(values);
    sd / mean
}

/// Percentile bootstrap interval of the mean, `(lower, upper)`.
pub fn bootstrap_mean_interval(values: &[f64], resamples: usize, alpha: f64, rng: &mut impl Rng) -> (f64, f64) {
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    (quantile_sorted(&means, alpha / 2.0), quantile_sorted(&means, 1.0 - alpha / 2.0))
}

/// Relative confidence interval width of the mean.
pub fn rciw(values: &[f64], resamples: usize, alpha: f64, rng: &mut impl Rng) -> f64 {
    let (lo, hi) = bootstrap_mean_interval(values, resamples, alpha, rng);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (hi - lo) / mean
}

pub const KDE_GRID_POINTS: usize = 128;
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Silverman's rule of thumb; zero for a constant sample.
pub fn silverman_bandwidth(sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    if sample.len() < 2 {
        return 0.0;
    }
    let mean = sample.iter().sum::<f64>() / n;
    let sd = (sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn kde_on_grid(sample: &[f64], h: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (sample.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut density: Vec<f64> = grid
        .iter()
        .map(|&g| {
            let s: f64 = sample.iter().map(|&x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum();
            (s * norm).max(DENSITY_FLOOR)
        })
        .collect();
    let total: f64 = density.iter().sum();
    density.iter_mut().for_each(|d| *d /= total);
    density
}

/// `KL(P || Q)` between Gaussian KDEs of `p` and `q`, discretized on a shared grid.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let fallback = {
        let all_mean = p.iter().chain(q).sum::<f64>() / (p.len() + q.len()) as f64;
        (1e-3 * all_mean.abs()).max(DENSITY_FLOOR)
    };
    let (sp, sq) = (silverman_bandwidth(p), silverman_bandwidth(q));
    let hp = if sp > 0.0 { sp } else if sq > 0.0 { sq } else { fallback };
    let hq = if sq > 0.0 { sq } else { hp };
    let h = hp.max(hq);
    let (lo, hi) = p
        .iter()
        .chain(q)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let (lo, hi) = (lo - 3.0 * h, hi + 3.0 * h);
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let dp = kde_on_grid(p, hp, &grid);
    let dq = kde_on_grid(q, hq, &grid);
    dp.iter().zip(&dq).map(|(a, b)| a * (a / b).ln()).sum::<f64>().max(0.0)
}

/// Replays a stability heuristic with the same window and cap semantics as
/// the classifier-driven stopper: the check after `w` warm-up iterations
/// looks at iterations `w+1 ..= w+window`.
pub fn heuristic_stop(series: &MeasurementSeries, config: &HeuristicConfig) -> Result<StopResult> {
    config.check()?;
    let w = config.window;
    let n = series.len();
    if n < w {
        return Err(Error::InsufficientData(format!(
            "{}: {} values, window needs {}",
            series.id, n, w
        )));
    }
    if config.kind != HeuristicKind::Kld {
        if let Some(i) = series.values.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{}: non-positive or non-finite value at iteration {}",
                series.id,
                i + 1
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive_for(
        config.seed,
        crate::seed::stages::RCIW,
        &series.id,
    ));
    let run = config.stability_run;
    let mut history: Vec<f64> = Vec::new();
    let last_feasible = n - w;
    for warmup in 0..=config.cap.min(last_feasible) {
        let window = &series.values[warmup..warmup + w];
        let metric = match config.kind {
            HeuristicKind::Cv => coefficient_of_variation(window),
            HeuristicKind::Rciw => rciw(window, config.bootstrap_iters, config.confidence_alpha, &mut rng),
            HeuristicKind::Kld => kl_divergence(&window[..w / 2], &window[w / 2..]),
        };
        history.push(metric);
        if history.len() >= run && stable(&history[history.len() - run..], config) {
            return Ok(StopResult::at(series, warmup, w, HaltReason::ModelStable, warmup + 1));
        }
    }
    let queries = config.cap.min(last_feasible) + 1;
    if config.cap <= last_feasible {
        Ok(StopResult::at(series, config.cap, w, HaltReason::CapReached, queries))
    } else {
        Ok(StopResult::at(series, last_feasible, w, HaltReason::SeriesExhausted, queries))
    }
}

fn stable(recent: &[f64], config: &HeuristicConfig) -> bool {
    match config.kind {
        HeuristicKind::Cv | HeuristicKind::Rciw => {
            let (lo, hi) = recent
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            hi - lo < config.threshold
        }
        HeuristicKind::Kld => {
            let passing = recent.iter().filter(|&&d| d < config.threshold).count();
            passing as f64 / recent.len() as f64 >= 1.0 - config.threshold
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BenchmarkId;
    use rand_distr::{Distribution, Normal};

    fn series(values: Vec<f64>) -> MeasurementSeries {
        MeasurementSeries::new(BenchmarkId::new("p", "b", 0), values)
    }

    fn sop(warmup: usize, measurement: usize) -> SopConfig {
        let mut c = SopConfig::default();
        c.entries.insert(
            BenchmarkKey { project: "p".into(), benchmark: "b".into() },
            SopEntry { warmup_iterations: warmup, measurement_iterations: measurement, forks: 1 },
        );
        c
    }

    #[test]
    fn sop_slices_configured_window() {
        let s = series((1..=50).map(f64::from).collect());
        let r = sop_stop(&s, &sop(5, 10)).unwrap();
        assert_eq!(r.warmup_iterations, 5);
        assert_eq!(r.measurements, (6..=15).map(f64::from).collect::<Vec<_>>());
        let r = sop_stop(&s, &sop(0, 3)).unwrap();
        assert_eq!(r.measurements, vec![1.0, 2.0, 3.0]);
        assert_eq!(sop_stop(&s, &sop(3, 10)).unwrap().warmup_iterations, 3);
        assert!(sop_stop(&s, &sop(45, 10)).is_err());
        assert!(matches!(sop_stop(&s, &SopConfig::default()), Err(Error::MissingConfig(_))));
    }

    #[test]
    fn cv_hand_example() {
        let cv = coefficient_of_variation(&[10.0, 10.0, 10.0, 10.0, 30.0]);
        assert!((cv - 8.0 / 14.0).abs() < 1e-12);
        assert!((cv - 0.5714).abs() < 1e-4);
    }

    #[test]
    fn constant_series_halts_after_one_stability_run() {
        for kind in HeuristicKind::ALL {
            let cfg = HeuristicConfig::new(kind);
            let r = heuristic_stop(&series(vec![2.5; 1000]), &cfg).unwrap();
            assert_eq!(r.halt_reason, HaltReason::ModelStable, "{kind}");
            assert_eq!(r.warmup_iterations, cfg.stability_run - 1, "{kind}");
        }
    }

    #[test]
    fn never_settling_series_hits_cap() {
        // a spike every third iteration: windows alternate between 33 and 34
        // spikes, so CV swings by about 0.03 within any five checks
        let values: Vec<f64> = (0..1200).map(|i| if i % 3 == 0 { 100.0 } else { 1.0 }).collect();
        let a = coefficient_of_variation(&values[0..100]);
        let b = coefficient_of_variation(&values[1..101]);
        assert!((a - b).abs() > 0.02, "{a} {b}");
        for kind in [HeuristicKind::Cv, HeuristicKind::Rciw] {
            let r = heuristic_stop(&series(values.clone()), &HeuristicConfig::new(kind)).unwrap();
            assert_eq!(r.halt_reason, HaltReason::CapReached, "{kind}");
            assert_eq!(r.warmup_iterations, 500);
            assert_eq!(r.queries, 501);
        }
    }

    #[test]
    fn non_positive_values_rejected() {
        let mut v = vec![1.0; 300];
        v[10] = 0.0;
        assert!(heuristic_stop(&series(v.clone()), &HeuristicConfig::new(HeuristicKind::Cv)).is_err());
        assert!(heuristic_stop(&series(v), &HeuristicConfig::new(HeuristicKind::Rciw)).is_err());
    }

    #[test]
    fn kld_separates_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 1.0).unwrap();
        for _ in 0..20 {
            let a: Vec<f64> = (0..50).map(|_| 10.0 + noise.sample(&mut rng)).collect();
            let far: Vec<f64> = (0..50).map(|_| 20.0 + noise.sample(&mut rng)).collect();
            assert_eq!(kl_divergence(&a, &a), 0.0);
            assert!(kl_divergence(&a, &a) < kl_divergence(&a, &far));
        }
        assert_eq!(kl_divergence(&[3.0; 10], &[3.0; 10]), 0.0);
        assert!(kl_divergence(&[3.0; 10], &[4.0; 10]) > 1.0);
    }

    #[test]
    fn rciw_is_seeded() {
        let s = series((0..400).map(|i| 1.0 + ((i * 7919) % 13) as f64 * 0.01).collect());
        let cfg = HeuristicConfig::new(HeuristicKind::Rciw);
        assert_eq!(heuristic_stop(&s, &cfg).unwrap(), heuristic_stop(&s, &cfg).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        fn noisy(seed: u64, len: usize) -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let decay = rng.random_range(10.0..200.0);
            let sd = rng.random_range(0.001..0.05);
            (0..len)
                .map(|i| 1.0 + (-(i as f64) / decay).exp() + rng.random_range(-sd..sd))
                .collect()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn cv_scale_invariant(seed in any::<u64>(), k in -8i32..8) {
                let v = noisy(seed, 900);
                let a = 2f64.powi(k);
                let cfg = HeuristicConfig::new(HeuristicKind::Cv);
                let base = heuristic_stop(&series(v.clone()), &cfg).unwrap();
                let scaled = heuristic_stop(&series(v.iter().map(|x| a * x).collect()), &cfg).unwrap();
                prop_assert_eq!(base.warmup_iterations, scaled.warmup_iterations);
                prop_assert_eq!(base.halt_reason, scaled.halt_reason);
            }

            #[test]
            fn rciw_interval_contains_mean(seed in any::<u64>()) {
                let v = noisy(seed, 100);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (lo, hi) = bootstrap_mean_interval(&v, 1000, 0.05, &mut rng);
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                prop_assert!(lo <= mean && mean <= hi);
                prop_assert!(rciw(&v, 1000, 0.05, &mut rng) >= 0.0);
            }

            #[test]
            fn heuristics_respect_cap(seed in any::<u64>(), cap in 0usize..60, kind in 0usize..3) {
                let mut cfg = HeuristicConfig::new(HeuristicKind::ALL[kind]);
                cfg.cap = cap;
                cfg.bootstrap_iters = 200;
                let r = heuristic_stop(&series(noisy(seed, 400)), &cfg).unwrap();
                prop_assert!(r.warmup_iterations <= cap);
                prop_assert_eq!(r.measurements.len(), cfg.window);
            }
        }
    }
}
