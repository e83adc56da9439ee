//! Two-level (fork, then iteration) bootstrap of execution-time ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quantile_sorted;
use crate::error::{Error, Result};

pub const MIN_RESAMPLES: usize = 1000;

/// Replicates per independent RNG stream; fixes the partition so results
/// do not depend on the thread count.
const BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCI {
    pub lower: f64,
    pub upper: f64,
    pub center: f64,
    pub alpha: f64,
    pub resamples: usize,
}

impl RatioCI {
    pub fn includes_one(&self) -> bool {
        self.lower <= 1.0 && 1.0 <= self.upper
    }
}

fn check_groups(groups: &[Vec<f64>], what: &str) -> Result<()> {
    if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InsufficientData(format!("{what}: empty fork group")));
    }
    if groups.iter().flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidInput(format!("{what}: values must be positive and finite")));
    }
    Ok(())
}

/// Means of `resamples` hierarchical bootstrap replicates of `groups`.
///
/// Each replicate draws as many forks as there are groups, with replacement,
/// then redraws each chosen fork's iterations with replacement, and pools the
/// values. Means are accumulated relative to the first observation so
/// constant inputs reproduce their value exactly.
pub fn bootstrap_replicate_means(groups: &[Vec<f64>], resamples: usize, seed: u64) -> Result<Vec<f64>> {
    check_groups(groups, "bootstrap input")?;
    let reference = groups[0][0];
    let k = groups.len();
    let blocks = resamples.div_ceil(BLOCK);
    let means = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block as u64);
            let count = BLOCK.min(resamples - block * BLOCK);
            (0..count)
                .map(|_| {
                    let mut sum = 0.0;
                    let mut n = 0usize;
                    for _ in 0..k {
                        let g = &groups[rng.random_range(0..k)];
                        for _ in 0..g.len() {
                            sum += g[rng.random_range(0..g.len())] - reference;
                        }
                        n += g.len();
                    }
                    reference + sum / n as f64
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(means)
}

/// Percentile interval of `numerator[i] / denominator[i]`.
pub fn ratio_ci_from_replicates(numerator: &[f64], denominator: &[f64], alpha: f64) -> Result<RatioCI> {
    if numerator.len() != denominator.len() || numerator.is_empty() {
        return Err(Error::InvalidInput("replicate vectors must be non-empty and of equal length".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut ratios: Vec<f64> = numerator.iter().zip(denominator).map(|(a, b)| a / b).collect();
    ratios.sort_by(f64::total_cmp);
    let lower = quantile_sorted(&ratios, alpha / 2.0);
    let upper = quantile_sorted(&ratios, 1.0 - alpha / 2.0);
    Ok(RatioCI {
        lower,
        upper,
        center: lower + (upper - lower) / 2.0,
        alpha,
        resamples: ratios.len(),
    })
}

/// Confidence interval of `mean(M) / mean(M*)`, resampling both sides
/// independently from streams derived from `seed`.
pub fn ratio_ci_bootstrap(
    m: &[Vec<f64>],
    m_star: &[Vec<f64>],
    alpha: f64,
    resamples: usize,
    seed: u64,
) -> Result<RatioCI> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidInput(format!("at least {MIN_RESAMPLES} resamples required")));
    }
    check_groups(m, "M")?;
    check_groups(m_star, "M*")?;
    let num = bootstrap_replicate_means(m, resamples, crate::seed::derive(seed, "ratio/numerator"))?;
    let den = bootstrap_replicate_means(m_star, resamples, crate::seed::derive(seed, "ratio/denominator"))?;
    ratio_ci_from_replicates(&num, &den, alpha)
}

/// `|center - 1|` as a percentage.
pub fn relative_deviation(ci: &RatioCI) -> f64 {
    (ci.center - 1.0).abs() * 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn ci(lower: f64, upper: f64) -> RatioCI {
        RatioCI { lower, upper, center: (lower + upper) / 2.0, alpha: 0.05, resamples: 1000 }
    }

    #[test]
    fn constant_inputs() {
        let m = vec![vec![0.1; 30]; 4];
        let r = ratio_ci_bootstrap(&m, &m, 0.05, 1000, 1).unwrap();
        assert_eq!((r.lower, r.upper, r.center), (1.0, 1.0, 1.0));
        assert!(r.includes_one());
        let doubled = vec![vec![0.2; 30]; 4];
        let r = ratio_ci_bootstrap(&doubled, &m, 0.05, 1000, 1).unwrap();
        assert_eq!((r.lower, r.upper), (2.0, 2.0));
    }

    #[test]
    fn relative_deviation_examples() {
        assert!((relative_deviation(&ci(1.04, 1.06)) - 5.0).abs() < 1e-9);
        assert!(relative_deviation(&ci(0.98, 1.02)).abs() < 1e-9);
        assert!((relative_deviation(&ci(1.10, 1.30)) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let ok = vec![vec![1.0, 2.0]];
        assert!(ratio_ci_bootstrap(&[], &ok, 0.05, 1000, 0).is_err());
        assert!(ratio_ci_bootstrap(&[vec![]], &ok, 0.05, 1000, 0).is_err());
        assert!(ratio_ci_bootstrap(&[vec![-1.0]], &ok, 0.05, 1000, 0).is_err());
        assert!(ratio_ci_bootstrap(&ok, &ok, 0.05, 10, 0).is_err());
    }

    #[test]
    fn seeded_and_reciprocal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let draw = |rng: &mut ChaCha8Rng, level: f64| -> Vec<Vec<f64>> {
            (0..6).map(|_| (0..40).map(|_| level + noise.sample(rng)).collect()).collect()
        };
        let m = draw(&mut rng, 1.1);
        let s = draw(&mut rng, 1.0);
        let a = ratio_ci_bootstrap(&m, &s, 0.05, 2000, 9).unwrap();
        let b = ratio_ci_bootstrap(&m, &s, 0.05, 2000, 9).unwrap();
        assert_eq!(a.lower.to_bits(), b.lower.to_bits());
        assert_eq!(a.upper.to_bits(), b.upper.to_bits());
        let swapped = ratio_ci_bootstrap(&s, &m, 0.05, 2000, 9).unwrap();
        assert!((swapped.lower - 1.0 / a.upper).abs() < 0.01, "{swapped:?} vs {a:?}");
        assert!((swapped.upper - 1.0 / a.lower).abs() < 0.01, "{swapped:?} vs {a:?}");
        assert!(!a.includes_one());
    }

    #[test]
    fn replicate_count_and_partition() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![4.0]];
        let r = bootstrap_replicate_means(&g, 1000, 3).unwrap();
        assert_eq!(r.len(), 1000);
        let longer = bootstrap_replicate_means(&g, 1300, 3).unwrap();
        assert_eq!(&longer[..1000], &r[..]);
    }
}
