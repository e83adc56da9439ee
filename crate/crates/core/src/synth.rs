//! Synthetic corpora with known steady-state iterations.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::baselines::{SopConfig, SopEntry};
use crate::data::{BenchmarkId, MeasurementSeries, SteadyStateAnnotation};
use crate::error::{Error, Result};
use crate::io::Annotations;

/// Warm-up phase shapes. Every warm-up value stays at least one level gap
/// away from the steady level (before noise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// One slower level, then the steady level.
    Step,
    /// Exponential approach towards one gap above the steady level.
    Decay,
    /// Three descending levels.
    Staircase,
    /// Faster than the steady state during warm-up.
    Inverted,
    /// Alternating blocks of two slow levels.
    Oscillating,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Step, Shape::Decay, Shape::Staircase, Shape::Inverted, Shape::Oscillating];
}

impl FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "step" => Ok(Shape::Step),
            "decay" => Ok(Shape::Decay),
            "staircase" => Ok(Shape::Staircase),
            "inverted" => Ok(Shape::Inverted),
            "oscillating" => Ok(Shape::Oscillating),
            other => Err(Error::InvalidInput(format!("unknown shape {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StDistribution {
    Fixed(usize),
    /// Uniform over `lo..=hi`.
    Uniform { lo: usize, hi: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Number of series.
    pub count: usize,
    /// Consecutive series share a benchmark, one fork each.
    pub forks_per_benchmark: usize,
    pub projects: usize,
    pub n: usize,
    pub st: StDistribution,
    /// Gaussian noise standard deviation as a fraction of the level gap.
    pub noise: f64,
    pub spike_probability: f64,
    /// Per-iteration probability of a transient hiccup during warm-up, always
    /// pushing away from the steady level: 0.5 to 2 gaps up, or 20% to 50%
    /// down for warm-ups faster than the steady state. Zero leaves warm-up
    /// plateaus flat apart from the noise.
    pub warmup_fluctuation: f64,
    pub shapes: Vec<Shape>,
    /// Typical steady level in seconds per operation.
    pub level_scale: f64,
    pub iteration_duration_s: f64,
    /// Share of series that keep drifting and never reach a steady state.
    pub never_reached_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            count: 60,
            forks_per_benchmark: 3,
            projects: 3,
            n: 800,
            st: StDistribution::Uniform { lo: 50, hi: 450 },
            noise: 0.02,
            spike_probability: 0.0,
            warmup_fluctuation: 0.1,
            shapes: Shape::ALL.to_vec(),
            level_scale: 1e-3,
            iteration_duration_s: 1.0,
            never_reached_fraction: 0.0,
        }
    }
}

impl SynthSpec {
    fn check(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidInput("count must be >= 1".into()));
        }
        if self.forks_per_benchmark == 0 || self.projects == 0 {
            return Err(Error::InvalidInput("forks_per_benchmark and projects must be >= 1".into()));
        }
        if self.shapes.is_empty() {
            return Err(Error::InvalidInput("at least one shape required".into()));
        }
        let (lo, hi) = match self.st {
            StDistribution::Fixed(s) => (s, s),
            StDistribution::Uniform { lo, hi } => (lo, hi),
        };
        if lo == 0 || lo > hi || hi >= self.n {
            return Err(Error::InvalidInput(format!(
                "infeasible st range {lo}..={hi} for n = {}",
                self.n
            )));
        }
        let unit = 0.0..=1.0;
        if !(self.noise >= 0.0 && self.noise.is_finite())
            || !unit.contains(&self.spike_probability)
            || !unit.contains(&self.warmup_fluctuation)
            || !unit.contains(&self.never_reached_fraction)
        {
            return Err(Error::InvalidInput("noise must be >= 0 and probabilities in [0, 1]".into()));
        }
        if !(self.level_scale > 0.0 && self.iteration_duration_s > 0.0) {
            return Err(Error::InvalidInput("level_scale and iteration_duration_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub corpus: Vec<MeasurementSeries>,
    pub annotations: Annotations,
    pub sop: SopConfig,
}

const SOP_WARMUPS: [usize; 7] = [0, 5, 10, 20, 50, 100, 300];
const SOP_MEASUREMENTS: [usize; 4] = [10, 20, 50, 100];

pub fn generate_synthetic_corpus(spec: &SynthSpec, seed: u64) -> Result<SynthCorpus> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(seed, crate::seed::stages::SYNTH));
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let mut out = SynthCorpus {
        corpus: Vec::with_capacity(spec.count),
        annotations: Annotations::new(),
        sop: SopConfig::default(),
    };
    let benchmarks = spec.count.div_ceil(spec.forks_per_benchmark);
    for b in 0..benchmarks {
        let project = format!("project{}", b % spec.projects);
        let benchmark = format!("bench.B{b:04}");
        let shape = spec.shapes[rng.random_range(0..spec.shapes.len())];
        let level = spec.level_scale * rng.random_range(0.5..2.0);
        let gap = level * rng.random_range(0.3..0.6);
        let mut warmup = SOP_WARMUPS[rng.random_range(0..SOP_WARMUPS.len())];
        let measurement = SOP_MEASUREMENTS[rng.random_range(0..SOP_MEASUREMENTS.len())];
        if warmup + measurement > spec.n {
            warmup = spec.n.saturating_sub(measurement);
        }
        let forks = spec.forks_per_benchmark.min(spec.count - b * spec.forks_per_benchmark);
        let id0 = BenchmarkId::new(project.clone(), benchmark.clone(), 0);
        out.sop.entries.insert(
            id0.key(),
            SopEntry {
                warmup_iterations: warmup,
                measurement_iterations: measurement.min(spec.n),
                forks,
            },
        );
        for fork in 0..forks {
            let id = BenchmarkId::new(project.clone(), benchmark.clone(), fork as u32);
            let never = rng.random_bool(spec.never_reached_fraction);
            let st = match spec.st {
                StDistribution::Fixed(s) => s,
                StDistribution::Uniform { lo, hi } => rng.random_range(lo..=hi),
            };
            let sd = spec.noise * gap;
            let values: Vec<f64> = (0..spec.n)
                .map(|t| {
                    let base = if never {
                        // rises by one gap every 80 iterations until the end
                        level + gap * (t / 80) as f64
                    } else {
                        warmup_level(shape, t, st, level, gap)
                    };
                    let mut v = base + sd * unit.sample(&mut rng);
                    let warming = !never && t + 1 < st;
                    if warming && spec.warmup_fluctuation > 0.0 && rng.random_bool(spec.warmup_fluctuation) {
                        if base >= level {
                            v += gap * rng.random_range(0.5..2.0);
                        } else {
                            v -= base * rng.random_range(0.2..0.5);
                        }
                    }
                    if spec.spike_probability > 0.0 && rng.random_bool(spec.spike_probability) {
                        v += gap * rng.random_range(3.0..6.0);
                    }
                    v.max(level * 1e-3)
                })
                .collect();
            out.annotations.insert(
                id.clone(),
                if never {
                    SteadyStateAnnotation::not_reached()
                } else {
                    SteadyStateAnnotation::reached_at(st)
                },
            );
            out.corpus
                .push(MeasurementSeries::new(id, values).with_iteration_duration(spec.iteration_duration_s));
        }
    }
    Ok(out)
}

/// Noise-free value at 0-based iteration `t` of a series whose steady state
/// starts at 1-based iteration `st`.
fn warmup_level(shape: Shape, t: usize, st: usize, level: f64, gap: f64) -> f64 {
    if t + 1 >= st {
        return level;
    }
    let warm = (st - 1) as f64;
    let progress = t as f64 / warm;
    match shape {
        Shape::Step => level + gap,
        Shape::Decay => level + gap + 2.0 * gap * (-5.0 * progress).exp(),
        Shape::Staircase => level + gap * (3.0 - (3.0 * progress).floor().min(2.0)),
        Shape::Inverted => level - gap,
        Shape::Oscillating => {
            if (t / 10) % 2 == 0 {
                level + 2.0 * gap
            } else {
                level + gap
            }
        }
    }
}
