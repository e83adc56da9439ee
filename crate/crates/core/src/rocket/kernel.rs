//! Random convolutional kernels and the max / proportion-of-positive-values transform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const KERNEL_LENGTHS: [usize; 3] = [7, 9, 11];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub dilation: usize,
    pub padding: usize,
}

impl Kernel {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Receptive field span minus one: `(len - 1) * dilation`.
    pub fn span(&self) -> usize {
        (self.weights.len() - 1) * self.dilation
    }

    /// Number of activations produced for an input of length `input_len`.
    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len + 2 * self.padding).saturating_sub(self.span())
    }

    /// `(max, ppv)` of the dilated, padded convolution over `x`.
    pub fn apply(&self, x: &[f64]) -> (f64, f64) {
        let n = x.len() as isize;
        let pad = self.padding as isize;
        let dil = self.dilation as isize;
        let out_len = self.output_len(x.len());
        if out_len == 0 {
            return (self.bias, 0.0);
        }
        let mut max = f64::NEG_INFINITY;
        let mut positive = 0usize;
        for i in 0..out_len as isize {
            let mut sum = self.bias;
            let mut idx = i - pad;
            for &w in &self.weights {
                if idx >= 0 && idx < n {
                    sum += w * x[idx as usize];
                }
                idx += dil;
            }
            if sum > max {
                max = sum;
            }
            if sum > 0.0 {
                positive += 1;
            }
        }
        (max, positive as f64 / out_len as f64)
    }
}

/// Draws `count` kernels for inputs of length `window`.
///
/// Lengths are uniform on {7, 9, 11}; weights standard normal then
/// mean-centered; bias uniform on [-1, 1]; dilation `floor(2^x)` with `x`
/// uniform on `[0, log2((window - 1) / (len - 1))]`; padding is either zero or
/// `(len - 1) * dilation / 2` with equal probability.
pub fn generate_kernels(count: usize, window: usize, seed: u64) -> Result<Vec<Kernel>> {
    if count == 0 {
        return Err(Error::InvalidInput("kernel count must be >= 1".into()));
    }
    if window < 2 {
        return Err(Error::InvalidInput("window must be >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernels = (0..count)
        .map(|_| {
            let len = KERNEL_LENGTHS[rng.random_range(0..KERNEL_LENGTHS.len())];
            let mut weights: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
            let mean = weights.iter().sum::<f64>() / len as f64;
            weights.iter_mut().for_each(|w| *w -= mean);
            let bias = rng.random_range(-1.0..=1.0);
            let max_exponent = (((window - 1) as f64) / ((len - 1) as f64)).log2().max(0.0);
            let exponent = rng.random_range(0.0..=max_exponent);
            let dilation = (2f64.powf(exponent) as usize).max(1);
            let padding = if rng.random_bool(0.5) {
                (len - 1) * dilation / 2
            } else {
                0
            };
            Kernel {
                weights,
                bias,
                dilation,
                padding,
            }
        })
        .collect();
    Ok(kernels)
}

/// Feature vector of length `2 * kernels.len()`: `[max_0, ppv_0, max_1, ppv_1, ...]`.
pub fn transform(segment: &[f64], kernels: &[Kernel]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * kernels.len());
    for kernel in kernels {
        let (max, ppv) = kernel.apply(segment);
        out.push(max);
        out.push(ppv);
    }
    out
}
