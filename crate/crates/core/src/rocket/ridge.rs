//! Ridge classifier with regularization chosen by closed-form leave-one-out error.
//!
//! Features are centered and scaled with statistics fitted on the training
//! rows, targets are ±1, and the intercept is not penalized. For a fixed
//! penalty the fitted values are a linear smoother `ŷ = H y`, so the
//! leave-one-out residual is `(y_i - ŷ_i) / (1 - H_ii)` without refitting.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// Smallest scale used to normalize a feature.
pub const SCALE_FLOOR: f64 = 1e-8;

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

pub fn default_alphas() -> Vec<f64> {
    log_grid(1e-3, 1e3, 10)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub mean: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    pub feature_stats: Vec<FeatureStat>,
    /// Mean squared leave-one-out residual for each candidate alpha.
    pub loo_errors: Vec<(f64, f64)>,
}

impl RidgeFit {
    pub fn normalize_into(&self, features: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            features
                .iter()
                .zip(&self.feature_stats)
                .map(|(x, s)| (x - s.mean) / s.scale),
        );
    }

    /// Decision score for a raw (unnormalized) feature vector.
    pub fn score(&self, features: &[f64]) -> f64 {
        self.intercept
            + features
                .iter()
                .zip(&self.feature_stats)
                .zip(&self.weights)
                .map(|((x, s), w)| (x - s.mean) / s.scale * w)
                .sum::<f64>()
    }
}

/// Fits per-feature `(mean, population sd)` normalizers.
pub fn fit_feature_stats(features: &DMatrix<f64>) -> Vec<FeatureStat> {
    let n = features.nrows() as f64;
    features
        .column_iter()
        .map(|col| {
            let mean = col.sum() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            FeatureStat {
                mean,
                scale: var.sqrt().max(SCALE_FLOOR),
            }
        })
        .collect()
}

pub fn normalize(features: &DMatrix<f64>, stats: &[FeatureStat]) -> DMatrix<f64> {
    let mut z = features.clone();
    for (mut col, s) in z.column_iter_mut().zip(stats) {
        col.iter_mut().for_each(|x| *x = (*x - s.mean) / s.scale);
    }
    z
}

fn check_labels(labels: &[Label]) -> Result<()> {
    let stable = labels.iter().filter(|&&l| l == Label::Stable).count();
    let unstable = labels.len() - stable;
    if stable < 2 || unstable < 2 {
        return Err(Error::DegenerateLabels(format!(
            "need >= 2 examples per class, got {stable} stable / {unstable} unstable"
        )));
    }
    Ok(())
}

/// Spectral form of the centered design, shared by every alpha.
struct Spectrum {
    /// Column-centered normalized design, `n x p`.
    zc: DMatrix<f64>,
    /// Eigenvalues of either `ZcᵀZc` or `ZcZcᵀ` (clamped to >= 0).
    eigenvalues: DVector<f64>,
    /// Primal (`n >= p`): eigenvectors `V` (p x r) plus `Q = Zc V` (n x r).
    /// Dual (`n < p`): eigenvectors `U` (n x r) of the Gram matrix.
    basis: DMatrix<f64>,
    projected: Option<DMatrix<f64>>,
}

impl Spectrum {
    fn new(zc: DMatrix<f64>) -> Result<Self> {
        let (n, p) = zc.shape();
        let zt = zc.transpose();
        if n >= p {
            let gram = &zt * &zc;
            let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 0)
                .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
            let q = &zc * &eig.eigenvectors;
            Ok(Self {
                zc,
                eigenvalues: eig.eigenvalues.map(|v| v.max(0.0)),
                basis: eig.eigenvectors,
                projected: Some(q),
            })
        } else {
            let gram = &zc * &zt;
            let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 0)
                .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
            Ok(Self {
                zc,
                eigenvalues: eig.eigenvalues.map(|v| v.max(0.0)),
                basis: eig.eigenvectors,
                projected: None,
            })
        }
    }

    /// Fitted centered values and hat diagonal (without the `1/n` intercept part).
    fn smooth(&self, yc: &DVector<f64>, alpha: f64) -> (DVector<f64>, DVector<f64>) {
        let n = self.zc.nrows();
        match &self.projected {
            Some(q) => {
                let qty = q.tr_mul(yc);
                let coef = DVector::from_iterator(
                    qty.len(),
                    qty.iter().zip(self.eigenvalues.iter()).map(|(c, l)| c / (l + alpha)),
                );
                let fitted = q * &coef;
                let inv: Vec<f64> = self.eigenvalues.iter().map(|l| 1.0 / (l + alpha)).collect();
                let hat = DVector::from_iterator(
                    n,
                    q.row_iter()
                        .map(|row| row.iter().zip(&inv).map(|(v, i)| v * v * i).sum::<f64>()),
                );
                (fitted, hat)
            }
            None => {
                let u = &self.basis;
                let shrink: Vec<f64> = self.eigenvalues.iter().map(|s| s / (s + alpha)).collect();
                let uty = u.tr_mul(yc);
                let coef = DVector::from_iterator(uty.len(), uty.iter().zip(&shrink).map(|(c, f)| c * f));
                let fitted = u * &coef;
                let hat = DVector::from_iterator(
                    n,
                    u.row_iter()
                        .map(|row| row.iter().zip(&shrink).map(|(v, f)| v * v * f).sum::<f64>()),
                );
                (fitted, hat)
            }
        }
    }

    /// Ridge weights (no intercept) on the centered design.
    fn weights(&self, yc: &DVector<f64>, alpha: f64) -> DVector<f64> {
        match &self.projected {
            Some(q) => {
                let qty = q.tr_mul(yc);
                let coef = DVector::from_iterator(
                    qty.len(),
                    qty.iter().zip(self.eigenvalues.iter()).map(|(c, l)| c / (l + alpha)),
                );
                &self.basis * coef
            }
            None => {
                let u = &self.basis;
                let uty = u.tr_mul(yc);
                let coef = DVector::from_iterator(
                    uty.len(),
                    uty.iter().zip(self.eigenvalues.iter()).map(|(c, s)| c / (s + alpha)),
                );
                self.zc.tr_mul(&(u * coef))
            }
        }
    }
}

/// Closed-form mean squared leave-one-out residual for each alpha, computed on
/// an already normalized design.
pub fn loo_errors(z: &DMatrix<f64>, y: &[f64], alphas: &[f64]) -> Result<Vec<f64>> {
    let (spectrum, yc, n) = prepare(z, y)?;
    Ok(alphas
        .iter()
        .map(|&alpha| loo_mse(&spectrum, &yc, n, alpha))
        .collect())
}

fn prepare(z: &DMatrix<f64>, y: &[f64]) -> Result<(Spectrum, DVector<f64>, usize)> {
    let n = z.nrows();
    if n != y.len() {
        return Err(Error::InvalidInput(format!("{} rows but {} targets", n, y.len())));
    }
    let mut zc = z.clone();
    for mut col in zc.column_iter_mut() {
        let m = col.sum() / n as f64;
        col.add_scalar_mut(-m);
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    Ok((Spectrum::new(zc)?, yc, n))
}

fn loo_mse(spectrum: &Spectrum, yc: &DVector<f64>, n: usize, alpha: f64) -> f64 {
    let (fitted, hat) = spectrum.smooth(yc, alpha);
    let inv_n = 1.0 / n as f64;
    let sse: f64 = (0..n)
        .map(|i| {
            let residual = yc[i] - fitted[i];
            let leverage = inv_n + hat[i];
            let e = residual / (1.0 - leverage);
            e * e
        })
        .sum();
    // Leverage 1 (a point the fit interpolates exactly) yields inf/NaN here;
    // such an alpha is never preferable.
    let mse = sse / n as f64;
    if mse.is_nan() {
        f64::INFINITY
    } else {
        mse
    }
}

/// Fits the ridge classifier on raw features (`n x p`).
pub fn fit_ridge(features: &DMatrix<f64>, labels: &[Label], alphas: &[f64]) -> Result<RidgeFit> {
    if features.nrows() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows but {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    if alphas.is_empty() || alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::InvalidInput("alpha grid must be non-empty and positive".into()));
    }
    check_labels(labels)?;
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature values".into()));
    }

    let feature_stats = fit_feature_stats(features);
    let z = normalize(features, &feature_stats);
    let y: Vec<f64> = labels.iter().map(|l| l.target()).collect();
    let n = y.len();

    let column_means: Vec<f64> = z.column_iter().map(|c| c.sum() / n as f64).collect();
    let (spectrum, yc, _) = prepare(&z, &y)?;
    drop(z);

    let loo: Vec<(f64, f64)> = alphas
        .iter()
        .map(|&a| (a, loo_mse(&spectrum, &yc, n, a)))
        .collect();
    let (alpha, best) = loo
        .iter()
        .copied()
        .fold((alphas[0], f64::INFINITY), |acc, (a, e)| if e < acc.1 { (a, e) } else { acc });
    if !best.is_finite() {
        return Err(Error::Numerical("leave-one-out error is not finite for any alpha".into()));
    }

    let w = spectrum.weights(&yc, alpha);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let intercept = y_mean - column_means.iter().zip(w.iter()).map(|(m, w)| m * w).sum::<f64>();
    Ok(RidgeFit {
        weights: w.iter().copied().collect(),
        intercept,
        alpha,
        feature_stats,
        loo_errors: loo,
    })
}
