//! Fréchet distance between Gaussian fits of image features.
//!
//! `d² = ‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa Σb)^½)`
//!
//! The trace of the matrix square root is computed through the symmetric
//! matrix `Σa^½ Σb Σa^½`, which shares its spectrum with `Σa Σb`. A coupled
//! Newton–Schulz iteration is kept alongside as an independent cross-check.

mod extractor;
mod sqrtm;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extractor::{evaluate_fid, evaluate_fid_with, BuiltinExtractor, ExtractorInfo, FeatureExtractor, FidReport};
pub use sqrtm::{sqrtm_newton_schulz, sym_sqrt, trace_sqrt_product, SqrtMethod};

/// Eigenvalues down to this value are treated as rounding noise and clamped.
pub const PSD_TOLERANCE: f64 = -1e-6;
/// Absolute symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FidError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least 2 samples, got {n}")]
    TooFewSamples { n: usize },
    #[error("covariance is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("covariance is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("feature extraction failed: {0}")]
    Extraction(String),
    #[error("reports use different extractors ({0} vs {1}) and cannot be compared")]
    IncomparableReports(String, String),
}

/// Gaussian fit of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    n: usize,
}

impl FeatureStats {
    /// Checks shape, symmetry and positive semi-definiteness.
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>, n: usize) -> Result<Self, FidError> {
        if n < 2 {
            return Err(FidError::TooFewSamples { n });
        }
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(FidError::DimensionMismatch {
                expected: d,
                found: if cov.nrows() != d { cov.nrows() } else { cov.ncols() },
            });
        }
        let asymmetry = (&cov - cov.transpose()).amax();
        if asymmetry > SYMMETRY_TOLERANCE {
            return Err(FidError::NotSymmetric { asymmetry });
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        if d > 0 {
            let eig = sqrtm::eigen(&cov)?;
            let min = eig.eigenvalues.min();
            if min < PSD_TOLERANCE {
                return Err(FidError::NotPositiveSemidefinite { min_eigenvalue: min });
            }
        }
        Ok(FeatureStats { mean, cov, n })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
    pub fn n(&self) -> usize {
        self.n
    }
}

/// Sum with a fixed pairwise reduction order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean and unbiased (n − 1) covariance.
pub fn fit_stats(features: &[Vec<f64>]) -> Result<FeatureStats, FidError> {
    let n = features.len();
    if n < 2 {
        return Err(FidError::TooFewSamples { n });
    }
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != d) {
        return Err(FidError::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    let mut column = vec![0.0; n];
    let mean: Vec<f64> = (0..d)
        .map(|j| {
            for (slot, f) in column.iter_mut().zip(features) {
                *slot = f[j];
            }
            pairwise_sum(&column) / n as f64
        })
        .collect();
    // centered samples, feature-major so each covariance entry reads two rows
    let centered: Vec<Vec<f64>> = (0..d)
        .map(|j| features.iter().map(|f| f[j] - mean[j]).collect())
        .collect();
    let mut cov = DMatrix::zeros(d, d);
    let mut prod = vec![0.0; n];
    for i in 0..d {
        for j in i..d {
            for (k, p) in prod.iter_mut().enumerate() {
                *p = centered[i][k] * centered[j][k];
            }
            let v = pairwise_sum(&prod) / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    // PSD by construction up to rounding, so the eigen check is skipped
    Ok(FeatureStats { mean, cov, n })
}

pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64, FidError> {
    frechet_distance_with(a, b, SqrtMethod::SymmetricEigen)
}

pub fn frechet_distance_with(a: &FeatureStats, b: &FeatureStats, method: SqrtMethod) -> Result<f64, FidError> {
    if a.dim() != b.dim() {
        return Err(FidError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff: Vec<f64> = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).collect();
    let mean_term = pairwise_sum(&diff);
    let trace_a = pairwise_sum(a.cov.diagonal().as_slice());
    let trace_b = pairwise_sum(b.cov.diagonal().as_slice());
    let cross = trace_sqrt_product(&a.cov, &b.cov, method)?;
    let d = mean_term + trace_a + trace_b - 2.0 * cross;
    if d < PSD_TOLERANCE {
        return Err(FidError::NumericalFailure(format!("negative distance {d:e}")));
    }
    Ok(d.max(0.0))
}

/// Which covariance estimator a report used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceEstimator {
    /// Divisor n − 1.
    Unbiased,
}
