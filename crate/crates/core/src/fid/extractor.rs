use async_trait::async_trait;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_stats, frechet_distance_with, CovarianceEstimator, FidError, SqrtMethod};
use crate::raster::Image;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorInfo {
    pub name: String,
    pub version: String,
    pub dim: usize,
}

impl ExtractorInfo {
    /// Scores are comparable only between reports with equal tags.
    pub fn tag(&self) -> String {
        format!("{}@{}/d{}", self.name, self.version, self.dim)
    }
}

#[async_trait]
pub trait FeatureExtractor: Send + Sync {
    fn info(&self) -> ExtractorInfo;

    async fn extract(&self, image: &Image) -> Result<Vec<f64>, FidError>;

    /// Output order matches input order.
    async fn extract_batch(&self, images: &[Image]) -> Result<Vec<Vec<f64>>, FidError> {
        let mut out = Vec::with_capacity(images.len());
        for img in images {
            out.push(self.extract(img).await?);
        }
        Ok(out)
    }
}

pub const GRID_COLS: u32 = 6;
pub const GRID_ROWS: u32 = 10;
/// dark, gray, light, red, green, blue, horizontal edges, vertical edges
pub const FEATURES_PER_CELL: usize = 8;
const CHROMA_THRESHOLD: i32 = 32;
const EDGE_THRESHOLD: i32 = 24;

/// Deterministic handcrafted features: per grid cell, the fraction of pixels
/// in six colour bins plus horizontal and vertical edge densities.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinExtractor;

impl BuiltinExtractor {
    pub const DIM: usize = (GRID_COLS * GRID_ROWS) as usize * FEATURES_PER_CELL;

    pub fn features(image: &Image) -> Vec<f64> {
        let (w, h) = (image.width(), image.height());
        let luma: Vec<i32> = image
            .pixels()
            .chunks_exact(3)
            .map(|p| (p[0] as i32 * 299 + p[1] as i32 * 587 + p[2] as i32 * 114) / 1000)
            .collect();
        let mut out = Vec::with_capacity(Self::DIM);
        for row in 0..GRID_ROWS {
            let (y0, y1) = (row * h / GRID_ROWS, (row + 1) * h / GRID_ROWS);
            for col in 0..GRID_COLS {
                let (x0, x1) = (col * w / GRID_COLS, (col + 1) * w / GRID_COLS);
                out.extend_from_slice(&cell_features(image, &luma, x0, y0, x1, y1));
            }
        }
        out
    }
}

fn colour_bin(p: [u8; 3], luma: i32) -> usize {
    let (r, g, b) = (p[0] as i32, p[1] as i32, p[2] as i32);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    if max - min < CHROMA_THRESHOLD {
        match luma {
            l if l < 64 => 0,
            l if l > 192 => 2,
            _ => 1,
        }
    } else if r == max {
        3
    } else if g == max {
        4
    } else {
        5
    }
}

fn cell_features(image: &Image, luma: &[i32], x0: u32, y0: u32, x1: u32, y1: u32) -> [f64; FEATURES_PER_CELL] {
    let w = image.width() as usize;
    let mut bins = [0u32; 6];
    let (mut h_edges, mut h_pairs, mut v_edges, mut v_pairs) = (0u32, 0u32, 0u32, 0u32);
    for y in y0..y1 {
        for x in x0..x1 {
            let i = y as usize * w + x as usize;
            let p = image.get(x, y);
            bins[colour_bin(p.0, luma[i])] += 1;
            if x + 1 < image.width() {
                h_pairs += 1;
                if (luma[i + 1] - luma[i]).abs() > EDGE_THRESHOLD {
                    h_edges += 1;
                }
            }
            if y + 1 < image.height() {
                v_pairs += 1;
                if (luma[i + w] - luma[i]).abs() > EDGE_THRESHOLD {
                    v_edges += 1;
                }
            }
        }
    }
    let total = ((x1 - x0) * (y1 - y0)).max(1) as f64;
    let ratio = |n: u32, d: u32| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let mut f = [0.0; FEATURES_PER_CELL];
    for (slot, count) in f.iter_mut().zip(bins) {
        *slot = count as f64 / total;
    }
    f[6] = ratio(h_edges, h_pairs);
    f[7] = ratio(v_edges, v_pairs);
    f
}

#[async_trait]
impl FeatureExtractor for BuiltinExtractor {
    fn info(&self) -> ExtractorInfo {
        ExtractorInfo {
            name: "builtin-grid".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            dim: Self::DIM,
        }
    }

    async fn extract(&self, image: &Image) -> Result<Vec<f64>, FidError> {
        Ok(Self::features(image))
    }

    async fn extract_batch(&self, images: &[Image]) -> Result<Vec<Vec<f64>>, FidError> {
        Ok(images.par_iter().map(Self::features).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidReport {
    pub score: f64,
    pub n_generated: usize,
    pub n_reference: usize,
    pub extractor: ExtractorInfo,
    pub covariance: CovarianceEstimator,
    pub sqrt_method: SqrtMethod,
}

impl FidReport {
    /// `baseline.score − self.score`; positive when this report is better.
    pub fn improvement_over(&self, baseline: &FidReport) -> Result<f64, FidError> {
        let (a, b) = (self.extractor.tag(), baseline.extractor.tag());
        if a != b {
            return Err(FidError::IncomparableReports(a, b));
        }
        Ok(baseline.score - self.score)
    }
}

pub async fn evaluate_fid(
    generated: &[Image],
    reference: &[Image],
    extractor: &dyn FeatureExtractor,
) -> Result<FidReport, FidError> {
    evaluate_fid_with(generated, reference, extractor, SqrtMethod::default()).await
}

pub async fn evaluate_fid_with(
    generated: &[Image],
    reference: &[Image],
    extractor: &dyn FeatureExtractor,
    method: SqrtMethod,
) -> Result<FidReport, FidError> {
    for set in [generated, reference] {
        if set.len() < 2 {
            return Err(FidError::TooFewSamples { n: set.len() });
        }
    }
    let info = extractor.info();
    let gen_features = extractor.extract_batch(generated).await?;
    let ref_features = extractor.extract_batch(reference).await?;
    for f in gen_features.iter().chain(&ref_features) {
        if f.len() != info.dim {
            return Err(FidError::DimensionMismatch {
                expected: info.dim,
                found: f.len(),
            });
        }
    }
    let a = fit_stats(&gen_features)?;
    let b = fit_stats(&ref_features)?;
    let score = frechet_distance_with(&a, &b, method)?;
    Ok(FidReport {
        score,
        n_generated: generated.len(),
        n_reference: reference.len(),
        extractor: info,
        covariance: CovarianceEstimator::Unbiased,
        sqrt_method: method,
    })
}
