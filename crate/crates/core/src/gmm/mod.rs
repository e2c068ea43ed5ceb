//! Diagonal-covariance Gaussian mixture used as the universal background
//! model: k-means initialization, EM training, responsibilities,
//! log-likelihood and Baum-Welch statistics.

mod em;
mod kmeans;
mod stats;

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use em::{em_fit, EmConfig};
pub use kmeans::{kmeans_init, kmeans_init_with, DEFAULT_LLOYD_ITERATIONS};
pub use stats::{accumulate_bw_stats, accumulate_bw_stats_many, BaumWelchStats};

/// Frames per parallel work unit. Fixed so that reductions happen in the
/// same order whatever the thread count.
pub(crate) const FRAME_CHUNK: usize = 1024;

pub const GMM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGmm {
    weights: Array1<f64>,
    means: Array2<f64>,
    variances: Array2<f64>,
}

impl DiagonalGmm {
    pub fn new(weights: Array1<f64>, means: Array2<f64>, variances: Array2<f64>) -> Result<Self> {
        let c = weights.len();
        if c == 0 || means.ncols() == 0 {
            return Err(Error::validation("GMM needs at least one component and dimension"));
        }
        if means.nrows() != c || variances.dim() != means.dim() {
            return Err(Error::validation(format!(
                "GMM shape mismatch: {c} weights, means {:?}, variances {:?}",
                means.dim(),
                variances.dim()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::validation("GMM weights must be positive"));
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() >= 1e-10 {
            return Err(Error::validation(format!("GMM weights sum to {total}, not 1")));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::validation("GMM means must be finite"));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::validation("GMM variances must be positive"));
        }
        Ok(DiagonalGmm {
            weights,
            means,
            variances,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn variances(&self) -> &Array2<f64> {
        &self.variances
    }

    pub(crate) fn scorer(&self) -> Scorer {
        let f = self.dim() as f64;
        let log_norm: Vec<f64> = (0..self.components())
            .map(|c| {
                let log_det: f64 = self.variances.row(c).iter().map(|v| v.ln()).sum();
                self.weights[c].ln() - 0.5 * (f * (2.0 * PI).ln() + log_det)
            })
            .collect();
        let inv_var = self.variances.mapv(|v| 1.0 / v);
        let origin = self.weights.dot(&self.means);
        let offsets = &self.means - &origin;
        let scaled = &offsets * &inv_var;
        let block_const = (0..self.components())
            .map(|c| {
                let q: f64 = offsets.row(c).iter().zip(scaled.row(c)).map(|(a, b)| a * b).sum();
                log_norm[c] - 0.5 * q
            })
            .collect();
        Scorer {
            log_norm,
            means: self.means.clone(),
            inv_var,
            origin,
            offsets,
            scaled,
            block_const,
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::validation(format!(
                "frame dimension {dim} does not match GMM dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn to_document(&self) -> GmmDocument {
        GmmDocument {
            format_version: GMM_FORMAT_VERSION,
            components: self.components(),
            dim: self.dim(),
            weights: self.weights.to_vec(),
            means: self.means.rows().into_iter().map(|r| r.to_vec()).collect(),
            variances: self.variances.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn from_document(doc: &GmmDocument) -> Result<Self> {
        if doc.format_version != GMM_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported GMM format version {}",
                doc.format_version
            )));
        }
        let rows = |name: &str, m: &[Vec<f64>]| -> Result<Array2<f64>> {
            if m.len() != doc.components || m.iter().any(|r| r.len() != doc.dim) {
                return Err(Error::Format(format!("GMM {name} do not match C={} F={}", doc.components, doc.dim)));
            }
            Ok(Array2::from_shape_fn((doc.components, doc.dim), |(c, d)| m[c][d]))
        };
        if doc.weights.len() != doc.components {
            return Err(Error::Format("GMM weights do not match C".into()));
        }
        DiagonalGmm::new(
            Array1::from(doc.weights.clone()),
            rows("means", &doc.means)?,
            rows("variances", &doc.variances)?,
        )
    }
}

/// JSON form of a [`DiagonalGmm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmDocument {
    pub format_version: u32,
    #[serde(rename = "C")]
    pub components: usize,
    #[serde(rename = "F")]
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

/// Precomputed per-component constants for log-density evaluation.
pub(crate) struct Scorer {
    log_norm: Vec<f64>,
    means: Array2<f64>,
    inv_var: Array2<f64>,
    /// Weighted mean of the component means; block scoring works on frames
    /// shifted by it.
    origin: Array1<f64>,
    /// `means - origin`.
    offsets: Array2<f64>,
    /// `offsets / variances`.
    scaled: Array2<f64>,
    block_const: Vec<f64>,
}

/// Posteriors of a block of frames.
pub(crate) struct BlockPosteriors {
    /// Frames minus the scorer origin.
    pub shifted: Array2<f64>,
    /// One row per frame, one column per component.
    pub post: Array2<f64>,
    pub loglik: f64,
}

impl Scorer {
    /// Writes `log(w_c N(x; m_c, v_c))` for every component into `out`.
    pub fn log_joint(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        let x = x.as_slice().expect("contiguous frame");
        for (c, o) in out.iter_mut().enumerate() {
            let mean = self.means.row(c);
            let inv = self.inv_var.row(c);
            let (mean, inv) = (mean.as_slice().unwrap(), inv.as_slice().unwrap());
            let mut q = 0.0;
            for d in 0..x.len() {
                let z = x[d] - mean[d];
                q += z * z * inv[d];
            }
            *o = self.log_norm[c] - 0.5 * q;
        }
    }

    /// Replaces log-joint values in `buf` by normalized posteriors and
    /// returns the frame log-likelihood.
    pub fn posteriors(&self, x: ArrayView1<'_, f64>, buf: &mut [f64]) -> f64 {
        self.log_joint(x, buf);
        let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in buf.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in buf.iter_mut() {
            *v /= sum;
        }
        max + sum.ln()
    }

    /// Posteriors for a block of frames via the expansion
    /// `(x-m)²/v = z²/v - 2 z (m-o)/v + (m-o)²/v` with `z = x - o`, so the
    /// per-frame work is two matrix products.
    pub fn block_posteriors(&self, frames: ArrayView2<'_, f64>) -> BlockPosteriors {
        let shifted = &frames - &self.origin;
        let squared = shifted.mapv(|v| v * v);
        let mut post = shifted.dot(&self.scaled.t());
        post -= &(squared.dot(&self.inv_var.t()) * 0.5);
        let mut loglik = 0.0;
        for mut row in post.rows_mut() {
            let mut max = f64::NEG_INFINITY;
            for (v, k) in row.iter_mut().zip(&self.block_const) {
                *v += k;
                max = max.max(*v);
            }
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            row.mapv_inplace(|v| v / sum);
            loglik += max + sum.ln();
        }
        BlockPosteriors { shifted, post, loglik }
    }

    pub fn origin(&self) -> &Array1<f64> {
        &self.origin
    }

    pub fn offsets(&self) -> &Array2<f64> {
        &self.offsets
    }
}

/// Posterior component probabilities for one frame, computed in log space.
pub fn responsibilities(gmm: &DiagonalGmm, frame: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
    gmm.check_dim(frame.len())?;
    let frame = frame.as_standard_layout();
    let mut buf = vec![0.0; gmm.components()];
    gmm.scorer().posteriors(frame.view(), &mut buf);
    Ok(buf)
}

/// Total log-likelihood of `frames` (one frame per row).
pub fn log_likelihood(gmm: &DiagonalGmm, frames: ArrayView2<'_, f64>) -> Result<f64> {
    gmm.check_dim(frames.ncols())?;
    let frames = frames.as_standard_layout();
    let scorer = gmm.scorer();
    let partials: Vec<f64> = frames
        .axis_chunks_iter(Axis(0), FRAME_CHUNK)
        .into_par_iter()
        .map(|chunk| scorer.block_posteriors(chunk).loglik)
        .collect();
    Ok(partials.iter().sum())
}

/// Per-dimension variance floor.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceFloor(pub Vec<f64>);

impl VarianceFloor {
    pub const ABSOLUTE: f64 = 1e-6;
    pub const RELATIVE: f64 = 1e-3;

    /// `max(1e-6, 1e-3 × global variance)` for each dimension of `frames`.
    pub fn from_data(frames: ArrayView2<'_, f64>) -> Self {
        let n = frames.nrows().max(1) as f64;
        let mean = frames.sum_axis(Axis(0)) / n;
        let floor = (0..frames.ncols())
            .map(|d| {
                let var = frames.column(d).iter().map(|x| (x - mean[d]).powi(2)).sum::<f64>() / n;
                (Self::RELATIVE * var).max(Self::ABSOLUTE)
            })
            .collect();
        VarianceFloor(floor)
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        VarianceFloor(vec![value; dim])
    }

    pub(crate) fn apply(&self, variances: &mut Array2<f64>) {
        for mut row in variances.rows_mut() {
            for (v, f) in row.iter_mut().zip(&self.0) {
                if !(*v >= *f) {
                    *v = *f;
                }
            }
        }
    }
}
