//! Total-variability model: T-matrix initialization and EM training from
//! Baum-Welch statistics, posterior-mean i-vector extraction, and the
//! smoothing/normalization stage applied to per-epoch i-vector series.

mod postprocess;
mod train;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gmm::{BaumWelchStats, DiagonalGmm};
use crate::label::{EpochKey, Label};
use crate::linalg::Cholesky;

pub use postprocess::{postprocess_ivectors, GmvnMode};
pub use train::{tv_train, TvTrainConfig};

pub const TV_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_RANK: usize = 80;
pub const DEFAULT_INIT_SCALE: f64 = 0.1;

/// One epoch's i-vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IVector {
    #[serde(flatten)]
    pub key: EpochKey,
    pub label: Label,
    pub w: Vec<f64>,
}

/// Low-rank map from the i-vector space to offsets of the UBM mean
/// supervector. Rows `c*F .. c*F+F` of `t` belong to UBM component `c`.
#[derive(Debug, Clone)]
pub struct TotalVariability {
    t: Array2<f64>,
    ubm: DiagonalGmm,
    /// `T_c' Σ_c^{-1} T_c` per component.
    gram: Vec<Array2<f64>>,
    /// `Σ^{-1} T`, same shape as `t`.
    scaled_t: Array2<f64>,
}

impl PartialEq for TotalVariability {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t && self.ubm == other.ubm
    }
}

impl TotalVariability {
    pub fn new(t: Array2<f64>, ubm: DiagonalGmm) -> Result<Self> {
        let (c, f) = (ubm.components(), ubm.dim());
        if t.nrows() != c * f {
            return Err(Error::validation(format!(
                "T has {} rows, UBM supervector has {}",
                t.nrows(),
                c * f
            )));
        }
        if t.ncols() == 0 || t.ncols() > c * f {
            return Err(Error::config(format!(
                "i-vector rank {} must be in 1..={}",
                t.ncols(),
                c * f
            )));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("T contains non-finite values"));
        }
        let mut scaled_t = t.clone();
        for comp in 0..c {
            for d in 0..f {
                let inv = 1.0 / ubm.variances()[[comp, d]];
                scaled_t.row_mut(comp * f + d).mapv_inplace(|v| v * inv);
            }
        }
        let gram = (0..c)
            .map(|comp| {
                let rows = comp * f..(comp + 1) * f;
                let block = t.slice(ndarray::s![rows.clone(), ..]);
                let scaled = scaled_t.slice(ndarray::s![rows, ..]);
                block.t().dot(&scaled)
            })
            .collect();
        Ok(TotalVariability {
            t,
            ubm,
            gram,
            scaled_t,
        })
    }

    pub fn rank(&self) -> usize {
        self.t.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.t
    }

    pub fn ubm(&self) -> &DiagonalGmm {
        &self.ubm
    }

    fn check_stats(&self, stats: &BaumWelchStats) -> Result<()> {
        if stats.components() != self.ubm.components() || stats.dim() != self.ubm.dim() {
            return Err(Error::validation(format!(
                "statistics are {}×{}, extractor expects {}×{}",
                stats.components(),
                stats.dim(),
                self.ubm.components(),
                self.ubm.dim()
            )));
        }
        Ok(())
    }

    /// Posterior precision `L = I + Σ_c N_c T_c' Σ_c^{-1} T_c`.
    pub fn precision(&self, stats: &BaumWelchStats) -> Result<Array2<f64>> {
        self.check_stats(stats)?;
        let r = self.rank();
        let mut l = Array2::<f64>::eye(r);
        for (n, g) in stats.zeroth.iter().zip(&self.gram) {
            if *n != 0.0 {
                l.scaled_add(*n, g);
            }
        }
        Ok(l)
    }

    /// Linear term `Σ_c T_c' Σ_c^{-1} f̃_c`.
    pub fn linear_term(&self, stats: &BaumWelchStats) -> Result<Array1<f64>> {
        self.check_stats(stats)?;
        let f = stats
            .first_centered
            .as_standard_layout()
            .into_shape_with_order(self.t.nrows())
            .expect("contiguous statistics");
        Ok(self.scaled_t.t().dot(&f))
    }

    /// Posterior mean and the factorized precision.
    pub(crate) fn posterior(&self, stats: &BaumWelchStats) -> Result<(Array1<f64>, Cholesky)> {
        let l = self.precision(stats)?;
        let b = self.linear_term(stats)?;
        let chol = Cholesky::new(l.view())
            .ok_or_else(|| Error::numerical("i-vector precision matrix is not positive definite"))?;
        Ok((chol.solve(b.view()), chol))
    }

    /// Short digest of the UBM this extractor was trained against.
    pub fn ubm_checksum(&self) -> String {
        ubm_checksum(&self.ubm)
    }

    pub fn to_document(&self) -> TvDocument {
        TvDocument {
            format_version: TV_FORMAT_VERSION,
            rank: self.rank(),
            components: self.ubm.components(),
            dim: self.ubm.dim(),
            t: self.t.iter().copied().collect(),
            ubm_checksum: self.ubm_checksum(),
        }
    }

    /// Rebuilds the model; `ubm` must be the model the document was trained
    /// against.
    pub fn from_document(doc: &TvDocument, ubm: DiagonalGmm) -> Result<Self> {
        if doc.format_version != TV_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported total-variability format version {}",
                doc.format_version
            )));
        }
        if doc.components != ubm.components() || doc.dim != ubm.dim() {
            return Err(Error::validation("total-variability document does not match UBM shape"));
        }
        let sum = ubm_checksum(&ubm);
        if sum != doc.ubm_checksum {
            return Err(Error::validation(format!(
                "UBM checksum {sum} does not match document's {}",
                doc.ubm_checksum
            )));
        }
        let t = Array2::from_shape_vec((doc.components * doc.dim, doc.rank), doc.t.clone())
            .map_err(|e| Error::Format(format!("T matrix: {e}")))?;
        TotalVariability::new(t, ubm)
    }
}

/// SHA-256 over the bit patterns of the UBM parameters, first 16 hex digits.
pub fn ubm_checksum(ubm: &DiagonalGmm) -> String {
    let mut h = Sha256::new();
    h.update((ubm.components() as u64).to_le_bytes());
    h.update((ubm.dim() as u64).to_le_bytes());
    for v in ubm.weights().iter().chain(ubm.means().iter()).chain(ubm.variances().iter()) {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// JSON form of a [`TotalVariability`]; `T` is stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvDocument {
    pub format_version: u32,
    #[serde(rename = "R")]
    pub rank: usize,
    #[serde(rename = "C")]
    pub components: usize,
    #[serde(rename = "F")]
    pub dim: usize,
    #[serde(rename = "T")]
    pub t: Vec<f64>,
    pub ubm_checksum: String,
}

/// Random Gaussian T with entries of scale `0.1·sqrt(mean UBM variance)`.
pub fn tv_init(ubm: &DiagonalGmm, rank: usize, seed: u64) -> Result<TotalVariability> {
    tv_init_scaled(ubm, rank, seed, DEFAULT_INIT_SCALE)
}

/// As [`tv_init`] with an explicit scale factor; 0 gives the zero map.
pub fn tv_init_scaled(
    ubm: &DiagonalGmm,
    rank: usize,
    seed: u64,
    scale_factor: f64,
) -> Result<TotalVariability> {
    let rows = ubm.components() * ubm.dim();
    if rank == 0 || rank > rows {
        return Err(Error::config(format!("i-vector rank {rank} must be in 1..={rows}")));
    }
    if !(scale_factor.is_finite() && scale_factor >= 0.0) {
        return Err(Error::config("T init scale must be finite and non-negative"));
    }
    let scale = scale_factor * ubm.variances().mean().unwrap_or(1.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = Array2::from_shape_simple_fn((rows, rank), || scale * rng.sample::<f64, _>(StandardNormal));
    TotalVariability::new(t, ubm.clone())
}

/// Posterior mean of the i-vector given an epoch's statistics, with prior
/// `w ~ N(0, I)`.
pub fn extract_ivector(tv: &TotalVariability, stats: &BaumWelchStats) -> Result<Array1<f64>> {
    Ok(tv.posterior(stats)?.0)
}

/// Extracts every epoch in parallel, in input order.
pub fn extract_many(tv: &TotalVariability, stats: &[BaumWelchStats]) -> Result<Vec<Array1<f64>>> {
    use rayon::prelude::*;
    stats.par_iter().map(|s| extract_ivector(tv, s)).collect()
}

pub(crate) fn as_matrix(rows: &[IVector]) -> Result<Array2<f64>> {
    let dim = rows.first().map_or(0, |v| v.w.len());
    if rows.iter().any(|v| v.w.len() != dim) {
        return Err(Error::validation("i-vectors have inconsistent dimensions"));
    }
    Ok(Array2::from_shape_fn((rows.len(), dim), |(i, d)| rows[i].w[d]))
}
