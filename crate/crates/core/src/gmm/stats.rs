use std::ops::{Add, AddAssign};

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use super::DiagonalGmm;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;

/// Zeroth- and centered first-order statistics of a sequence under a GMM.
#[derive(Debug, Clone, PartialEq)]
pub struct BaumWelchStats {
    /// Soft frame count per component.
    pub zeroth: Array1<f64>,
    /// `Σ_t γ_t(c) (x_t - mean_c)`, one row per component.
    pub first_centered: Array2<f64>,
}

impl BaumWelchStats {
    pub fn zeros(components: usize, dim: usize) -> Self {
        BaumWelchStats {
            zeroth: Array1::zeros(components),
            first_centered: Array2::zeros((components, dim)),
        }
    }

    pub fn components(&self) -> usize {
        self.zeroth.len()
    }

    pub fn dim(&self) -> usize {
        self.first_centered.ncols()
    }

    pub fn total_frames(&self) -> f64 {
        self.zeroth.sum()
    }

    /// Both statistics multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        BaumWelchStats {
            zeroth: &self.zeroth * alpha,
            first_centered: &self.first_centered * alpha,
        }
    }
}

impl AddAssign<&BaumWelchStats> for BaumWelchStats {
    fn add_assign(&mut self, rhs: &BaumWelchStats) {
        self.zeroth += &rhs.zeroth;
        self.first_centered += &rhs.first_centered;
    }
}

impl Add for &BaumWelchStats {
    type Output = BaumWelchStats;

    fn add(self, rhs: &BaumWelchStats) -> BaumWelchStats {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

pub fn accumulate_bw_stats(gmm: &DiagonalGmm, seq: &FeatureSequence) -> Result<BaumWelchStats> {
    if seq.feature_dim() != gmm.dim() {
        return Err(Error::validation(format!(
            "sequence dimension {} does not match GMM dimension {}",
            seq.feature_dim(),
            gmm.dim()
        )));
    }
    Ok(accumulate(&gmm.scorer(), seq))
}

/// Statistics for many sequences, computed in parallel, in input order.
pub fn accumulate_bw_stats_many(
    gmm: &DiagonalGmm,
    seqs: &[FeatureSequence],
) -> Result<Vec<BaumWelchStats>> {
    if let Some(bad) = seqs.iter().position(|s| s.feature_dim() != gmm.dim()) {
        return Err(Error::validation(format!(
            "sequence {bad} has dimension {}, GMM has {}",
            seqs[bad].feature_dim(),
            gmm.dim()
        )));
    }
    let scorer = gmm.scorer();
    Ok(seqs.par_iter().map(|s| accumulate(&scorer, s)).collect())
}

fn accumulate(scorer: &super::Scorer, seq: &FeatureSequence) -> BaumWelchStats {
    let block = scorer.block_posteriors(seq.values().view());
    let zeroth = block.post.sum_axis(Axis(0));
    let mut first_centered = block.post.t().dot(&block.shifted);
    first_centered -= &(scorer.offsets() * &zeroth.view().insert_axis(Axis(1)));
    BaumWelchStats { zeroth, first_centered }
}
