use log::debug;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::{DiagonalGmm, VarianceFloor, FRAME_CHUNK};
use crate::error::{Error, Result};

/// Soft count below which a component keeps its previous mean and variance.
const MIN_OCCUPANCY: f64 = 1e-8;
const MIN_WEIGHT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub iterations: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { iterations: 20 }
    }
}

/// Sufficient statistics of one E-step, taken about the scorer origin.
struct Accumulator {
    origin: Array1<f64>,
    occupancy: Array1<f64>,
    first: Array2<f64>,
    second: Array2<f64>,
    loglik: f64,
}

fn e_step(gmm: &DiagonalGmm, frames: ArrayView2<'_, f64>) -> Accumulator {
    let scorer = gmm.scorer();
    let partials: Vec<(Array1<f64>, Array2<f64>, Array2<f64>, f64)> = frames
        .axis_chunks_iter(Axis(0), FRAME_CHUNK)
        .into_par_iter()
        .map(|chunk| {
            let block = scorer.block_posteriors(chunk);
            let squared = block.shifted.mapv(|v| v * v);
            (
                block.post.sum_axis(Axis(0)),
                block.post.t().dot(&block.shifted),
                block.post.t().dot(&squared),
                block.loglik,
            )
        })
        .collect();
    let (c, f) = (gmm.components(), gmm.dim());
    let mut acc = Accumulator {
        origin: scorer.origin().clone(),
        occupancy: Array1::zeros(c),
        first: Array2::zeros((c, f)),
        second: Array2::zeros((c, f)),
        loglik: 0.0,
    };
    for (occ, first, second, ll) in &partials {
        acc.occupancy += occ;
        acc.first += first;
        acc.second += second;
        acc.loglik += ll;
    }
    acc
}

fn m_step(gmm: &DiagonalGmm, acc: &Accumulator, n_frames: usize, floor: &VarianceFloor) -> Result<DiagonalGmm> {
    let (c, f) = (gmm.components(), gmm.dim());
    let mut means = gmm.means.clone();
    let mut variances = gmm.variances.clone();
    let mut weights = Array1::zeros(c);
    for k in 0..c {
        let occ = acc.occupancy[k];
        weights[k] = (occ / n_frames as f64).max(MIN_WEIGHT);
        if occ < MIN_OCCUPANCY {
            continue;
        }
        for d in 0..f {
            let mean = acc.first[[k, d]] / occ;
            means[[k, d]] = acc.origin[d] + mean;
            variances[[k, d]] = acc.second[[k, d]] / occ - mean * mean;
        }
    }
    floor.apply(&mut variances);
    let total = weights.sum();
    weights.mapv_inplace(|w| w / total);
    DiagonalGmm::new(weights, means, variances)
}

/// Runs `iterations` EM steps from `init`. The returned trace holds the
/// total data log-likelihood of the model after each iteration.
pub fn em_fit(
    frames: ArrayView2<'_, f64>,
    init: &DiagonalGmm,
    iterations: usize,
    floor: &VarianceFloor,
) -> Result<(DiagonalGmm, Vec<f64>)> {
    init.check_dim(frames.ncols())?;
    if floor.0.len() != init.dim() {
        return Err(Error::validation("variance floor dimension mismatch"));
    }
    if floor.0.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::config("variance floor must be positive"));
    }
    if frames.nrows() == 0 {
        return Err(Error::validation("EM needs at least one frame"));
    }
    let frames = frames.as_standard_layout();
    let mut model = init.clone();
    let mut trace = Vec::with_capacity(iterations);
    let mut acc = e_step(&model, frames.view());
    for it in 0..iterations {
        model = m_step(&model, &acc, frames.nrows(), floor)
            .map_err(|e| Error::numerical(format!("EM iteration {}: {e}", it + 1)))?;
        acc = e_step(&model, frames.view());
        if !acc.loglik.is_finite() {
            return Err(Error::numerical(format!(
                "EM iteration {}: non-finite log-likelihood",
                it + 1
            )));
        }
        debug!("EM iteration {}: log-likelihood {:.6}", it + 1, acc.loglik);
        trace.push(acc.loglik);
    }
    Ok((model, trace))
}
