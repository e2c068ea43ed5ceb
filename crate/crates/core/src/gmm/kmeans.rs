//! k-means++ seeding followed by Lloyd iterations, used to initialize the
//! background model.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{DiagonalGmm, VarianceFloor, FRAME_CHUNK};
use crate::error::{Error, Result};

pub const DEFAULT_LLOYD_ITERATIONS: usize = 10;

/// Weight given to a cluster that ends up empty, before renormalization.
const EMPTY_CLUSTER_WEIGHT: f64 = 1e-10;

/// Seeded k-means initialization with the default 10 Lloyd iterations and
/// the data-derived variance floor.
pub fn kmeans_init(frames: ArrayView2<'_, f64>, components: usize, seed: u64) -> Result<DiagonalGmm> {
    let floor = VarianceFloor::from_data(frames);
    kmeans_init_with(frames, components, seed, DEFAULT_LLOYD_ITERATIONS, &floor)
}

pub fn kmeans_init_with(
    frames: ArrayView2<'_, f64>,
    components: usize,
    seed: u64,
    lloyd_iterations: usize,
    floor: &VarianceFloor,
) -> Result<DiagonalGmm> {
    let n = frames.nrows();
    let dim = frames.ncols();
    if components == 0 {
        return Err(Error::config("GMM needs at least one component"));
    }
    if n < components {
        return Err(Error::validation(format!(
            "{n} frames cannot initialize {components} components"
        )));
    }
    if floor.0.len() != dim {
        return Err(Error::validation("variance floor dimension mismatch"));
    }
    let frames = frames.as_standard_layout();
    let frames = frames.view();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus(frames, components, &mut rng);

    for _ in 0..lloyd_iterations {
        let assignment = assign(frames, centers.view());
        let (sums, counts) = cluster_sums(frames, &assignment, components);
        for c in 0..components {
            // Empty clusters keep their previous center.
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centers.row_mut(c).assign(&mean);
            }
        }
    }

    // Final statistics all come from one assignment so the means are exactly
    // the cluster means of that assignment.
    let assignment = assign(frames, centers.view());
    let (sums, counts) = cluster_sums(frames, &assignment, components);
    let global_mean = frames.sum_axis(Axis(0)) / n as f64;
    let global_var = frames
        .rows()
        .into_iter()
        .fold(Array1::<f64>::zeros(dim), |acc, x| acc + (&x - &global_mean).mapv(|z| z * z))
        / n as f64;

    let mut means = centers;
    let mut variances = Array2::<f64>::zeros((components, dim));
    let mut weights = Array1::<f64>::zeros(components);
    for c in 0..components {
        if counts[c] > 0 {
            means.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            weights[c] = counts[c] as f64 / n as f64;
        } else {
            variances.row_mut(c).assign(&global_var);
            weights[c] = EMPTY_CLUSTER_WEIGHT;
        }
    }
    for (x, &c) in frames.rows().into_iter().zip(&assignment) {
        let mean = means.row(c);
        let mut v = variances.row_mut(c);
        for d in 0..dim {
            let z = x[d] - mean[d];
            v[d] += z * z;
        }
    }
    for c in 0..components {
        if counts[c] > 0 {
            variances.row_mut(c).mapv_inplace(|s| s / counts[c] as f64);
        }
    }
    floor.apply(&mut variances);
    let total = weights.sum();
    weights.mapv_inplace(|w| w / total);
    DiagonalGmm::new(weights, means, variances)
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus(frames: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = frames.nrows();
    let mut centers = Array2::zeros((k, frames.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&frames.row(first));
    let mut d2: Vec<f64> = frames
        .rows()
        .into_iter()
        .map(|x| sq_dist(x, centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with existing centers.
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&frames.row(pick));
        let center = centers.row(c);
        d2.par_iter_mut()
            .zip(frames.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(d, x)| *d = d.min(sq_dist(x, center)));
    }
    centers
}

/// Nearest center per frame, using `|x-c|² = |x|² - 2x·c + |c|²` so each
/// chunk is one matrix product; `|x|²` does not affect the argmin.
fn assign(frames: ArrayView2<'_, f64>, centers: ArrayView2<'_, f64>) -> Vec<usize> {
    let norms: Array1<f64> = centers.rows().into_iter().map(|c| c.dot(&c)).collect();
    let chunks: Vec<Vec<usize>> = frames
        .axis_chunks_iter(Axis(0), FRAME_CHUNK)
        .into_par_iter()
        .map(|chunk| {
            let cross = chunk.dot(&centers.t());
            cross
                .rows()
                .into_iter()
                .map(|row| {
                    let mut best = (f64::INFINITY, 0);
                    for (c, (&xc, &n)) in row.iter().zip(&norms).enumerate() {
                        let d = n - 2.0 * xc;
                        if d < best.0 {
                            best = (d, c);
                        }
                    }
                    best.1
                })
                .collect()
        })
        .collect();
    chunks.concat()
}

fn cluster_sums(
    frames: ArrayView2<'_, f64>,
    assignment: &[usize],
    k: usize,
) -> (Array2<f64>, Vec<usize>) {
    let mut sums = Array2::zeros((k, frames.ncols()));
    let mut counts = vec![0usize; k];
    for (x, &c) in frames.rows().into_iter().zip(assignment) {
        let mut row = sums.row_mut(c);
        row += &x;
        counts[c] += 1;
    }
    (sums, counts)
}
