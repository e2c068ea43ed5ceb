use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TotalVariability;
use crate::error::{Error, Result};
use crate::gmm::BaumWelchStats;
use crate::linalg::Cholesky;

/// Epochs per parallel work item.
const EPOCH_CHUNK: usize = 128;
/// Work items reduced per sequential step; bounds accumulator memory
/// independently of the thread count.
const CHUNKS_PER_STEP: usize = 8;
const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvTrainConfig {
    pub iterations: usize,
    /// Rescale T after each M-step so the i-vector posteriors have
    /// identity second moment.
    pub min_divergence: bool,
}

impl Default for TvTrainConfig {
    fn default() -> Self {
        TvTrainConfig {
            iterations: 5,
            min_divergence: true,
        }
    }
}

struct Accumulators {
    /// Row c holds `Σ_u N_uc E[w_u w_u']`, flattened R×R.
    a: Array2<f64>,
    /// `Σ_u f̃_u E[w_u]'`, (C·F)×R.
    c: Array2<f64>,
    /// `Σ_u E[w_u w_u']`.
    eww: Array2<f64>,
}

impl Accumulators {
    fn zeros(components: usize, rows: usize, rank: usize) -> Self {
        Accumulators {
            a: Array2::zeros((components, rank * rank)),
            c: Array2::zeros((rows, rank)),
            eww: Array2::zeros((rank, rank)),
        }
    }

    fn add(&mut self, other: &Accumulators) {
        self.a += &other.a;
        self.c += &other.c;
        self.eww += &other.eww;
    }
}

/// Runs `config.iterations` EM iterations over the per-epoch statistics.
pub fn tv_train(
    tv: &TotalVariability,
    all_stats: &[BaumWelchStats],
    config: &TvTrainConfig,
) -> Result<TotalVariability> {
    if all_stats.is_empty() {
        return Err(Error::validation("total-variability training needs at least one epoch"));
    }
    for s in all_stats {
        tv.check_stats(s)?;
    }
    let mut current = tv.clone();
    for iter in 0..config.iterations {
        let acc = e_step(&current, all_stats)?;
        let mut t = m_step(&current, &acc, iter)?;
        if config.min_divergence {
            let mean = acc.eww.mapv(|v| v / all_stats.len() as f64);
            let chol = Cholesky::new(mean.view()).ok_or_else(|| {
                Error::numerical(format!("i-vector second moment is singular at iteration {iter}"))
            })?;
            t = t.dot(chol.lower());
        }
        current = TotalVariability::new(t, current.ubm.clone())?;
        log::debug!(
            "tv iteration {iter}: mean E[w'w] = {:.6}",
            acc.eww.diag().sum() / all_stats.len() as f64
        );
    }
    Ok(current)
}

fn e_step(tv: &TotalVariability, all_stats: &[BaumWelchStats]) -> Result<Accumulators> {
    let (comps, rank, rows) = (tv.ubm.components(), tv.rank(), tv.t.nrows());
    let gram_flat = Array2::from_shape_fn((comps, rank * rank), |(c, k)| tv.gram[c][[k / rank, k % rank]]);
    let mut total = Accumulators::zeros(comps, rows, rank);
    for step in all_stats.chunks(EPOCH_CHUNK * CHUNKS_PER_STEP) {
        let partials: Vec<Result<Accumulators>> = step
            .par_chunks(EPOCH_CHUNK)
            .map(|chunk| e_step_chunk(tv, gram_flat.view(), chunk))
            .collect();
        for p in partials {
            total.add(&p?);
        }
    }
    Ok(total)
}

fn e_step_chunk(
    tv: &TotalVariability,
    gram_flat: ArrayView2<'_, f64>,
    chunk: &[BaumWelchStats],
) -> Result<Accumulators> {
    let (comps, rank, rows) = (tv.ubm.components(), tv.rank(), tv.t.nrows());
    let u = chunk.len();
    let mut n = Array2::<f64>::zeros((u, comps));
    let mut f = Array2::<f64>::zeros((u, rows));
    for (i, s) in chunk.iter().enumerate() {
        n.row_mut(i).assign(&s.zeroth);
        f.row_mut(i)
            .assign(&s.first_centered.to_shape(rows).expect("contiguous statistics"));
    }
    let precisions = n.dot(&gram_flat);
    let linear = f.dot(&tv.scaled_t);

    let mut ew = Array2::<f64>::zeros((u, rank));
    let mut eww = Array2::<f64>::zeros((u, rank * rank));
    for i in 0..u {
        let mut l = precisions
            .row(i)
            .to_shape((rank, rank))
            .expect("square precision")
            .to_owned();
        for d in 0..rank {
            l[[d, d]] += 1.0;
        }
        let chol = Cholesky::new(l.view())
            .ok_or_else(|| Error::numerical("i-vector precision matrix is not positive definite"))?;
        let w = chol.solve(linear.row(i));
        let mut second = chol.inverse();
        for a in 0..rank {
            for b in 0..rank {
                second[[a, b]] += w[a] * w[b];
            }
        }
        ew.row_mut(i).assign(&w);
        eww.row_mut(i)
            .assign(&second.to_shape(rank * rank).expect("contiguous"));
    }
    Ok(Accumulators {
        a: n.t().dot(&eww),
        c: f.t().dot(&ew),
        eww: eww
            .sum_axis(Axis(0))
            .into_shape_with_order((rank, rank))
            .expect("square"),
    })
}

fn m_step(tv: &TotalVariability, acc: &Accumulators, iter: usize) -> Result<Array2<f64>> {
    let (comps, dim, rank) = (tv.ubm.components(), tv.ubm.dim(), tv.rank());
    let blocks: Vec<Array2<f64>> = (0..comps)
        .into_par_iter()
        .map(|comp| {
            let a = acc.a.row(comp).to_shape((rank, rank)).expect("square").to_owned();
            let chol = match Cholesky::new(a.view()) {
                Some(chol) => chol,
                None => {
                    log::warn!(
                        "tv iteration {iter}: M-step accumulator for component {comp} is singular, adding {RIDGE:e}·I"
                    );
                    let ridged = &a + &(Array2::<f64>::eye(rank) * RIDGE);
                    Cholesky::new(ridged.view()).ok_or_else(|| {
                        Error::numerical(format!(
                            "tv iteration {iter}: M-step accumulator for component {comp} is not positive definite"
                        ))
                    })?
                }
            };
            let c_block = acc.c.slice(s![comp * dim..(comp + 1) * dim, ..]);
            let mut out = Array2::zeros((dim, rank));
            for (d, row) in c_block.rows().into_iter().enumerate() {
                out.row_mut(d).assign(&chol.solve(row));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    Ok(ndarray::concatenate(Axis(0), &views).expect("matching block widths"))
}
