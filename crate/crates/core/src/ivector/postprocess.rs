use ndarray::{s, Array2};

use super::{as_matrix, IVector};
use crate::error::{Error, Result};
use crate::features::{sma_values, GmvnStats};

/// Where the normalization statistics come from.
#[derive(Debug, Clone, Copy)]
pub enum GmvnMode<'a> {
    /// Fit on this series (training data).
    Fit { floor: f64 },
    /// Reuse statistics fit on training data.
    Apply(&'a GmvnStats),
}

/// Trailing moving average over each block's run of i-vectors, followed by
/// global mean and variance normalization.
///
/// The series must be strictly increasing by epoch key. Returns the
/// processed series and the statistics that were applied.
pub fn postprocess_ivectors(
    series: &[IVector],
    window: usize,
    mode: GmvnMode<'_>,
) -> Result<(Vec<IVector>, GmvnStats)> {
    if window == 0 {
        return Err(Error::config("SMA window must be at least 1"));
    }
    if let Some(pair) = series.windows(2).find(|p| p[0].key >= p[1].key) {
        return Err(Error::validation(format!(
            "i-vector series is not in time order at {:?} -> {:?}",
            pair[0].key, pair[1].key
        )));
    }
    let raw = as_matrix(series)?;
    let mut smoothed = Array2::zeros(raw.raw_dim());
    let mut start = 0;
    while start < series.len() {
        let mut end = start + 1;
        while end < series.len() && series[end].key.same_block(&series[start].key) {
            end += 1;
        }
        let run = raw.slice(s![start..end, ..]).to_owned();
        smoothed
            .slice_mut(s![start..end, ..])
            .assign(&sma_values(&run, window)?);
        start = end;
    }
    let stats = match mode {
        GmvnMode::Fit { floor } => GmvnStats::fit_rows(std::iter::once(&smoothed), floor)?,
        GmvnMode::Apply(stats) => stats.clone(),
    };
    let normalized = if series.is_empty() {
        smoothed
    } else {
        stats.apply_values(&smoothed)?
    };
    let out = series
        .iter()
        .zip(normalized.rows())
        .map(|(v, row)| IVector {
            key: v.key,
            label: v.label,
            w: row.to_vec(),
        })
        .collect();
    Ok((out, stats))
}
