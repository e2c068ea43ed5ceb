use ndarray::Array2;

use super::FeatureSequence;
use crate::error::{Error, Result};

/// Trailing moving average: `out[t] = mean(in[max(0, t-window+1)..=t])`
/// per dimension, so early frames average over the history available.
pub fn sma_smooth(seq: &FeatureSequence, window: usize) -> Result<FeatureSequence> {
    Ok(FeatureSequence::from_finite(sma_values(seq.values(), window)?))
}

pub(crate) fn sma_values(values: &Array2<f64>, window: usize) -> Result<Array2<f64>> {
    if window == 0 {
        return Err(Error::config("moving-average window must be at least 1"));
    }
    let mut out = Array2::zeros(values.raw_dim());
    for (input, mut output) in values.columns().into_iter().zip(out.columns_mut()) {
        // Direct window sums: no running-sum drift, and identical inputs
        // give identical outputs regardless of position.
        for t in 0..input.len() {
            let start = (t + 1).saturating_sub(window);
            let slice = input.slice(ndarray::s![start..=t]);
            output[t] = slice.sum() / (t + 1 - start) as f64;
        }
    }
    Ok(out)
}
