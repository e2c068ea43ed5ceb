//! Frame-level featurization: channel selection or sub-region pooling,
//! trailing moving-average smoothing, global mean/variance normalization and
//! first-order deltas.

mod deltas;
mod gmvn;
mod grouping;
mod sma;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use deltas::append_deltas;
pub use gmvn::{apply_gmvn, fit_gmvn, GmvnStats, DEFAULT_GMVN_FLOOR};
pub use grouping::{apply_grouping, BundledGrouping, ChannelGrouping, GroupIndex, Pooling};
pub use sma::sma_smooth;
pub(crate) use sma::sma_values;

/// A time-ordered sequence of feature frames (`frame_count × feature_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    values: Array2<f64>,
}

impl FeatureSequence {
    /// Wraps `values`, rejecting non-finite entries and zero width.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::validation("feature dimension must be positive"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (t, d) = (pos / values.ncols(), pos % values.ncols());
            return Err(Error::validation(format!("non-finite feature at frame {t}, dim {d}")));
        }
        Ok(Self::from_finite(values))
    }

    pub(crate) fn from_finite(values: Array2<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        // Row-major storage keeps reductions identical to a reloaded copy.
        let values = if values.is_standard_layout() { values } else { values.as_standard_layout().into_owned() };
        FeatureSequence { values }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn frame_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.values.ncols()
    }
}
