use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::FeatureSequence;
use crate::error::{Error, Result};

pub const DEFAULT_GMVN_FLOOR: f64 = 1e-6;

/// Per-dimension mean and (floored) population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmvnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub floor: f64,
}

impl GmvnStats {
    /// Zero mean, unit deviation.
    pub fn identity(dim: usize) -> Self {
        GmvnStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
            floor: DEFAULT_GMVN_FLOOR,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub(crate) fn fit_rows<'a>(
        rows: impl IntoIterator<Item = &'a Array2<f64>> + Clone,
        floor: f64,
    ) -> Result<Self> {
        if !(floor.is_finite() && floor > 0.0) {
            return Err(Error::config("GMVN floor must be positive"));
        }
        let mut dim = None;
        let mut count = 0usize;
        for m in rows.clone() {
            match dim {
                None => dim = Some(m.ncols()),
                Some(d) if d != m.ncols() => {
                    return Err(Error::validation(format!(
                        "GMVN inputs disagree on dimension: {d} vs {}",
                        m.ncols()
                    )))
                }
                _ => {}
            }
            count += m.nrows();
        }
        let dim = dim.unwrap_or(0);
        if count == 0 {
            return Err(Error::validation("GMVN needs at least one frame"));
        }
        // Two passes: mean first, then centered squares.
        let mut sum = Array1::<f64>::zeros(dim);
        for m in rows.clone() {
            sum += &m.sum_axis(Axis(0));
        }
        let mean = sum / count as f64;
        let mut sq = Array1::<f64>::zeros(dim);
        for m in rows {
            for row in m.rows() {
                for d in 0..dim {
                    let c = row[d] - mean[d];
                    sq[d] += c * c;
                }
            }
        }
        let std = sq.mapv(|s| (s / count as f64).sqrt().max(floor));
        Ok(GmvnStats {
            mean: mean.to_vec(),
            std: std.to_vec(),
            floor,
        })
    }

    pub(crate) fn apply_values(&self, values: &Array2<f64>) -> Result<Array2<f64>> {
        if values.ncols() != self.dim() {
            return Err(Error::validation(format!(
                "GMVN stats have dimension {}, input has {}",
                self.dim(),
                values.ncols()
            )));
        }
        let mut out = values.clone();
        for mut row in out.rows_mut() {
            for d in 0..self.dim() {
                row[d] = (row[d] - self.mean[d]) / self.std[d];
            }
        }
        Ok(out)
    }
}

/// Fits global normalization statistics over every frame of every sequence.
pub fn fit_gmvn(seqs: &[FeatureSequence], floor: f64) -> Result<GmvnStats> {
    GmvnStats::fit_rows(seqs.iter().map(|s| s.values()), floor)
}

/// `out[t][d] = (in[t][d] - mean[d]) / std[d]`.
pub fn apply_gmvn(seq: &FeatureSequence, stats: &GmvnStats) -> Result<FeatureSequence> {
    FeatureSequence::new(stats.apply_values(seq.values())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn seq(v: Array2<f64>) -> FeatureSequence {
        FeatureSequence::new(v).unwrap()
    }

    #[test]
    fn population_statistics() {
        let stats = fit_gmvn(&[seq(array![[0.0]]), seq(array![[2.0]])], 1e-6).unwrap();
        assert_eq!(stats.mean, vec![1.0]);
        assert_eq!(stats.std, vec![1.0]);
    }

    #[test]
    fn constant_dimension_gets_floor() {
        let stats = fit_gmvn(&[seq(array![[5.0, 1.0], [5.0, 2.0]])], 1e-6).unwrap();
        assert_eq!(stats.std[0], 1e-6);
        assert!(stats.std[1] > 1e-6);
    }

    #[test]
    fn apply_examples() {
        let stats = GmvnStats { mean: vec![1.0], std: vec![1.0], floor: 1e-6 };
        assert_eq!(apply_gmvn(&seq(array![[4.0]]), &stats).unwrap().values()[[0, 0]], 3.0);
        let s = seq(array![[0.3, -7.0]]);
        assert_eq!(apply_gmvn(&s, &GmvnStats::identity(2)).unwrap(), s);
        assert!(apply_gmvn(&s, &GmvnStats::identity(3)).is_err());
    }

    #[test]
    fn fit_then_apply_standardizes() {
        let data: Vec<FeatureSequence> = (0..4)
            .map(|k| {
                seq(Array2::from_shape_fn((50, 3), |(t, d)| {
                    ((t * 7 + d * 13 + k * 5) as f64).sin() * (d + 1) as f64 + 10.0 * d as f64
                }))
            })
            .collect();
        let stats = fit_gmvn(&data, DEFAULT_GMVN_FLOOR).unwrap();
        let normed: Vec<_> = data.iter().map(|s| apply_gmvn(s, &stats).unwrap()).collect();
        let refit = fit_gmvn(&normed, DEFAULT_GMVN_FLOOR).unwrap();
        for d in 0..3 {
            assert!(refit.mean[d].abs() < 1e-8);
            assert!((refit.std[d].powi(2) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_frames_rejected() {
        assert!(matches!(fit_gmvn(&[], 1e-6), Err(Error::Validation(_))));
        let empty = FeatureSequence::new(Array2::zeros((0, 2))).unwrap();
        assert!(matches!(fit_gmvn(&[empty], 1e-6), Err(Error::Validation(_))));
    }
}
