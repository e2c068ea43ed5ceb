use ndarray::{concatenate, Array2, Axis};

use super::FeatureSequence;

/// Appends first-order deltas `(x[t+1] - x[t-1]) / 2`, replicating the first
/// and last frame at the edges. The output has twice the input width, with
/// the original values first.
pub fn append_deltas(seq: &FeatureSequence) -> FeatureSequence {
    let x = seq.values();
    let n = x.nrows();
    let mut delta = Array2::zeros(x.raw_dim());
    if n > 0 {
        for t in 0..n {
            let prev = x.row(t.saturating_sub(1));
            let next = x.row((t + 1).min(n - 1));
            let mut out = delta.row_mut(t);
            for d in 0..x.ncols() {
                out[d] = (next[d] - prev[d]) / 2.0;
            }
        }
    }
    let values = concatenate(Axis(1), &[x.view(), delta.view()]).expect("matching row counts");
    FeatureSequence::from_finite(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, s};

    #[test]
    fn central_differences_with_replication() {
        let seq = FeatureSequence::new(array![[1.0], [2.0], [4.0]]).unwrap();
        let out = append_deltas(&seq);
        assert_eq!(out.feature_dim(), 2);
        assert_eq!(out.values().column(1).to_vec(), vec![0.5, 1.5, 1.0]);
    }

    #[test]
    fn constants_have_zero_deltas() {
        let seq = FeatureSequence::new(Array2::from_elem((9, 3), -2.5)).unwrap();
        let out = append_deltas(&seq);
        assert!(out.values().slice(s![.., 3..]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubles_width_and_keeps_originals() {
        let seq = FeatureSequence::new(Array2::from_shape_fn((4, 21), |(t, d)| (t * d) as f64)).unwrap();
        let out = append_deltas(&seq);
        assert_eq!(out.feature_dim(), 42);
        assert_eq!(out.values().slice(s![.., ..21]), seq.values());
    }

    #[test]
    fn single_frame() {
        let seq = FeatureSequence::new(array![[3.0, 4.0]]).unwrap();
        assert_eq!(append_deltas(&seq).values(), &array![[3.0, 4.0, 0.0, 0.0]]);
    }
}
