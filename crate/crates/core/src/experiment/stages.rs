//! Pure pipeline stages. Each takes in-memory inputs and returns in-memory
//! outputs; persistence lives in the pipeline driver.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MlpValidation, SmaStage, SystemSpec, TvConfig, UbmConfig};
use crate::classifier::{argmax_label, train_mlp, LabelledSet, MlpModel, TrainConfig};
use crate::dataset::Split;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::features::{append_deltas, sma_smooth, FeatureSequence, GmvnStats};
use crate::gmm::{accumulate_bw_stats, em_fit, kmeans_init_with, BaumWelchStats, DiagonalGmm, VarianceFloor};
use crate::ivector::{
    extract_ivector, postprocess_ivectors, tv_init_scaled, tv_train, GmvnMode, IVector,
    TotalVariability, TvTrainConfig,
};
use crate::label::{EpochKey, Label, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Side {
    Train = 0,
    Test = 1,
}

/// A per-epoch value with the epoch's identity, label and split side.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyed<T> {
    pub key: EpochKey,
    pub label: Label,
    pub side: Side,
    pub value: T,
}

impl<T> Keyed<T> {
    pub fn map<U>(&self, value: U) -> Keyed<U> {
        Keyed {
            key: self.key,
            label: self.label,
            side: self.side,
            value,
        }
    }
}

fn side<T>(items: &[Keyed<T>], side: Side) -> impl Iterator<Item = &Keyed<T>> {
    items.iter().filter(move |i| i.side == side)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Featurized {
    /// Training epochs first, then test epochs, each in time order.
    pub items: Vec<Keyed<FeatureSequence>>,
    /// Frame-level normalization, when smoothing runs on frames.
    pub frame_gmvn: Option<GmvnStats>,
}

/// Channel grouping and deltas; with frame-stage smoothing also the moving
/// average (over statics and deltas) and normalization fit on training
/// frames.
pub fn featurize(
    system: &SystemSpec,
    channel_names: &[String],
    split: &Split<'_>,
    gmvn_floor: f64,
) -> Result<Featurized> {
    let index = system.grouping.resolve(channel_names)?;
    let epochs: Vec<_> = split
        .train
        .iter()
        .map(|e| (e, Side::Train))
        .chain(split.test.iter().map(|e| (e, Side::Test)))
        .collect();
    let frame_sma = system.sma_stage == SmaStage::Frame;
    let items: Vec<Keyed<FeatureSequence>> = epochs
        .par_iter()
        .map(|(e, side)| {
            let mut seq = append_deltas(&index.apply(e.record.frames.view())?);
            if frame_sma {
                seq = sma_smooth(&seq, system.sma_window)?;
            }
            Ok(Keyed {
                key: e.key,
                label: e.record.label,
                side: *side,
                value: seq,
            })
        })
        .collect::<Result<_>>()?;
    if !frame_sma {
        return Ok(Featurized {
            items,
            frame_gmvn: None,
        });
    }
    let train_rows: Vec<&Array2<f64>> = side(&items, Side::Train).map(|i| i.value.values()).collect();
    let stats = GmvnStats::fit_rows(train_rows.iter().copied(), gmvn_floor)?;
    let items = items
        .into_par_iter()
        .map(|i| {
            let v = FeatureSequence::from_finite(stats.apply_values(i.value.values())?);
            Ok(i.map(v))
        })
        .collect::<Result<_>>()?;
    Ok(Featurized {
        items,
        frame_gmvn: Some(stats),
    })
}

/// k-means initialization followed by EM on the pooled training frames.
/// Returns the model and its per-iteration log-likelihood trace.
pub fn train_ubm(
    features: &[Keyed<FeatureSequence>],
    config: &UbmConfig,
    seed: u64,
) -> Result<(DiagonalGmm, Vec<f64>)> {
    let train: Vec<&FeatureSequence> = side(features, Side::Train).map(|i| &i.value).collect();
    let dim = train
        .first()
        .map(|s| s.feature_dim())
        .ok_or_else(|| Error::validation("no training features for the UBM"))?;
    let stride = config.frame_stride.max(1);
    let mut rows = Vec::new();
    let mut n = 0usize;
    let mut counter = 0usize;
    for seq in train {
        for row in seq.values().rows() {
            if counter % stride == 0 {
                rows.extend(row.iter().copied());
                n += 1;
            }
            counter += 1;
        }
    }
    let frames = Array2::from_shape_vec((n, dim), rows).expect("rows have equal width");
    let floor = VarianceFloor::from_data(frames.view());
    log::info!(
        "training UBM: {} components on {n} frames of dimension {dim}",
        config.components
    );
    let init = kmeans_init_with(frames.view(), config.components, seed, config.kmeans_iterations, &floor)?;
    em_fit(frames.view(), &init, config.em_iterations, &floor)
}

pub fn accumulate_stats(
    ubm: &DiagonalGmm,
    features: &[Keyed<FeatureSequence>],
) -> Result<Vec<Keyed<BaumWelchStats>>> {
    features
        .par_iter()
        .map(|i| Ok(i.map(accumulate_bw_stats(ubm, &i.value)?)))
        .collect()
}

/// Seeded T initialization and EM on the training epochs' statistics.
pub fn train_tv(
    ubm: &DiagonalGmm,
    stats: &[Keyed<BaumWelchStats>],
    config: &TvConfig,
    seed: u64,
) -> Result<TotalVariability> {
    let train: Vec<BaumWelchStats> = side(stats, Side::Train).map(|i| i.value.clone()).collect();
    let init = tv_init_scaled(ubm, config.rank, seed, config.init_scale)?;
    log::info!(
        "training total variability: rank {} on {} epochs",
        config.rank,
        train.len()
    );
    tv_train(
        &init,
        &train,
        &TvTrainConfig {
            iterations: config.iterations,
            min_divergence: config.min_divergence,
        },
    )
}

pub fn extract(tv: &TotalVariability, stats: &[Keyed<BaumWelchStats>]) -> Result<Vec<Keyed<Vec<f64>>>> {
    stats
        .par_iter()
        .map(|i| Ok(i.map(extract_ivector(tv, &i.value)?.to_vec())))
        .collect()
}

fn series(items: &[Keyed<Vec<f64>>], s: Side) -> Vec<IVector> {
    side(items, s)
        .map(|i| IVector {
            key: i.key,
            label: i.label,
            w: i.value.clone(),
        })
        .collect()
}

/// Moving average within each block, then normalization fit on the
/// training series and applied to both sides.
pub fn postprocess(
    raw: &[Keyed<Vec<f64>>],
    window: usize,
    gmvn_floor: f64,
) -> Result<(Vec<Keyed<Vec<f64>>>, GmvnStats)> {
    let (train, stats) = postprocess_ivectors(&series(raw, Side::Train), window, GmvnMode::Fit { floor: gmvn_floor })?;
    let (test, _) = postprocess_ivectors(&series(raw, Side::Test), window, GmvnMode::Apply(&stats))?;
    let out = train
        .into_iter()
        .map(|v| (v, Side::Train))
        .chain(test.into_iter().map(|v| (v, Side::Test)))
        .map(|(v, side)| Keyed {
            key: v.key,
            label: v.label,
            side,
            value: v.w,
        })
        .collect();
    Ok((out, stats))
}

fn matrix(items: &[&Keyed<Vec<f64>>]) -> Array2<f64> {
    let dim = items.first().map_or(0, |i| i.value.len());
    Array2::from_shape_fn((items.len(), dim), |(r, c)| items[r].value[c])
}

pub fn train_classifier(
    ivectors: &[Keyed<Vec<f64>>],
    config: &TrainConfig,
    validation: MlpValidation,
) -> Result<MlpModel> {
    let train: Vec<&Keyed<Vec<f64>>> = side(ivectors, Side::Train).collect();
    let last = train.iter().map(|i| i.key.session).max();
    let first = train.iter().map(|i| i.key.session).min();
    let hold_out = match (validation, first, last) {
        (MlpValidation::LastTrainSession, Some(a), Some(b)) if a != b => Some(b),
        (MlpValidation::LastTrainSession, _, _) => {
            log::info!("only one training session; training the classifier without validation");
            None
        }
        _ => None,
    };
    let (fit, val): (Vec<_>, Vec<_>) = train
        .into_iter()
        .partition(|i| Some(i.key.session) != hold_out);
    let x = matrix(&fit);
    let y: Vec<Label> = fit.iter().map(|i| i.label).collect();
    let vx = matrix(&val);
    let vy: Vec<Label> = val.iter().map(|i| i.label).collect();
    let validation = hold_out.map(|_| LabelledSet {
        inputs: vx.view(),
        labels: &vy,
    });
    log::info!(
        "training classifier on {} epochs ({} held out)",
        fit.len(),
        val.len()
    );
    train_mlp(
        LabelledSet {
            inputs: x.view(),
            labels: &y,
        },
        config,
        validation,
    )
}

/// One system's decision on one test epoch, with the true label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(flatten)]
    pub key: EpochKey,
    pub label: Label,
    pub system_name: String,
    pub posteriors: [f64; NUM_CLASSES],
    pub predicted: Label,
}

pub fn predict(model: &MlpModel, ivectors: &[Keyed<Vec<f64>>], system_name: &str) -> Result<Vec<Prediction>> {
    let test: Vec<&Keyed<Vec<f64>>> = side(ivectors, Side::Test).collect();
    if test.is_empty() {
        return Ok(Vec::new());
    }
    let probs = model.predict_proba_batch(matrix(&test).view())?;
    Ok(test
        .iter()
        .zip(probs.rows())
        .map(|(i, p)| {
            let posteriors = [p[0], p[1], p[2]];
            Prediction {
                key: i.key,
                label: i.label,
                system_name: system_name.to_string(),
                posteriors,
                predicted: argmax_label(&posteriors),
            }
        })
        .collect())
}

pub fn evaluate_predictions(predictions: &[Prediction], system: &str, split: &str) -> Result<EvalReport> {
    let pred: Vec<(EpochKey, Label)> = predictions.iter().map(|p| (p.key, p.predicted)).collect();
    let truth: Vec<(EpochKey, Label)> = predictions.iter().map(|p| (p.key, p.label)).collect();
    evaluate(&pred, &truth, system, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_split, synth_generate, SplitSpec, SynthConfig};
    use crate::experiment::ExperimentConfig;

    fn small() -> crate::dataset::EpochDataset {
        synth_generate(&SynthConfig {
            seed: 3,
            n_subjects: 1,
            n_sessions: 2,
            epochs_per_block: 6,
            frames_per_epoch: 40,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn system(stage: SmaStage) -> SystemSpec {
        let mut c = ExperimentConfig::for_preset("maxP21-SMA16", "x", SplitSpec::subject_independent([1], [2])).unwrap();
        c.system.sma_stage = Some(stage);
        c.system_spec().unwrap()
    }

    #[test]
    fn featurize_orders_train_then_test() {
        let ds = small();
        let split = make_split(&ds, &SplitSpec::subject_independent([1], [2])).unwrap();
        let f = featurize(&system(SmaStage::Ivector), ds.channel_names(), &split, 1e-6).unwrap();
        assert_eq!(f.items.len(), 36);
        assert!(f.items[..18].iter().all(|i| i.side == Side::Train && i.key.session == 1));
        assert!(f.items[18..].iter().all(|i| i.side == Side::Test && i.key.session == 2));
        assert_eq!(f.items[0].value.feature_dim(), 42);
        assert_eq!(f.items[0].value.frame_count(), 40);
        assert!(f.frame_gmvn.is_none());
    }

    #[test]
    fn frame_stage_normalizes_training_frames() {
        let ds = small();
        let split = make_split(&ds, &SplitSpec::subject_independent([1], [2])).unwrap();
        let f = featurize(&system(SmaStage::Frame), ds.channel_names(), &split, 1e-6).unwrap();
        assert!(f.frame_gmvn.is_some());
        let train: Vec<_> = f.items.iter().filter(|i| i.side == Side::Train).collect();
        let n: usize = train.iter().map(|i| i.value.frame_count()).sum();
        for d in [0, 25] {
            let mean: f64 = train.iter().map(|i| i.value.values().column(d).sum()).sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn predictions_carry_truth_and_argmax() {
        let items: Vec<Keyed<Vec<f64>>> = (0..4)
            .map(|i| Keyed {
                key: EpochKey {
                    subject: 1,
                    session: 1,
                    block: 0,
                    index: i,
                },
                label: Label::Medium,
                side: if i < 2 { Side::Train } else { Side::Test },
                value: vec![i as f64, 1.0],
            })
            .collect();
        let model = MlpModel::zeros(&[2, 3]).unwrap();
        let preds = predict(&model, &items, "sys").unwrap();
        assert_eq!(preds.len(), 2);
        assert!(preds.iter().all(|p| p.predicted == Label::Easy && p.label == Label::Medium));
        let report = evaluate_predictions(&preds, "sys", "split").unwrap();
        assert_eq!(report.overall_accuracy, 0.0);
        let line = serde_json::to_string(&preds[0]).unwrap();
        assert!(line.starts_with(r#"{"subject":1,"session":1,"block":0,"index":2,"label":"medium""#));
        assert_eq!(serde_json::from_str::<Prediction>(&line).unwrap(), preds[0]);
    }
}
