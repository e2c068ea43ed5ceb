//! Seeded synthetic corpus with the session/block structure of the
//! MATB-II recordings.
//!
//! Every frame is `class_mean[label] + subject_offset[subject]
//! + session_offset[subject, session] + noise`, per channel. Class means,
//! offsets and noise are independent standard normals scaled by
//! `class_separation`, `subject_offset_scale`, `session_offset_scale` and
//! `noise_scale`. Within a session the three blocks carry the three labels
//! in a seeded random order.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EpochDataset, EpochRecord, REFERENCE_FRAMES_PER_EPOCH, REFERENCE_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::montage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_subjects: usize,
    /// At most 3.
    pub n_sessions: usize,
    pub epochs_per_block: usize,
    pub n_channels: usize,
    pub frames_per_epoch: usize,
    pub sample_rate_hz: f64,
    pub class_separation: f64,
    pub subject_offset_scale: f64,
    pub session_offset_scale: f64,
    pub noise_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_subjects: 2,
            n_sessions: 2,
            epochs_per_block: 50,
            n_channels: montage::MONTAGE.len(),
            frames_per_epoch: REFERENCE_FRAMES_PER_EPOCH,
            sample_rate_hz: REFERENCE_SAMPLE_RATE_HZ,
            class_separation: 0.5,
            subject_offset_scale: 0.2,
            session_offset_scale: 0.1,
            noise_scale: 1.0,
        }
    }
}

impl SynthConfig {
    /// 15 subjects × 3 sessions × 3 blocks × 150 epochs (5-minute blocks cut
    /// into 2-second epochs).
    pub fn full_scale(seed: u64) -> Self {
        SynthConfig {
            seed,
            n_subjects: 15,
            n_sessions: 3,
            epochs_per_block: 150,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_subjects", self.n_subjects),
            ("n_sessions", self.n_sessions),
            ("epochs_per_block", self.epochs_per_block),
            ("n_channels", self.n_channels),
            ("frames_per_epoch", self.frames_per_epoch),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.n_sessions > 3 {
            return Err(Error::config("n_sessions must be at most 3"));
        }
        if self.n_subjects > u16::MAX as usize {
            return Err(Error::config("n_subjects too large"));
        }
        let scales = [
            ("class_separation", self.class_separation),
            ("subject_offset_scale", self.subject_offset_scale),
            ("session_offset_scale", self.session_offset_scale),
            ("noise_scale", self.noise_scale),
        ];
        for (name, v) in scales {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::config("sample_rate_hz must be positive"));
        }
        Ok(())
    }

    pub fn record_count(&self) -> usize {
        self.n_subjects * self.n_sessions * 3 * self.epochs_per_block
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn synth_generate(config: &SynthConfig) -> Result<EpochDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_ch = config.n_channels;
    let class_means: Vec<Vec<f64>> = (0..3)
        .map(|_| normal_vec(&mut rng, n_ch, config.class_separation))
        .collect();

    let mut records = Vec::with_capacity(config.record_count());
    for subject in 1..=config.n_subjects as u16 {
        let subject_offset = normal_vec(&mut rng, n_ch, config.subject_offset_scale);
        for session in 1..=config.n_sessions as u8 {
            let session_offset = normal_vec(&mut rng, n_ch, config.session_offset_scale);
            let mut order = Label::ALL;
            order.shuffle(&mut rng);
            for (block, label) in order.into_iter().enumerate() {
                let centre: Vec<f64> = (0..n_ch)
                    .map(|c| class_means[label.index()][c] + subject_offset[c] + session_offset[c])
                    .collect();
                for _ in 0..config.epochs_per_block {
                    let frames = Array2::from_shape_fn((config.frames_per_epoch, n_ch), |(_, c)| {
                        let noise: f64 = rng.sample(StandardNormal);
                        (centre[c] + config.noise_scale * noise) as f32
                    });
                    records.push(EpochRecord {
                        subject_id: subject,
                        session_id: session,
                        block_index: block as u8,
                        label,
                        frames,
                    });
                }
            }
        }
    }
    EpochDataset::new(montage::channel_names(n_ch), records, config.sample_rate_hz)
}
