//! Labeled EEG epochs: in-memory container, the EPO1 file format, CSV
//! import, synthetic generation and train/test splits.

mod csv_import;
mod epo;
mod split;
mod synth;

use std::collections::{BTreeSet, HashMap, HashSet};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::label::{EpochKey, Label};

pub use csv_import::{import_csv, CsvManifest, CsvManifestEntry};
pub use epo::{load_epoch_file, read_epochs, write_epoch_file, write_epochs, EPO_MAGIC, EPO_VERSION};
pub use split::{make_split, KeyedEpoch, Split, SplitMode, SplitSpec};
pub use synth::{synth_generate, SynthConfig};

/// Frames per epoch in the reference recordings (2 s at 250 Hz).
pub const REFERENCE_FRAMES_PER_EPOCH: usize = 500;
pub const REFERENCE_SAMPLE_RATE_HZ: f64 = 250.0;
pub const REFERENCE_CHANNEL_COUNT: usize = 61;

/// One labeled multi-channel epoch, `frames` is frame_count × channel_count.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub subject_id: u16,
    /// 1, 2 or 3.
    pub session_id: u8,
    /// 0, 1 or 2; each block carries one difficulty label.
    pub block_index: u8,
    pub label: Label,
    /// Microvolts.
    pub frames: Array2<f32>,
}

impl EpochRecord {
    pub fn frame_count(&self) -> usize {
        self.frames.nrows()
    }

    pub fn channel_count(&self) -> usize {
        self.frames.ncols()
    }
}

/// An ordered collection of epochs sharing one channel list.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDataset {
    channel_names: Vec<String>,
    records: Vec<EpochRecord>,
    sample_rate_hz: f64,
}

impl EpochDataset {
    pub fn new(
        channel_names: Vec<String>,
        records: Vec<EpochRecord>,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        let dataset = EpochDataset {
            channel_names,
            records,
            sample_rate_hz,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::validation(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if self.channel_names.is_empty() {
            return Err(Error::validation("dataset has no channels"));
        }
        let mut seen = HashSet::new();
        for name in &self.channel_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::validation(format!("duplicate channel name {name:?}")));
            }
        }
        let n_channels = self.channel_names.len();
        for (i, record) in self.records.iter().enumerate() {
            if record.channel_count() != n_channels {
                return Err(Error::validation(format!(
                    "record {i}: {} channels, dataset has {n_channels}",
                    record.channel_count()
                )));
            }
            if record.frame_count() == 0 {
                return Err(Error::validation(format!("record {i}: no frames")));
            }
            if !(1..=3).contains(&record.session_id) {
                return Err(Error::validation(format!(
                    "record {i}: session {} outside 1..=3",
                    record.session_id
                )));
            }
            if record.block_index > 2 {
                return Err(Error::validation(format!(
                    "record {i}: block {} outside 0..=2",
                    record.block_index
                )));
            }
        }
        Ok(())
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Keys in record order. The epoch index counts earlier records of the
    /// same (subject, session, block) in file order.
    pub fn keys(&self) -> Vec<EpochKey> {
        let mut counters: HashMap<(u16, u8, u8), u32> = HashMap::new();
        self.records
            .iter()
            .map(|r| {
                let slot = counters
                    .entry((r.subject_id, r.session_id, r.block_index))
                    .or_insert(0);
                let key = EpochKey {
                    subject: r.subject_id,
                    session: r.session_id,
                    block: r.block_index,
                    index: *slot,
                };
                *slot += 1;
                key
            })
            .collect()
    }

    pub fn subjects(&self) -> BTreeSet<u16> {
        self.records.iter().map(|r| r.subject_id).collect()
    }

    pub fn sessions(&self) -> BTreeSet<u8> {
        self.records.iter().map(|r| r.session_id).collect()
    }

    /// Index of a channel by exact (case-sensitive) name.
    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(subject: u16, session: u8, block: u8) -> EpochRecord {
        EpochRecord {
            subject_id: subject,
            session_id: session,
            block_index: block,
            label: Label::Easy,
            frames: Array2::zeros((4, 2)),
        }
    }

    #[test]
    fn keys_count_within_block() {
        let ds = EpochDataset::new(
            vec!["A".into(), "B".into()],
            vec![record(1, 1, 0), record(1, 1, 1), record(1, 1, 0), record(2, 1, 0)],
            250.0,
        )
        .unwrap();
        let idx: Vec<u32> = ds.keys().iter().map(|k| k.index).collect();
        assert_eq!(idx, vec![0, 0, 1, 0]);
    }

    #[test]
    fn rejects_bad_records() {
        let names = vec!["A".to_string(), "B".to_string()];
        let mut bad = record(1, 4, 0);
        assert!(EpochDataset::new(names.clone(), vec![bad.clone()], 250.0).is_err());
        bad.session_id = 1;
        bad.frames = Array2::zeros((4, 3));
        assert!(EpochDataset::new(names.clone(), vec![bad], 250.0).is_err());
        assert!(EpochDataset::new(vec!["A".into(), "A".into()], vec![], 250.0).is_err());
        assert!(EpochDataset::new(names, vec![], 0.0).is_err());
    }
}
