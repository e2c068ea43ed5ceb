//! CSV import for recordings exported from other tools.
//!
//! A JSON manifest lists one CSV file per recording block together with its
//! subject, session, block and label. Each CSV has a header row of channel
//! names and one row per frame; the block is cut into consecutive,
//! non-overlapping epochs and a trailing partial epoch is dropped.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{EpochDataset, EpochRecord, REFERENCE_FRAMES_PER_EPOCH, REFERENCE_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvManifest {
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_epoch_frames")]
    pub epoch_frames: usize,
    pub files: Vec<CsvManifestEntry>,
}

fn default_rate() -> f64 {
    REFERENCE_SAMPLE_RATE_HZ
}

fn default_epoch_frames() -> usize {
    REFERENCE_FRAMES_PER_EPOCH
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvManifestEntry {
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub subject: u16,
    pub session: u8,
    pub block: u8,
    pub label: Label,
}

/// Reads the manifest at `manifest_path` and every CSV it lists.
///
/// Channel order follows the first file; later files may list the same
/// channels in any order.
pub fn import_csv(manifest_path: impl AsRef<Path>) -> Result<EpochDataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest: CsvManifest = serde_json::from_reader(std::fs::File::open(manifest_path)?)?;
    if manifest.epoch_frames == 0 {
        return Err(Error::validation("epoch_frames must be positive"));
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut channel_names: Option<Vec<String>> = None;
    let mut records = Vec::new();
    for entry in &manifest.files {
        let path = base.join(&entry.path);
        let (header, rows) = read_csv(&path)?;
        let names = channel_names.get_or_insert_with(|| header.clone());
        let order: Vec<usize> = names
            .iter()
            .map(|n| {
                header.iter().position(|h| h == n).ok_or_else(|| {
                    Error::validation(format!("{}: missing channel {n:?}", path.display()))
                })
            })
            .collect::<Result<_>>()?;
        if header.len() != names.len() {
            return Err(Error::validation(format!(
                "{}: {} channels, expected {}",
                path.display(),
                header.len(),
                names.len()
            )));
        }
        let n_epochs = rows.len() / manifest.epoch_frames;
        for e in 0..n_epochs {
            let start = e * manifest.epoch_frames;
            let frames = Array2::from_shape_fn((manifest.epoch_frames, names.len()), |(t, c)| {
                rows[start + t][order[c]]
            });
            records.push(EpochRecord {
                subject_id: entry.subject,
                session_id: entry.session,
                block_index: entry.block,
                label: entry.label,
                frames,
            });
        }
    }
    let channel_names =
        channel_names.ok_or_else(|| Error::validation("manifest lists no files"))?;
    EpochDataset::new(channel_names, records, manifest.sample_rate_hz)
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f32>>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let values = row
            .iter()
            .map(|v| {
                v.parse::<f32>().map_err(|_| {
                    Error::validation(format!("{}: row {}: bad number {v:?}", path.display(), i + 2))
                })
            })
            .collect::<Result<Vec<f32>>>()?;
        rows.push(values);
    }
    Ok((header, rows))
}
