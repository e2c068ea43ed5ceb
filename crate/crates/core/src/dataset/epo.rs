//! EPO1 container: little-endian binary epochs.
//!
//! ```text
//! magic "EPO1" | version u32 | sample_rate_hz f64 | channel_count u32
//! channel_count × (name_len u16, UTF-8 bytes)
//! record_count u64
//! per record: subject u16 | session u8 | block u8 | label u8 | frame_count u32
//!             frame_count × channel_count f32, frame-major
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{EpochDataset, EpochRecord};
use crate::error::{Error, Result};
use crate::label::Label;

pub const EPO_MAGIC: &[u8; 4] = b"EPO1";
pub const EPO_VERSION: u32 = 1;

pub fn load_epoch_file(path: impl AsRef<Path>) -> Result<EpochDataset> {
    let path = path.as_ref();
    let mut file = File::open(path)?;
    read_epochs(&mut file).map_err(|e| match e {
        Error::Io(io) => Error::Io(io),
        other => annotate(other, path),
    })
}

fn annotate(err: Error, path: &Path) -> Error {
    let p = path.display();
    match err {
        Error::Format(m) => Error::Format(format!("{p}: {m}")),
        Error::Corruption(m) => Error::Corruption(format!("{p}: {m}")),
        Error::Validation(m) => Error::Validation(format!("{p}: {m}")),
        other => other,
    }
}

pub fn write_epoch_file(dataset: &EpochDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    write_epochs(dataset, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_epochs<W: Write>(dataset: &EpochDataset, out: &mut W) -> Result<()> {
    dataset.validate()?;
    out.write_all(EPO_MAGIC)?;
    out.write_all(&EPO_VERSION.to_le_bytes())?;
    out.write_all(&dataset.sample_rate_hz().to_le_bytes())?;
    out.write_all(&(dataset.channel_names().len() as u32).to_le_bytes())?;
    for name in dataset.channel_names() {
        let bytes = name.as_bytes();
        let len = u16::try_from(bytes.len())
            .map_err(|_| Error::validation(format!("channel name too long: {name:?}")))?;
        out.write_all(&len.to_le_bytes())?;
        out.write_all(bytes)?;
    }
    out.write_all(&(dataset.records().len() as u64).to_le_bytes())?;
    let mut buf = Vec::new();
    for record in dataset.records() {
        out.write_all(&record.subject_id.to_le_bytes())?;
        out.write_all(&[record.session_id, record.block_index, record.label.index() as u8])?;
        out.write_all(&(record.frame_count() as u32).to_le_bytes())?;
        buf.clear();
        buf.reserve(record.frames.len() * 4);
        // Iteration order of a 2-D array is row-major, i.e. frame-major.
        for v in record.frames.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_epochs<R: Read>(input: &mut R) -> Result<EpochDataset> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };

    let magic = cur
        .take(4)
        .map_err(|_| Error::Format("file too short for EPO1 magic".into()))?;
    if magic != EPO_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"EPO1\"")));
    }
    let version = cur.u32()?;
    if version != EPO_VERSION {
        return Err(Error::Format(format!("unsupported EPO1 version {version}")));
    }
    let sample_rate = cur.f64()?;
    let n_channels = cur.u32()? as usize;
    let mut names = Vec::with_capacity(n_channels.min(4096));
    for _ in 0..n_channels {
        let len = cur.u16()? as usize;
        let raw = cur.take(len)?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::Corruption("channel name is not valid UTF-8".into()))?;
        names.push(name.to_string());
    }
    let n_records = cur.u64()?;
    let mut records = Vec::new();
    for i in 0..n_records {
        let subject_id = cur.u16()?;
        let session_id = cur.u8()?;
        let block_index = cur.u8()?;
        let label_byte = cur.u8()?;
        let label = Label::from_index(label_byte as usize)
            .ok_or_else(|| Error::Corruption(format!("record {i}: invalid label byte {label_byte}")))?;
        let frame_count = cur.u32()? as usize;
        let n_values = frame_count
            .checked_mul(n_channels)
            .ok_or_else(|| Error::Corruption(format!("record {i}: frame count overflow")))?;
        let raw = cur.take(n_values.checked_mul(4).ok_or_else(|| {
            Error::Corruption(format!("record {i}: payload size overflow"))
        })?)?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let frames = Array2::from_shape_vec((frame_count, n_channels), values)
            .map_err(|e| Error::Corruption(format!("record {i}: {e}")))?;
        records.push(EpochRecord {
            subject_id,
            session_id,
            block_index,
            label,
            frames,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Corruption(format!(
            "{} trailing bytes after last record",
            bytes.len() - cur.pos
        )));
    }
    EpochDataset::new(names, records, sample_rate)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Corruption(format!(
                "truncated payload: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montage;

    fn tiny(n_records: usize, frames: usize, channels: usize) -> EpochDataset {
        let records = (0..n_records)
            .map(|i| EpochRecord {
                subject_id: 1 + i as u16,
                session_id: 1,
                block_index: (i % 3) as u8,
                label: Label::from_index(i % 3).unwrap(),
                frames: Array2::from_shape_fn((frames, channels), |(t, c)| {
                    (t as f32 * 0.37 - c as f32).sin() * 1e3 + f32::EPSILON
                }),
            })
            .collect();
        EpochDataset::new(montage::channel_names(channels), records, 250.0).unwrap()
    }

    fn to_bytes(ds: &EpochDataset) -> Vec<u8> {
        let mut out = Vec::new();
        write_epochs(ds, &mut out).unwrap();
        out
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let ds = tiny(0, 1, 3);
        let bytes = to_bytes(&ds);
        // magic + version + rate + count + names ("FP1","FP2","AFz") + record count
        assert_eq!(bytes.len(), 4 + 4 + 8 + 4 + 3 * (2 + 3) + 8);
        let back = read_epochs(&mut bytes.as_slice()).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.channel_names(), ds.channel_names());
    }

    #[test]
    fn payload_size_for_one_full_size_record() {
        let ds = tiny(1, 500, 61);
        let header_only = to_bytes(&tiny(0, 1, 61)).len();
        let bytes = to_bytes(&ds);
        assert_eq!(bytes.len(), header_only + 9 + 500 * 61 * 4);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ds = tiny(2, 7, 5);
        let back = read_epochs(&mut to_bytes(&ds).as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in ds.records().iter().zip(back.records()) {
            let bits_a: Vec<u32> = a.frames.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = b.frames.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        assert_eq!(ds, back);
    }

    #[test]
    fn deterministic_bytes() {
        let ds = tiny(3, 4, 4);
        assert_eq!(to_bytes(&ds), to_bytes(&ds));
    }

    #[test]
    fn error_kinds() {
        let bytes = to_bytes(&tiny(2, 4, 3));

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_epochs(&mut bad_magic.as_slice()), Err(Error::Format(_))));

        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(read_epochs(&mut bad_version.as_slice()), Err(Error::Format(_))));

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(read_epochs(&mut &truncated[..]), Err(Error::Corruption(_))));

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(matches!(read_epochs(&mut trailing.as_slice()), Err(Error::Corruption(_))));

        // Rename channel 2 ("FP2") to "FP1".
        let mut dup = bytes.clone();
        let second_name = 4 + 4 + 8 + 4 + 2 + 3 + 2;
        dup[second_name + 2] = b'1';
        assert!(matches!(read_epochs(&mut dup.as_slice()), Err(Error::Validation(_))));
    }
}
