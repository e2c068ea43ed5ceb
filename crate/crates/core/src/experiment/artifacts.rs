//! On-disk intermediates. Per-epoch matrices go into a binary `CLM1`
//! container, models into JSON documents and i-vectors and predictions into
//! JSON lines; every file carries the hash of the config that produced it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::stages::Side;
use crate::error::{Error, Result};
use crate::label::{EpochKey, Label};

pub const CLM_MAGIC: &[u8; 4] = b"CLM1";
pub const CLM_VERSION: u32 = 1;

/// File names inside an experiment output directory.
pub mod names {
    pub const FEATURES: &str = "features.clm";
    pub const FRAME_GMVN: &str = "frame_gmvn.json";
    pub const UBM: &str = "ubm.json";
    pub const STATS: &str = "stats.clm";
    pub const TV: &str = "tv.json";
    pub const IVECTORS_RAW: &str = "ivectors_raw.jsonl";
    pub const IVECTORS: &str = "ivectors.jsonl";
    pub const IVECTOR_GMVN: &str = "ivector_gmvn.json";
    pub const MLP: &str = "mlp.json";
    pub const PREDICTIONS: &str = "predictions.jsonl";
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_TEXT: &str = "report.txt";
    pub const REPORT_CSV: &str = "report.csv";
}

/// One epoch's matrix in a `CLM1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixItem {
    pub key: EpochKey,
    pub label: Label,
    pub side: Side,
    pub values: Array2<f64>,
}

pub(crate) fn mismatch(file: &str, found: &str, expected: &str) -> Error {
    Error::config(format!(
        "{file} was produced by config {found}, current config is {expected}; rerun the producing stage"
    ))
}

pub(crate) fn missing(path: &Path) -> Error {
    Error::config(format!(
        "{} not found; run the producing stage first",
        path.display()
    ))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            missing(path)
        } else {
            e.into()
        }
    })
}

fn write_str<W: Write>(out: &mut W, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| Error::validation("string too long for CLM1"))?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn write_matrices(path: &Path, config_hash: &str, kind: &str, items: &[MatrixItem]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(CLM_MAGIC)?;
    out.write_all(&CLM_VERSION.to_le_bytes())?;
    write_str(&mut out, config_hash)?;
    write_str(&mut out, kind)?;
    out.write_all(&(items.len() as u64).to_le_bytes())?;
    for item in items {
        out.write_all(&item.key.subject.to_le_bytes())?;
        out.write_all(&[item.key.session, item.key.block])?;
        out.write_all(&item.key.index.to_le_bytes())?;
        out.write_all(&[item.label.index() as u8, item.side as u8])?;
        let (r, c) = item.values.dim();
        out.write_all(&(r as u32).to_le_bytes())?;
        out.write_all(&(c as u32).to_le_bytes())?;
        for v in item.values.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Corruption("CLM1 file is truncated".into())
            } else {
                e.into()
            }
        })?;
        Ok(buf)
    }

    fn string(&mut self) -> Result<String> {
        let len = u16::from_le_bytes(self.bytes()?) as usize;
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Corruption("CLM1 file is truncated".into()))?;
        String::from_utf8(buf).map_err(|_| Error::Corruption("CLM1 string is not UTF-8".into()))
    }
}

/// Reads a `CLM1` file written for `kind` by the config with `config_hash`.
pub fn read_matrices(path: &Path, config_hash: &str, kind: &str) -> Result<Vec<MatrixItem>> {
    let mut r = Reader {
        inner: BufReader::new(open(path)?),
    };
    if &r.bytes::<4>()? != CLM_MAGIC {
        return Err(Error::Format(format!("{} is not a CLM1 file", path.display())));
    }
    let version = u32::from_le_bytes(r.bytes()?);
    if version != CLM_VERSION {
        return Err(Error::Format(format!("unsupported CLM1 version {version}")));
    }
    let hash = r.string()?;
    let found_kind = r.string()?;
    if found_kind != kind {
        return Err(Error::Format(format!(
            "{} holds `{found_kind}`, expected `{kind}`",
            path.display()
        )));
    }
    if hash != config_hash {
        return Err(mismatch(&path.display().to_string(), &hash, config_hash));
    }
    let count = u64::from_le_bytes(r.bytes()?);
    let mut items = Vec::new();
    for _ in 0..count {
        let subject = u16::from_le_bytes(r.bytes()?);
        let [session, block] = r.bytes()?;
        let index = u32::from_le_bytes(r.bytes()?);
        let [label, side] = r.bytes()?;
        let label = Label::from_index(label as usize)
            .ok_or_else(|| Error::Corruption(format!("bad label byte {label}")))?;
        let side = match side {
            0 => Side::Train,
            1 => Side::Test,
            other => return Err(Error::Corruption(format!("bad side byte {other}"))),
        };
        let rows = u32::from_le_bytes(r.bytes()?) as usize;
        let cols = u32::from_le_bytes(r.bytes()?) as usize;
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            values.push(f64::from_le_bytes(r.bytes()?));
        }
        items.push(MatrixItem {
            key: EpochKey {
                subject,
                session,
                block,
                index,
            },
            label,
            side,
            values: Array2::from_shape_vec((rows, cols), values).expect("shape matches count"),
        });
    }
    let mut rest = [0u8; 1];
    if r.inner.read(&mut rest)? != 0 {
        return Err(Error::Corruption("trailing bytes after CLM1 payload".into()));
    }
    Ok(items)
}

/// A JSON document tagged with the producing config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_hash: String,
    pub stage: String,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_stamped<T: Serialize>(path: &Path, config_hash: &str, stage: &str, body: &T) -> Result<()> {
    let doc = Stamped {
        config_hash: config_hash.to_string(),
        stage: stage.to_string(),
        body,
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &doc)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_stamped<T: DeserializeOwned>(path: &Path, config_hash: &str) -> Result<T> {
    let doc: Stamped<T> = serde_json::from_reader(BufReader::new(open(path)?))?;
    if doc.config_hash != config_hash {
        return Err(mismatch(&path.display().to_string(), &doc.config_hash, config_hash));
    }
    Ok(doc.body)
}

#[derive(Debug, Serialize, Deserialize)]
struct LinesHeader {
    config_hash: String,
    stage: String,
    records: usize,
}

/// JSON lines: a header line, then one record per line.
pub(crate) fn write_lines<T: Serialize>(path: &Path, config_hash: &str, stage: &str, records: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = LinesHeader {
        config_hash: config_hash.to_string(),
        stage: stage.to_string(),
        records: records.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn read_lines<T: DeserializeOwned>(path: &Path, config_hash: &str) -> Result<Vec<T>> {
    let mut lines = BufReader::new(open(path)?).lines();
    let header: LinesHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(Error::Corruption(format!("{} is empty", path.display()))),
    };
    if header.config_hash != config_hash {
        return Err(mismatch(&path.display().to_string(), &header.config_hash, config_hash));
    }
    let mut records = Vec::with_capacity(header.records);
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    if records.len() != header.records {
        return Err(Error::Corruption(format!(
            "{} has {} records, header says {}",
            path.display(),
            records.len(),
            header.records
        )));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn items() -> Vec<MatrixItem> {
        vec![
            MatrixItem {
                key: EpochKey {
                    subject: 3,
                    session: 2,
                    block: 1,
                    index: 7,
                },
                label: Label::Difficult,
                side: Side::Test,
                values: array![[0.1, -1e-300], [f64::MAX, 1.0 / 3.0]],
            },
            MatrixItem {
                key: EpochKey {
                    subject: 1,
                    session: 1,
                    block: 0,
                    index: 0,
                },
                label: Label::Easy,
                side: Side::Train,
                values: Array2::zeros((0, 4)),
            },
        ]
    }

    #[test]
    fn matrices_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.clm");
        write_matrices(&path, "abc", "features", &items()).unwrap();
        assert_eq!(read_matrices(&path, "abc", "features").unwrap(), items());
    }

    #[test]
    fn hash_and_kind_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.clm");
        write_matrices(&path, "abc", "features", &items()).unwrap();
        assert!(matches!(read_matrices(&path, "abd", "features"), Err(Error::Config(_))));
        assert!(matches!(read_matrices(&path, "abc", "stats"), Err(Error::Format(_))));
        assert!(matches!(
            read_matrices(&dir.path().join("none.clm"), "abc", "features"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn truncation_is_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.clm");
        write_matrices(&path, "abc", "features", &items()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_matrices(&path, "abc", "features"), Err(Error::Corruption(_))));
        let mut longer = bytes.clone();
        longer.push(0);
        std::fs::write(&path, &longer).unwrap();
        assert!(matches!(read_matrices(&path, "abc", "features"), Err(Error::Corruption(_))));
    }

    #[test]
    fn stamped_and_lines_check_hash() {
        let dir = tempfile::tempdir().unwrap();
        let doc = dir.path().join("d.json");
        #[derive(Debug, PartialEq, Serialize, Deserialize)]
        struct Body {
            values: Vec<f64>,
        }
        let body = Body {
            values: vec![0.1, 1.0 / 7.0],
        };
        write_stamped(&doc, "h1", "unit", &body).unwrap();
        assert_eq!(read_stamped::<Body>(&doc, "h1").unwrap(), body);
        assert!(matches!(read_stamped::<Body>(&doc, "h2"), Err(Error::Config(_))));

        let lines = dir.path().join("l.jsonl");
        write_lines(&lines, "h1", "unit", &[0.1f64, 0.2, 1e-310]).unwrap();
        assert_eq!(read_lines::<f64>(&lines, "h1").unwrap(), vec![0.1, 0.2, 1e-310]);
        assert!(read_lines::<f64>(&lines, "zz").is_err());
    }
}
