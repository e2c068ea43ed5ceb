//! Epoch-level accuracy, per-subject breakdowns, confusion matrices and
//! report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{subject_name, EpochKey, Label, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub correct: usize,
    pub total: usize,
}

impl SubjectScore {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub split: String,
    pub n_epochs: usize,
    pub overall_accuracy: f64,
    pub per_subject: BTreeMap<u16, SubjectScore>,
    /// Rows are true labels, columns predictions.
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl EvalReport {
    pub fn subject_accuracy(&self, subject: u16) -> Option<f64> {
        self.per_subject.get(&subject).map(SubjectScore::accuracy)
    }

    /// Accuracy as the confusion trace over its total.
    pub fn confusion_accuracy(&self) -> f64 {
        let total: usize = self.confusion.iter().flatten().sum();
        let trace: usize = (0..NUM_CLASSES).map(|k| self.confusion[k][k]).sum();
        if total == 0 {
            0.0
        } else {
            trace as f64 / total as f64
        }
    }

    /// Concatenates reports over disjoint epoch sets, e.g. one per subject.
    pub fn merge(system: &str, split: &str, parts: &[EvalReport]) -> Result<EvalReport> {
        let mut per_subject = BTreeMap::new();
        let mut confusion = [[0; NUM_CLASSES]; NUM_CLASSES];
        for part in parts {
            for (&s, score) in &part.per_subject {
                if per_subject.insert(s, *score).is_some() {
                    return Err(Error::validation(format!(
                        "subject {} appears in more than one report",
                        subject_name(s)
                    )));
                }
            }
            for (row, part_row) in confusion.iter_mut().zip(&part.confusion) {
                for (c, p) in row.iter_mut().zip(part_row) {
                    *c += p;
                }
            }
        }
        Ok(finish(system, split, per_subject, confusion))
    }
}

fn finish(
    system: &str,
    split: &str,
    per_subject: BTreeMap<u16, SubjectScore>,
    confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
) -> EvalReport {
    let n_epochs: usize = per_subject.values().map(|s| s.total).sum();
    let correct: usize = per_subject.values().map(|s| s.correct).sum();
    EvalReport {
        system: system.to_string(),
        split: split.to_string(),
        n_epochs,
        overall_accuracy: if n_epochs == 0 {
            0.0
        } else {
            correct as f64 / n_epochs as f64
        },
        per_subject,
        confusion,
    }
}

fn index_unique(side: &str, items: &[(EpochKey, Label)]) -> Result<BTreeMap<EpochKey, Label>> {
    let mut map = BTreeMap::new();
    for &(key, label) in items {
        if map.insert(key, label).is_some() {
            return Err(Error::validation(format!("{side} lists epoch {key:?} twice")));
        }
    }
    Ok(map)
}

fn describe(keys: &BTreeSet<EpochKey>) -> String {
    const SHOWN: usize = 5;
    let mut parts: Vec<String> = keys
        .iter()
        .take(SHOWN)
        .map(|k| format!("{}/S{}/B{}/#{}", subject_name(k.subject), k.session, k.block, k.index))
        .collect();
    if keys.len() > SHOWN {
        parts.push(format!("and {} more", keys.len() - SHOWN));
    }
    parts.join(", ")
}

/// Scores predictions against ground truth; both sides must cover the same
/// epochs.
pub fn evaluate(
    predictions: &[(EpochKey, Label)],
    truth: &[(EpochKey, Label)],
    system: &str,
    split: &str,
) -> Result<EvalReport> {
    let pred = index_unique("predictions", predictions)?;
    let truth = index_unique("ground truth", truth)?;
    let missing: BTreeSet<EpochKey> = truth.keys().filter(|k| !pred.contains_key(k)).copied().collect();
    let extra: BTreeSet<EpochKey> = pred.keys().filter(|k| !truth.contains_key(k)).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = String::from("prediction and truth epochs differ");
        if !missing.is_empty() {
            let _ = write!(msg, "; missing {}: {}", missing.len(), describe(&missing));
        }
        if !extra.is_empty() {
            let _ = write!(msg, "; extra {}: {}", extra.len(), describe(&extra));
        }
        return Err(Error::Validation(msg));
    }
    let mut per_subject: BTreeMap<u16, SubjectScore> = BTreeMap::new();
    let mut confusion = [[0; NUM_CLASSES]; NUM_CLASSES];
    for (key, t) in &truth {
        let p = pred[key];
        confusion[t.index()][p.index()] += 1;
        let score = per_subject.entry(key.subject).or_insert(SubjectScore { correct: 0, total: 0 });
        score.total += 1;
        if p == *t {
            score.correct += 1;
        }
    }
    Ok(finish(system, split, per_subject, confusion))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::config(format!("unknown report format `{other}`"))),
        }
    }
}

/// Two decimals, ties rounded to even.
pub fn format_accuracy(x: f64) -> String {
    format!("{:.2}", (x * 100.0).round_ties_even() / 100.0)
}

fn accuracy_rows(report: &EvalReport) -> Vec<(String, Option<&SubjectScore>, f64)> {
    let mut rows = vec![("Overall".to_string(), None, report.overall_accuracy)];
    rows.extend(
        report
            .per_subject
            .iter()
            .map(|(&s, score)| (subject_name(s), Some(score), score.accuracy())),
    );
    rows
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "system: {}", report.system);
    let _ = writeln!(out, "split: {}", report.split);
    let _ = writeln!(out, "epochs: {}", report.n_epochs);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<10}{:>10}", "", "accuracy");
    for (name, _, acc) in accuracy_rows(report) {
        let _ = writeln!(out, "{:<10}{:>10}", name, format_accuracy(acc));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "confusion (rows: truth, columns: predicted)");
    let _ = write!(out, "{:<10}", "");
    for l in Label::ALL {
        let _ = write!(out, "{:>10}", l.name());
    }
    let _ = writeln!(out);
    for t in Label::ALL {
        let _ = write!(out, "{:<10}", t.name());
        for p in Label::ALL {
            let _ = write!(out, "{:>10}", report.confusion[t.index()][p.index()]);
        }
        let _ = writeln!(out);
    }
    out
}

fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from("row,accuracy,correct,total\n");
    let overall_correct: usize = (0..NUM_CLASSES).map(|k| report.confusion[k][k]).sum();
    for (name, score, acc) in accuracy_rows(report) {
        let (correct, total) = match score {
            Some(s) => (s.correct, s.total),
            None => (overall_correct, report.n_epochs),
        };
        let _ = writeln!(out, "{name},{acc},{correct},{total}");
    }
    out
}

/// Side-by-side accuracy table with one column per report: an Overall row
/// followed by one row per subject present in any report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let subjects: BTreeSet<u16> = reports.iter().flat_map(|r| r.per_subject.keys().copied()).collect();
    let width = reports.iter().map(|r| r.system.len()).max().unwrap_or(0).max(8) + 2;
    let mut out = String::new();
    let _ = write!(out, "{:<10}", "");
    for r in reports {
        let _ = write!(out, "{:>width$}", r.system);
    }
    let _ = writeln!(out);
    let _ = write!(out, "{:<10}", "Overall");
    for r in reports {
        let _ = write!(out, "{:>width$}", format_accuracy(r.overall_accuracy));
    }
    let _ = writeln!(out);
    for s in subjects {
        let _ = write!(out, "{:<10}", subject_name(s));
        for r in reports {
            let cell = r.subject_accuracy(s).map_or_else(|| "-".to_string(), format_accuracy);
            let _ = write!(out, "{cell:>width$}");
        }
        let _ = writeln!(out);
    }
    out
}
