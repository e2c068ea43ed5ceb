//! Train/test selection for the three evaluation protocols.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EpochDataset, EpochRecord};
use crate::error::{Error, Result};
use crate::label::{subject_name, EpochKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// One model per subject, trained and tested on that subject only.
    SubjectDependent,
    /// One pooled model; the same subjects appear on both sides, in
    /// different sessions.
    SubjectIndependent,
    /// One pooled model tested on subjects it never saw.
    HeldOutSubjects,
}

/// Which (subject, session) pairs go to each side of a split.
///
/// An empty `train_subjects` means every subject in the dataset. An empty
/// `test_subjects` means the training subjects, except for
/// [`SplitMode::HeldOutSubjects`] where it means every subject not trained on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    #[serde(default)]
    pub train_subjects: BTreeSet<u16>,
    #[serde(default)]
    pub test_subjects: BTreeSet<u16>,
    pub train_sessions: BTreeSet<u8>,
    pub test_sessions: BTreeSet<u8>,
}

impl SplitSpec {
    pub fn subject_independent(
        train_sessions: impl IntoIterator<Item = u8>,
        test_sessions: impl IntoIterator<Item = u8>,
    ) -> Self {
        SplitSpec {
            mode: SplitMode::SubjectIndependent,
            train_subjects: BTreeSet::new(),
            test_subjects: BTreeSet::new(),
            train_sessions: train_sessions.into_iter().collect(),
            test_sessions: test_sessions.into_iter().collect(),
        }
    }

    pub fn held_out_subjects(
        train_subjects: impl IntoIterator<Item = u16>,
        test_subjects: impl IntoIterator<Item = u16>,
        train_sessions: impl IntoIterator<Item = u8>,
        test_sessions: impl IntoIterator<Item = u8>,
    ) -> Self {
        SplitSpec {
            mode: SplitMode::HeldOutSubjects,
            train_subjects: train_subjects.into_iter().collect(),
            test_subjects: test_subjects.into_iter().collect(),
            train_sessions: train_sessions.into_iter().collect(),
            test_sessions: test_sessions.into_iter().collect(),
        }
    }

    pub fn subject_dependent(
        subjects: impl IntoIterator<Item = u16>,
        train_sessions: impl IntoIterator<Item = u8>,
        test_sessions: impl IntoIterator<Item = u8>,
    ) -> Self {
        let subjects: BTreeSet<u16> = subjects.into_iter().collect();
        SplitSpec {
            mode: SplitMode::SubjectDependent,
            train_subjects: subjects.clone(),
            test_subjects: subjects,
            train_sessions: train_sessions.into_iter().collect(),
            test_sessions: test_sessions.into_iter().collect(),
        }
    }

    /// Resolves empty subject sets against the dataset and validates the result.
    fn resolve(&self, dataset: &EpochDataset) -> Result<(BTreeSet<u16>, BTreeSet<u16>)> {
        let available = dataset.subjects();
        let sessions = dataset.sessions();
        for s in self.train_subjects.iter().chain(&self.test_subjects) {
            if !available.contains(s) {
                return Err(Error::validation(format!(
                    "subject {} not present in dataset",
                    subject_name(*s)
                )));
            }
        }
        for s in self.train_sessions.iter().chain(&self.test_sessions) {
            if !sessions.contains(s) {
                return Err(Error::validation(format!("session {s} not present in dataset")));
            }
        }
        let train = if self.train_subjects.is_empty() {
            available.clone()
        } else {
            self.train_subjects.clone()
        };
        let test = match (self.mode, self.test_subjects.is_empty()) {
            (SplitMode::HeldOutSubjects, true) => available.difference(&train).copied().collect(),
            (_, true) => train.clone(),
            (_, false) => self.test_subjects.clone(),
        };
        match self.mode {
            SplitMode::HeldOutSubjects => {
                if let Some(s) = train.intersection(&test).next() {
                    return Err(Error::config(format!(
                        "held-out split trains and tests on subject {}",
                        subject_name(*s)
                    )));
                }
            }
            SplitMode::SubjectDependent => {
                if train != test {
                    return Err(Error::config(
                        "subject-dependent split needs identical train and test subjects",
                    ));
                }
            }
            SplitMode::SubjectIndependent => {}
        }
        let overlap_subject = train.intersection(&test).next().is_some();
        if overlap_subject {
            if let Some(s) = self.train_sessions.intersection(&self.test_sessions).next() {
                return Err(Error::config(format!(
                    "session {s} of a shared subject is on both sides of the split"
                )));
            }
        }
        Ok((train, test))
    }
}

/// A record together with its derived identity.
#[derive(Debug, Clone, Copy)]
pub struct KeyedEpoch<'a> {
    pub key: EpochKey,
    pub record: &'a EpochRecord,
}

#[derive(Debug, Clone)]
pub struct Split<'a> {
    pub train: Vec<KeyedEpoch<'a>>,
    pub test: Vec<KeyedEpoch<'a>>,
}

impl<'a> Split<'a> {
    /// Breaks the split into one train/test pair per test subject, keeping
    /// only that subject's epochs on both sides.
    pub fn per_subject(&self) -> Vec<(u16, Split<'a>)> {
        let subjects: BTreeSet<u16> = self.test.iter().map(|e| e.key.subject).collect();
        subjects
            .into_iter()
            .map(|s| {
                let pick = |v: &[KeyedEpoch<'a>]| {
                    v.iter().filter(|e| e.key.subject == s).copied().collect::<Vec<_>>()
                };
                (
                    s,
                    Split {
                        train: pick(&self.train),
                        test: pick(&self.test),
                    },
                )
            })
            .collect()
    }
}

/// Selects train and test epochs, each side ordered by [`EpochKey`].
pub fn make_split<'a>(dataset: &'a EpochDataset, spec: &SplitSpec) -> Result<Split<'a>> {
    if spec.train_sessions.is_empty() || spec.test_sessions.is_empty() {
        return Err(Error::config("split needs at least one train and one test session"));
    }
    let (train_subjects, test_subjects) = spec.resolve(dataset)?;
    let mut train = BTreeMap::new();
    let mut test = BTreeMap::new();
    for (key, record) in dataset.keys().into_iter().zip(dataset.records()) {
        let epoch = KeyedEpoch { key, record };
        if train_subjects.contains(&key.subject) && spec.train_sessions.contains(&key.session) {
            train.insert(key, epoch);
        } else if test_subjects.contains(&key.subject) && spec.test_sessions.contains(&key.session)
        {
            test.insert(key, epoch);
        }
    }
    if train.is_empty() {
        return Err(Error::config("split selects no training epochs"));
    }
    if test.is_empty() {
        return Err(Error::config("split selects no test epochs"));
    }
    Ok(Split {
        train: train.into_values().collect(),
        test: test.into_values().collect(),
    })
}
