//! Workload classes and epoch identity.

use std::fmt;

use serde::{Deserialize, Serialize};

/// MATB-II difficulty level of a block. Class indices 0/1/2 map to
/// Easy/Medium/Difficult everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Easy,
    Medium,
    Difficult,
}

pub const NUM_CLASSES: usize = 3;

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::Easy, Label::Medium, Label::Difficult];

    pub fn index(self) -> usize {
        match self {
            Label::Easy => 0,
            Label::Medium => 1,
            Label::Difficult => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Easy => "easy",
            Label::Medium => "medium",
            Label::Difficult => "difficult",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Identity of one epoch: subject, session, block and position in the block.
///
/// The derived ordering is the canonical time order used by splits and
/// smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EpochKey {
    pub subject: u16,
    pub session: u8,
    pub block: u8,
    pub index: u32,
}

impl EpochKey {
    /// True when both keys belong to the same recording block.
    pub fn same_block(&self, other: &EpochKey) -> bool {
        self.subject == other.subject && self.session == other.session && self.block == other.block
    }
}

/// Subject label in the `P01` style.
pub fn subject_name(subject: u16) -> String {
    format!("P{subject:02}")
}
