use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::FeatureSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Raw channel values; every group must be a single channel.
    None,
    Max,
    Average,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::None => "none",
            Pooling::Max => "max",
            Pooling::Average => "average",
        })
    }
}

/// Named channel groups and the pooling applied within each group. Groups
/// may overlap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelGrouping {
    pub name: String,
    pub pooling: Pooling,
    pub groups: Vec<Vec<String>>,
}

/// The three channel configurations shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BundledGrouping {
    /// 31 single channels.
    Sd31,
    /// 21 sub-regions.
    P21,
    /// 25 sub-regions.
    P25,
}

impl BundledGrouping {
    pub const ALL: [BundledGrouping; 3] =
        [BundledGrouping::Sd31, BundledGrouping::P21, BundledGrouping::P25];

    /// Raw JSON shipped in `data/groupings/`.
    pub fn json(self) -> &'static str {
        match self {
            BundledGrouping::Sd31 => include_str!("../../data/groupings/sd31.json"),
            BundledGrouping::P21 => include_str!("../../data/groupings/p21.json"),
            BundledGrouping::P25 => include_str!("../../data/groupings/p25.json"),
        }
    }

    pub fn load(self) -> ChannelGrouping {
        serde_json::from_str(self.json()).expect("bundled grouping JSON is valid")
    }

    pub fn group_count(self) -> usize {
        match self {
            BundledGrouping::Sd31 => 31,
            BundledGrouping::P21 => 21,
            BundledGrouping::P25 => 25,
        }
    }
}

impl ChannelGrouping {
    pub fn from_json(text: &str) -> Result<Self> {
        let grouping: ChannelGrouping = serde_json::from_str(text)?;
        grouping.check_shape()?;
        Ok(grouping)
    }

    pub fn with_pooling(mut self, pooling: Pooling) -> Self {
        self.pooling = pooling;
        self
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::validation(format!("grouping {:?} has no groups", self.name)));
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::validation(format!("grouping {:?}: group {i} is empty", self.name)));
            }
            if self.pooling == Pooling::None && g.len() != 1 {
                return Err(Error::validation(format!(
                    "grouping {:?}: pooling none needs singleton groups, group {i} has {}",
                    self.name,
                    g.len()
                )));
            }
        }
        Ok(())
    }

    /// Maps channel names to column indices of `channel_names`.
    pub fn resolve(&self, channel_names: &[String]) -> Result<GroupIndex> {
        self.check_shape()?;
        let groups = self
            .groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|name| {
                        channel_names.iter().position(|c| c == name).ok_or_else(|| {
                            Error::validation(format!(
                                "grouping {:?} references unknown channel {name:?}",
                                self.name
                            ))
                        })
                    })
                    .collect::<Result<Vec<usize>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupIndex {
            pooling: self.pooling,
            groups,
            n_channels: channel_names.len(),
        })
    }
}

/// A grouping resolved against a concrete channel list.
#[derive(Debug, Clone)]
pub struct GroupIndex {
    pooling: Pooling,
    groups: Vec<Vec<usize>>,
    n_channels: usize,
}

impl GroupIndex {
    pub fn output_dim(&self) -> usize {
        self.groups.len()
    }

    pub fn apply(&self, frames: ArrayView2<'_, f32>) -> Result<FeatureSequence> {
        if frames.ncols() != self.n_channels {
            return Err(Error::validation(format!(
                "frames have {} channels, grouping resolved for {}",
                frames.ncols(),
                self.n_channels
            )));
        }
        let mut out = Array2::zeros((frames.nrows(), self.groups.len()));
        for (frame, mut row) in frames.rows().into_iter().zip(out.rows_mut()) {
            for (g, members) in self.groups.iter().enumerate() {
                row[g] = match self.pooling {
                    Pooling::None => frame[members[0]] as f64,
                    Pooling::Max => members
                        .iter()
                        .map(|&c| frame[c] as f64)
                        .fold(f64::NEG_INFINITY, f64::max),
                    Pooling::Average => {
                        members.iter().map(|&c| frame[c] as f64).sum::<f64>() / members.len() as f64
                    }
                };
            }
        }
        FeatureSequence::new(out)
    }
}

/// Pools or selects channels of one epoch, giving one feature per group.
pub fn apply_grouping(
    frames: ArrayView2<'_, f32>,
    grouping: &ChannelGrouping,
    channel_names: &[String],
) -> Result<FeatureSequence> {
    grouping.resolve(channel_names)?.apply(frames)
}
