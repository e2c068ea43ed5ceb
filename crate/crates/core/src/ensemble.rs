//! Label voting across independently trained systems.

use serde::{Deserialize, Serialize};

use crate::classifier::argmax_label;
use crate::error::{Error, Result};
use crate::label::{Label, NUM_CLASSES};

pub const ENSEMBLE_NAME: &str = "7-system";

/// One system's decision on one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub system_name: String,
    pub posteriors: [f64; NUM_CLASSES],
    pub predicted: Label,
}

impl SystemOutput {
    pub fn new(system_name: impl Into<String>, posteriors: [f64; NUM_CLASSES]) -> Result<Self> {
        if posteriors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::validation("posteriors must be finite and non-negative"));
        }
        let sum: f64 = posteriors.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("posteriors sum to {sum}, not 1")));
        }
        Ok(SystemOutput {
            system_name: system_name.into(),
            posteriors,
            predicted: argmax_label(&posteriors),
        })
    }
}

/// Plurality vote over the systems' labels. Ties go to the tied class with
/// the largest summed posterior, then to the lowest class index.
pub fn vote_combine(outputs: &[SystemOutput]) -> Result<Label> {
    if outputs.is_empty() {
        return Err(Error::validation("cannot combine an empty set of system outputs"));
    }
    let mut votes = [0usize; NUM_CLASSES];
    let mut mass = [0.0f64; NUM_CLASSES];
    for k in 0..NUM_CLASSES {
        // Sorted before summing so the total does not depend on system order.
        let mut column: Vec<f64> = outputs.iter().map(|o| o.posteriors[k]).collect();
        column.sort_by(f64::total_cmp);
        mass[k] = column.iter().sum();
    }
    for o in outputs {
        votes[o.predicted.index()] += 1;
    }
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if (votes[k], mass[k]) > (votes[best], mass[best]) {
            best = k;
        }
    }
    Ok(Label::from_index(best).expect("class index in range"))
}

/// Posteriors averaged over systems, reported alongside the voted label.
pub fn mean_posteriors(outputs: &[SystemOutput]) -> [f64; NUM_CLASSES] {
    let mut mean = [0.0; NUM_CLASSES];
    for k in 0..NUM_CLASSES {
        let mut column: Vec<f64> = outputs.iter().map(|o| o.posteriors[k]).collect();
        column.sort_by(f64::total_cmp);
        mean[k] = column.iter().sum::<f64>() / outputs.len().max(1) as f64;
    }
    mean
}
