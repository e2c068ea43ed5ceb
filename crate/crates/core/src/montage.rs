//! Electrode names referenced by the bundled channel groupings.

/// Every channel named by the three bundled groupings, front to back.
///
/// This is the union of the 31-channel subset and the 21/25 sub-region
/// groupings (63 names). Recordings may carry fewer channels; a grouping
/// only needs the channels it references.
pub const MONTAGE: [&str; 63] = [
    "FP1", "FP2", "AFz", "AF3", "AF4", "AF7", "AF8", "Fz", "F1", "F2", "F3", "F4", "F5", "F6",
    "F7", "F8", "FCz", "FC1", "FC2", "FC3", "FC4", "FC5", "FC6", "FT7", "FT8", "FT9", "C1", "C2",
    "C3", "C4", "C5", "C6", "T7", "T8", "CPz", "CP1", "CP2", "CP3", "CP4", "CP5", "CP6", "TP7",
    "TP8", "Pz", "P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "POz", "PO3", "PO4", "PO7", "PO8",
    "Oz", "O1", "O2", "O3", "O4", "O5",
];

/// Channel names for a synthetic recording with `n` channels: the montage
/// prefix, then `X64`, `X65`, ... past the montage length.
pub fn channel_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match MONTAGE.get(i) {
            Some(name) => (*name).to_string(),
            None => format!("X{}", i + 1),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn montage_names_are_unique() {
        let set: HashSet<_> = MONTAGE.iter().collect();
        assert_eq!(set.len(), MONTAGE.len());
    }

    #[test]
    fn synthetic_names_extend_past_montage() {
        let names = channel_names(65);
        assert_eq!(names[0], "FP1");
        assert_eq!(names[62], "O5");
        assert_eq!(names[63], "X64");
        assert_eq!(names[64], "X65");
    }
}
