//! Experiment configuration, the seven named system presets, and the
//! end-to-end and stage-by-stage pipeline drivers.

mod artifacts;
mod pipeline;
mod stages;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::TrainConfig;
use crate::dataset::{import_csv, load_epoch_file, EpochDataset, SplitMode, SplitSpec};
use crate::error::{Error, Result};
use crate::features::{BundledGrouping, ChannelGrouping, Pooling, DEFAULT_GMVN_FLOOR};

pub use artifacts::{
    names, read_matrices, read_stamped, write_matrices, write_stamped, MatrixItem, Stamped,
    CLM_MAGIC, CLM_VERSION,
};
pub use pipeline::{
    run_ensemble, run_experiment, run_stage, EnsembleOutcome, ExperimentOutcome, Stage,
};
pub use stages::{
    accumulate_stats, evaluate_predictions, extract, featurize, postprocess, predict,
    train_classifier, train_tv, train_ubm, Featurized, Keyed, Prediction, Side,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const DATA_DIR_ENV: &str = "COGLOAD_DATA_DIR";

/// A named system configuration: channel grouping, pooling and smoothing
/// window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemPreset {
    pub name: &'static str,
    pub grouping: BundledGrouping,
    pub pooling: Pooling,
    pub sma_window: usize,
}

pub const PRESETS: [SystemPreset; 7] = [
    SystemPreset {
        name: "sd31-SMA16",
        grouping: BundledGrouping::Sd31,
        pooling: Pooling::None,
        sma_window: 16,
    },
    SystemPreset {
        name: "avgP25-SMA16",
        grouping: BundledGrouping::P25,
        pooling: Pooling::Average,
        sma_window: 16,
    },
    SystemPreset {
        name: "maxP25-SMA16",
        grouping: BundledGrouping::P25,
        pooling: Pooling::Max,
        sma_window: 16,
    },
    SystemPreset {
        name: "avgP21-SMA16",
        grouping: BundledGrouping::P21,
        pooling: Pooling::Average,
        sma_window: 16,
    },
    SystemPreset {
        name: "maxP21-SMA16",
        grouping: BundledGrouping::P21,
        pooling: Pooling::Max,
        sma_window: 16,
    },
    SystemPreset {
        name: "avgP21-SMA20",
        grouping: BundledGrouping::P21,
        pooling: Pooling::Average,
        sma_window: 20,
    },
    SystemPreset {
        name: "maxP21-SMA20",
        grouping: BundledGrouping::P21,
        pooling: Pooling::Max,
        sma_window: 20,
    },
];

pub const CUSTOM_PRESET: &str = "custom";

pub fn preset(name: &str) -> Option<&'static SystemPreset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Where the moving average and normalization are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmaStage {
    /// On the per-epoch i-vector series, window counted in epochs.
    #[default]
    Ivector,
    /// On frame features after deltas, window counted in frames.
    Frame,
}

/// Per-field overrides of the preset; all fields are required for the
/// custom preset except `sma_stage` and `name`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemOverrides {
    pub name: Option<String>,
    /// A bundled grouping (`sd31`, `p21`, `p25`) or a path to a grouping
    /// JSON file.
    pub grouping: Option<String>,
    pub pooling: Option<Pooling>,
    pub sma_window: Option<usize>,
    pub sma_stage: Option<SmaStage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UbmConfig {
    pub components: usize,
    pub kmeans_iterations: usize,
    pub em_iterations: usize,
    /// Use every k-th training frame.
    pub frame_stride: usize,
}

impl Default for UbmConfig {
    fn default() -> Self {
        UbmConfig {
            components: 512,
            kmeans_iterations: crate::gmm::DEFAULT_LLOYD_ITERATIONS,
            em_iterations: 20,
            frame_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvConfig {
    pub rank: usize,
    pub iterations: usize,
    pub min_divergence: bool,
    pub init_scale: f64,
}

impl Default for TvConfig {
    fn default() -> Self {
        TvConfig {
            rank: crate::ivector::DEFAULT_RANK,
            iterations: 5,
            min_divergence: true,
            init_scale: crate::ivector::DEFAULT_INIT_SCALE,
        }
    }
}

/// Held-out data used for classifier early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpValidation {
    /// Train on every training epoch and keep the final model.
    #[default]
    None,
    /// Hold out the latest training session for early stopping, when there
    /// are at least two.
    LastTrainSession,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// EPO1 file or CSV manifest (`.json`). Relative paths resolve against
    /// `$COGLOAD_DATA_DIR` when it is set.
    pub dataset: PathBuf,
    pub split: SplitSpec,
    #[serde(default = "custom_preset")]
    pub preset: String,
    #[serde(default)]
    pub system: SystemOverrides,
    #[serde(default)]
    pub ubm: UbmConfig,
    #[serde(default)]
    pub tv: TvConfig,
    #[serde(default)]
    pub mlp: TrainConfig,
    #[serde(default)]
    pub mlp_validation: MlpValidation,
    #[serde(default = "default_floor")]
    pub gmvn_floor: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn custom_preset() -> String {
    CUSTOM_PRESET.to_string()
}

fn default_floor() -> f64 {
    DEFAULT_GMVN_FLOOR
}

/// A fully resolved system description.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub grouping: ChannelGrouping,
    pub sma_window: usize,
    pub sma_stage: SmaStage,
}

impl ExperimentConfig {
    /// A config for one of the named presets with default model settings.
    pub fn for_preset(name: &str, dataset: impl Into<PathBuf>, split: SplitSpec) -> Result<Self> {
        if preset(name).is_none() {
            return Err(Error::config(format!("unknown preset `{name}`")));
        }
        Ok(ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            dataset: dataset.into(),
            split,
            preset: name.to_string(),
            system: SystemOverrides::default(),
            ubm: UbmConfig::default(),
            tv: TvConfig::default(),
            mlp: TrainConfig::default(),
            mlp_validation: MlpValidation::default(),
            gmvn_floor: DEFAULT_GMVN_FLOOR,
            output_dir: None,
            seed: 0,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported config schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.ubm.components == 0 || self.ubm.frame_stride == 0 {
            return Err(Error::config("UBM components and frame stride must be positive"));
        }
        if self.tv.rank == 0 {
            return Err(Error::config("i-vector rank must be positive"));
        }
        if !(self.tv.init_scale.is_finite() && self.tv.init_scale >= 0.0) {
            return Err(Error::config("T init scale must be finite and non-negative"));
        }
        if !(self.gmvn_floor.is_finite() && self.gmvn_floor > 0.0) {
            return Err(Error::config("GMVN floor must be positive"));
        }
        self.mlp.validate()?;
        self.system_spec()?;
        Ok(())
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        let o = &self.system;
        let base = if self.preset == CUSTOM_PRESET {
            None
        } else {
            Some(preset(&self.preset).ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
                Error::config(format!(
                    "unknown preset `{}`; expected one of {} or `{CUSTOM_PRESET}`",
                    self.preset,
                    names.join(", ")
                ))
            })?)
        };
        let grouping = match (&o.grouping, base) {
            (Some(g), _) => load_grouping(g)?,
            (None, Some(p)) => p.grouping.load(),
            (None, None) => return Err(Error::config("custom preset needs `system.grouping`")),
        };
        let pooling = o
            .pooling
            .or(base.map(|p| p.pooling))
            .unwrap_or(grouping.pooling);
        let grouping = grouping.with_pooling(pooling);
        grouping.check_shape()?;
        let sma_window = match (o.sma_window, base) {
            (Some(w), _) => w,
            (None, Some(p)) => p.sma_window,
            (None, None) => return Err(Error::config("custom preset needs `system.sma_window`")),
        };
        if sma_window == 0 {
            return Err(Error::config("SMA window must be at least 1"));
        }
        let name = o
            .name
            .clone()
            .unwrap_or_else(|| base.map_or_else(|| CUSTOM_PRESET.to_string(), |p| p.name.to_string()));
        Ok(SystemSpec {
            name,
            grouping,
            sma_window,
            sma_stage: o.sma_stage.unwrap_or_default(),
        })
    }

    /// Dataset path after applying `$COGLOAD_DATA_DIR` to relative paths.
    pub fn dataset_path(&self) -> PathBuf {
        resolve_data_path(&self.dataset, std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
    }

    pub fn load_dataset(&self) -> Result<EpochDataset> {
        load_dataset(&self.dataset_path())
    }

    /// Digest of everything that affects results; the output directory is
    /// excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let value = serde_json::to_value(&c).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canonical_json(&value).as_bytes());
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn split_description(&self) -> String {
        describe_split(&self.split)
    }

    /// Seed for one pipeline stage, derived from the experiment seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(stage.as_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }
}

fn load_grouping(spec: &str) -> Result<ChannelGrouping> {
    let bundled: std::result::Result<BundledGrouping, _> =
        serde_json::from_value(serde_json::Value::String(spec.to_string()));
    match bundled {
        Ok(b) => Ok(b.load()),
        Err(_) => ChannelGrouping::from_json(&std::fs::read_to_string(spec).map_err(|e| {
            Error::config(format!("grouping `{spec}` is neither bundled nor a readable file: {e}"))
        })?),
    }
}

pub(crate) fn resolve_data_path(path: &Path, data_dir: Option<PathBuf>) -> PathBuf {
    match data_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

/// Loads an EPO1 file, or a CSV manifest when the extension is `.json`.
pub fn load_dataset(path: &Path) -> Result<EpochDataset> {
    if !path.exists() {
        return Err(Error::config(format!("dataset {} does not exist", path.display())));
    }
    if path.extension().is_some_and(|e| e == "json") {
        import_csv(path)
    } else {
        load_epoch_file(path)
    }
}

fn join_set<T: ToString>(set: &BTreeSet<T>, empty: &str) -> String {
    if set.is_empty() {
        empty.to_string()
    } else {
        set.iter().map(T::to_string).collect::<Vec<_>>().join(",")
    }
}

pub fn describe_split(split: &SplitSpec) -> String {
    let mode = match split.mode {
        SplitMode::SubjectDependent => "subject-dependent",
        SplitMode::SubjectIndependent => "subject-independent",
        SplitMode::HeldOutSubjects => "held-out subjects",
    };
    let test_default = match split.mode {
        SplitMode::HeldOutSubjects => "rest",
        _ => "same",
    };
    format!(
        "{mode}; train subjects {} sessions {}; test subjects {} sessions {}",
        join_set(&split.train_subjects, "all"),
        join_set(&split.train_sessions, "-"),
        join_set(&split.test_subjects, test_default),
        join_set(&split.test_sessions, "-"),
    )
}

/// JSON with object keys sorted at every level.
fn canonical_json(v: &serde_json::Value) -> String {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), canonical_json(&map[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => {
            format!("[{}]", items.iter().map(canonical_json).collect::<Vec<_>>().join(","))
        }
        other => other.to_string(),
    }
}

/// A set of systems evaluated on one dataset and split and combined by
/// voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub schema_version: u32,
    pub dataset: PathBuf,
    pub split: SplitSpec,
    /// Preset names; defaults to all seven.
    #[serde(default = "all_presets")]
    pub systems: Vec<String>,
    #[serde(default)]
    pub sma_stage: SmaStage,
    #[serde(default)]
    pub ubm: UbmConfig,
    #[serde(default)]
    pub tv: TvConfig,
    #[serde(default)]
    pub mlp: TrainConfig,
    #[serde(default)]
    pub mlp_validation: MlpValidation,
    #[serde(default = "default_floor")]
    pub gmvn_floor: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn all_presets() -> Vec<String> {
    PRESETS.iter().map(|p| p.name.to_string()).collect()
}

impl EnsembleConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: EnsembleConfig = serde_json::from_str(text)?;
        config.system_configs()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// One experiment config per system; each writes to
    /// `<output_dir>/<system name>`.
    pub fn system_configs(&self) -> Result<Vec<ExperimentConfig>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported config schema version {}",
                self.schema_version
            )));
        }
        if self.systems.is_empty() {
            return Err(Error::config("ensemble needs at least one system"));
        }
        self.systems
            .iter()
            .map(|name| {
                let mut c = ExperimentConfig::for_preset(name, self.dataset.clone(), self.split.clone())?;
                c.system.sma_stage = Some(self.sma_stage);
                c.ubm = self.ubm.clone();
                c.tv = self.tv.clone();
                c.mlp = self.mlp.clone();
                c.mlp_validation = self.mlp_validation;
                c.gmvn_floor = self.gmvn_floor;
                c.output_dir = self.output_dir.as_ref().map(|d| d.join(name));
                c.seed = self.seed;
                c.validate()?;
                Ok(c)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig::for_preset("maxP21-SMA16", "data.epo", SplitSpec::subject_independent([1], [2]))
            .unwrap()
    }

    #[test]
    fn presets_match_the_system_table() {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        assert_eq!(
            names,
            [
                "sd31-SMA16",
                "avgP25-SMA16",
                "maxP25-SMA16",
                "avgP21-SMA16",
                "maxP21-SMA16",
                "avgP21-SMA20",
                "maxP21-SMA20"
            ]
        );
        let spec = config().system_spec().unwrap();
        assert_eq!(spec.grouping.group_count(), 21);
        assert_eq!(spec.grouping.pooling, Pooling::Max);
        assert_eq!(spec.sma_window, 16);
        assert_eq!(spec.sma_stage, SmaStage::Ivector);
        let sd = ExperimentConfig::for_preset("sd31-SMA16", "d", SplitSpec::subject_independent([1], [2])).unwrap();
        assert_eq!(sd.system_spec().unwrap().grouping.pooling, Pooling::None);
        let w20 = ExperimentConfig::for_preset("avgP21-SMA20", "d", SplitSpec::subject_independent([1], [2])).unwrap();
        assert_eq!(w20.system_spec().unwrap().sma_window, 20);
    }

    #[test]
    fn unknown_preset_is_a_config_error() {
        let mut c = config();
        c.preset = "maxP22-SMA16".into();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(ExperimentConfig::for_preset("nope", "d", c.split.clone()).is_err());
    }

    #[test]
    fn custom_needs_grouping_and_window() {
        let mut c = config();
        c.preset = CUSTOM_PRESET.into();
        assert!(matches!(c.system_spec(), Err(Error::Config(_))));
        c.system.grouping = Some("p25".into());
        assert!(c.system_spec().is_err());
        c.system.sma_window = Some(8);
        let spec = c.system_spec().unwrap();
        assert_eq!(spec.grouping.group_count(), 25);
        assert_eq!(spec.name, "custom");
    }

    #[test]
    fn overrides_apply_on_top_of_preset() {
        let mut c = config();
        c.system.pooling = Some(Pooling::Average);
        c.system.sma_stage = Some(SmaStage::Frame);
        let spec = c.system_spec().unwrap();
        assert_eq!(spec.grouping.pooling, Pooling::Average);
        assert_eq!(spec.sma_stage, SmaStage::Frame);
        c.system.pooling = Some(Pooling::None);
        assert!(c.system_spec().is_err());
        c.system.grouping = Some("sd31".into());
        assert_eq!(c.system_spec().unwrap().grouping.group_count(), 31);
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let text = r#"{
            "schema_version": 1,
            "dataset": "x.epo",
            "split": {"mode": "subject_independent", "train_sessions": [1, 2], "test_sessions": [3]},
            "preset": "avgP25-SMA16",
            "ubm": {"components": 64}
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.ubm.components, 64);
        assert_eq!(c.ubm.em_iterations, 20);
        assert_eq!(c.tv.rank, 80);
        assert_eq!(c.mlp, TrainConfig::default());
        let again = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
        assert!(ExperimentConfig::from_json(&text.replace("\"ubm\"", "\"umb\"")).is_err());
        assert!(matches!(
            ExperimentConfig::from_json(&text.replace("\"schema_version\": 1", "\"schema_version\": 9")),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = config();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.tv.rank = 81;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn stage_seeds_differ() {
        let c = config();
        assert_ne!(c.stage_seed("ubm"), c.stage_seed("tv"));
        assert_eq!(c.stage_seed("ubm"), config().stage_seed("ubm"));
    }

    #[test]
    fn data_dir_applies_to_relative_paths() {
        let dir = Some(PathBuf::from("/data"));
        assert_eq!(resolve_data_path(Path::new("a.epo"), dir.clone()), PathBuf::from("/data/a.epo"));
        assert_eq!(resolve_data_path(Path::new("/abs/a.epo"), dir), PathBuf::from("/abs/a.epo"));
        assert_eq!(resolve_data_path(Path::new("a.epo"), None), PathBuf::from("a.epo"));
    }

    #[test]
    fn ensemble_expands_systems() {
        let text = r#"{
            "schema_version": 1,
            "dataset": "x.epo",
            "split": {"mode": "subject_independent", "train_sessions": [1], "test_sessions": [2]},
            "output_dir": "out"
        }"#;
        let e = EnsembleConfig::from_json(text).unwrap();
        let configs = e.system_configs().unwrap();
        assert_eq!(configs.len(), 7);
        assert_eq!(configs[4].preset, "maxP21-SMA16");
        assert_eq!(configs[4].output_dir.as_deref(), Some(Path::new("out/maxP21-SMA16")));
        let hashes: BTreeSet<String> = configs.iter().map(ExperimentConfig::hash).collect();
        assert_eq!(hashes.len(), 7);
    }

    #[test]
    fn split_description_is_readable() {
        let s = describe_split(&SplitSpec::held_out_subjects([1, 2], [], [1, 2, 3], [3]));
        assert_eq!(s, "held-out subjects; train subjects 1,2 sessions 1,2,3; test subjects rest sessions 3");
    }
}
