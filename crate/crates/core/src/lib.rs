//! Subject-independent EEG cognitive-load classification with i-vectors.
//!
//! The pipeline pools or selects EEG channels into frame features, trains a
//! diagonal-covariance GMM universal background model, extracts fixed-size
//! i-vectors per 2-second epoch through a total-variability model, smooths
//! and normalizes the i-vector series, and classifies each epoch into one of
//! three workload levels with a small neural network. Several such systems
//! can be combined by voting.

pub mod classifier;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod gmm;
pub mod ivector;
pub mod label;
pub mod linalg;
pub mod montage;

pub use dataset::{EpochDataset, EpochRecord, SplitMode, SplitSpec, SynthConfig};
pub use classifier::{MlpModel, TrainConfig};
pub use ensemble::{vote_combine, SystemOutput};
pub use error::{Error, Result};
pub use eval::{evaluate, render_report, EvalReport, ReportFormat};
pub use experiment::{run_ensemble, run_experiment, EnsembleConfig, ExperimentConfig};
pub use features::{BundledGrouping, ChannelGrouping, FeatureSequence, GmvnStats, Pooling};
pub use gmm::{BaumWelchStats, DiagonalGmm};
pub use ivector::{IVector, TotalVariability};
pub use label::{EpochKey, Label};
