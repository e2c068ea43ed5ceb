//! End-to-end and stage-by-stage drivers. Both go through the same stage
//! functions and the same artifact encoders, so chaining the stages from
//! disk gives the same results as one in-memory run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::artifacts::{
    names, read_lines, read_matrices, read_stamped, write_lines, write_matrices, write_stamped,
    MatrixItem,
};
use super::stages::{self, Featurized, Keyed, Prediction, Side};
use super::{ExperimentConfig, SmaStage, SystemSpec};
use crate::classifier::{MlpDocument, MlpModel};
use crate::dataset::{make_split, EpochDataset, Split, SplitMode};
use crate::ensemble::{mean_posteriors, vote_combine, SystemOutput, ENSEMBLE_NAME};
use crate::error::{Error, Result, StageExt};
use crate::eval::{render_report, render_table, EvalReport, ReportFormat};
use crate::features::FeatureSequence;
use crate::gmm::{BaumWelchStats, DiagonalGmm, GmmDocument};
use crate::ivector::{TotalVariability, TvDocument};
use crate::label::{subject_name, EpochKey, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Featurize,
    TrainUbm,
    AccumulateStats,
    TrainTv,
    Extract,
    Postprocess,
    TrainClf,
    Predict,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Featurize,
        Stage::TrainUbm,
        Stage::AccumulateStats,
        Stage::TrainTv,
        Stage::Extract,
        Stage::Postprocess,
        Stage::TrainClf,
        Stage::Predict,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Featurize => "featurize",
            Stage::TrainUbm => "train-ubm",
            Stage::AccumulateStats => "accumulate-stats",
            Stage::TrainTv => "train-tv",
            Stage::Extract => "extract",
            Stage::Postprocess => "postprocess",
            Stage::TrainClf => "train-clf",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub predictions: Vec<Prediction>,
    /// UBM log-likelihood trace per pipeline (one per subject in
    /// subject-dependent mode).
    pub ubm_traces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutcome {
    pub report: EvalReport,
    pub system_reports: Vec<EvalReport>,
    pub predictions: Vec<Prediction>,
}

struct Context {
    config: ExperimentConfig,
    hash: String,
    system: SystemSpec,
    split: String,
}

impl Context {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Context {
            config: config.clone(),
            hash: config.hash(),
            system: config.system_spec()?,
            split: config.split_description(),
        })
    }

    fn window(&self) -> usize {
        match self.system.sma_stage {
            SmaStage::Ivector => self.system.sma_window,
            SmaStage::Frame => 1,
        }
    }

    fn unit_dir(&self, subject: Option<u16>) -> Option<PathBuf> {
        let out = self.config.output_dir.as_ref()?;
        Some(match subject {
            Some(s) => out.join(subject_name(s)),
            None => out.clone(),
        })
    }

    fn require_output(&self) -> Result<&Path> {
        self.config
            .output_dir
            .as_deref()
            .ok_or_else(|| Error::config("this stage needs an output directory (`output_dir` or --out)"))
    }
}

/// One pipeline: all subjects pooled, or a single subject in
/// subject-dependent mode.
fn units<'a>(config: &ExperimentConfig, dataset: &'a EpochDataset) -> Result<Vec<(Option<u16>, Split<'a>)>> {
    let split = make_split(dataset, &config.split)?;
    Ok(match config.split.mode {
        SplitMode::SubjectDependent => split
            .per_subject()
            .into_iter()
            .map(|(s, sp)| (Some(s), sp))
            .collect(),
        _ => vec![(None, split)],
    })
}

const UNITS_FILE: &str = "units.json";

#[derive(Serialize, Deserialize)]
struct UnitList {
    subjects: Vec<Option<u16>>,
    channel_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct UbmArtifact {
    #[serde(flatten)]
    model: GmmDocument,
    em_trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct IvectorRecord {
    #[serde(flatten)]
    key: EpochKey,
    label: Label,
    side: Side,
    w: Vec<f64>,
}

fn write_units(dir: &Path, hash: &str, list: &UnitList) -> Result<()> {
    write_stamped(&dir.join(UNITS_FILE), hash, "featurize", list)
}

fn read_units(dir: &Path, hash: &str) -> Result<UnitList> {
    read_stamped(&dir.join(UNITS_FILE), hash)
}

fn to_items<T>(items: &[Keyed<T>], f: impl Fn(&T) -> Array2<f64>) -> Vec<MatrixItem> {
    items
        .iter()
        .map(|i| MatrixItem {
            key: i.key,
            label: i.label,
            side: i.side,
            values: f(&i.value),
        })
        .collect()
}

fn from_item<T>(m: MatrixItem, value: T) -> Keyed<T> {
    Keyed {
        key: m.key,
        label: m.label,
        side: m.side,
        value,
    }
}

fn save_features(dir: &Path, hash: &str, f: &Featurized) -> Result<()> {
    write_matrices(&dir.join(names::FEATURES), hash, "features", &to_items(&f.items, |v| v.values().clone()))?;
    if let Some(stats) = &f.frame_gmvn {
        write_stamped(&dir.join(names::FRAME_GMVN), hash, "featurize", stats)?;
    }
    Ok(())
}

fn load_features(dir: &Path, hash: &str) -> Result<Vec<Keyed<FeatureSequence>>> {
    read_matrices(&dir.join(names::FEATURES), hash, "features")?
        .into_iter()
        .map(|m| {
            let seq = FeatureSequence::new(m.values.clone())?;
            Ok(from_item(m, seq))
        })
        .collect()
}

fn save_ubm(dir: &Path, hash: &str, ubm: &DiagonalGmm, trace: &[f64]) -> Result<()> {
    let artifact = UbmArtifact {
        model: ubm.to_document(),
        em_trace: trace.to_vec(),
    };
    write_stamped(&dir.join(names::UBM), hash, "train-ubm", &artifact)
}

fn load_ubm(dir: &Path, hash: &str) -> Result<DiagonalGmm> {
    let artifact: UbmArtifact = read_stamped(&dir.join(names::UBM), hash)?;
    DiagonalGmm::from_document(&artifact.model)
}

fn save_stats(dir: &Path, hash: &str, stats: &[Keyed<BaumWelchStats>]) -> Result<()> {
    let items = to_items(stats, |st| {
        let mut m = Array2::zeros((st.components(), st.dim() + 1));
        m.column_mut(0).assign(&st.zeroth);
        m.slice_mut(s![.., 1..]).assign(&st.first_centered);
        m
    });
    write_matrices(&dir.join(names::STATS), hash, "stats", &items)
}

fn load_stats(dir: &Path, hash: &str) -> Result<Vec<Keyed<BaumWelchStats>>> {
    read_matrices(&dir.join(names::STATS), hash, "stats")?
        .into_iter()
        .map(|m| {
            if m.values.ncols() < 2 {
                return Err(Error::Corruption("statistics matrix is too narrow".into()));
            }
            let st = BaumWelchStats {
                zeroth: m.values.column(0).to_owned(),
                first_centered: m.values.slice(s![.., 1..]).to_owned(),
            };
            Ok(from_item(m, st))
        })
        .collect()
}

fn save_tv(dir: &Path, hash: &str, tv: &TotalVariability) -> Result<()> {
    write_stamped(&dir.join(names::TV), hash, "train-tv", &tv.to_document())
}

fn load_tv(dir: &Path, hash: &str, ubm: DiagonalGmm) -> Result<TotalVariability> {
    let doc: TvDocument = read_stamped(&dir.join(names::TV), hash)?;
    TotalVariability::from_document(&doc, ubm)
}

fn save_ivectors(path: &Path, hash: &str, stage: &str, items: &[Keyed<Vec<f64>>]) -> Result<()> {
    let records: Vec<IvectorRecord> = items
        .iter()
        .map(|i| IvectorRecord {
            key: i.key,
            label: i.label,
            side: i.side,
            w: i.value.clone(),
        })
        .collect();
    write_lines(path, hash, stage, &records)
}

fn load_ivectors(path: &Path, hash: &str) -> Result<Vec<Keyed<Vec<f64>>>> {
    Ok(read_lines::<IvectorRecord>(path, hash)?
        .into_iter()
        .map(|r| Keyed {
            key: r.key,
            label: r.label,
            side: r.side,
            value: r.w,
        })
        .collect())
}

fn save_mlp(dir: &Path, hash: &str, model: &MlpModel) -> Result<()> {
    write_stamped(&dir.join(names::MLP), hash, "train-clf", &model.to_document())
}

fn load_mlp(dir: &Path, hash: &str) -> Result<MlpModel> {
    let doc: MlpDocument = read_stamped(&dir.join(names::MLP), hash)?;
    MlpModel::from_document(&doc)
}

fn save_report(dir: &Path, hash: &str, report: &EvalReport) -> Result<()> {
    write_stamped(&dir.join(names::REPORT_JSON), hash, "evaluate", report)?;
    let text = format!("config: {hash}\n{}", render_report(report, ReportFormat::Text));
    fs::write(dir.join(names::REPORT_TEXT), text)?;
    fs::write(dir.join(names::REPORT_CSV), render_report(report, ReportFormat::Csv))?;
    Ok(())
}

/// Reads the predictions a finished run left in `dir`.
pub(crate) fn load_predictions(dir: &Path, hash: &str) -> Result<Vec<Prediction>> {
    read_lines(&dir.join(names::PREDICTIONS), hash)
}

fn staged<T>(stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("stage {}", stage.name());
    f().map_err(|e| e.in_stage(stage.name()))
}

struct UnitResult {
    report: EvalReport,
    predictions: Vec<Prediction>,
    trace: Vec<f64>,
}

fn run_unit(ctx: &Context, channel_names: &[String], subject: Option<u16>, split: &Split<'_>) -> Result<UnitResult> {
    let c = &ctx.config;
    let h = ctx.hash.as_str();
    let dir = ctx.unit_dir(subject);
    if let Some(d) = &dir {
        fs::create_dir_all(d)?;
    }
    let dir = dir.as_deref();

    let feats = staged(Stage::Featurize, || {
        let f = stages::featurize(&ctx.system, channel_names, split, c.gmvn_floor)?;
        if let Some(d) = dir {
            save_features(d, h, &f)?;
        }
        Ok(f)
    })?;
    let (ubm, trace) = staged(Stage::TrainUbm, || {
        let (ubm, trace) = stages::train_ubm(&feats.items, &c.ubm, c.stage_seed("ubm"))?;
        if let Some(d) = dir {
            save_ubm(d, h, &ubm, &trace)?;
        }
        Ok((ubm, trace))
    })?;
    let stats = staged(Stage::AccumulateStats, || {
        let st = stages::accumulate_stats(&ubm, &feats.items)?;
        if let Some(d) = dir {
            save_stats(d, h, &st)?;
        }
        Ok(st)
    })?;
    drop(feats);
    let tv = staged(Stage::TrainTv, || {
        let tv = stages::train_tv(&ubm, &stats, &c.tv, c.stage_seed("tv"))?;
        if let Some(d) = dir {
            save_tv(d, h, &tv)?;
        }
        Ok(tv)
    })?;
    let raw = staged(Stage::Extract, || {
        let raw = stages::extract(&tv, &stats)?;
        if let Some(d) = dir {
            save_ivectors(&d.join(names::IVECTORS_RAW), h, "extract", &raw)?;
        }
        Ok(raw)
    })?;
    let ivectors = staged(Stage::Postprocess, || {
        let (iv, gmvn) = stages::postprocess(&raw, ctx.window(), c.gmvn_floor)?;
        if let Some(d) = dir {
            save_ivectors(&d.join(names::IVECTORS), h, "postprocess", &iv)?;
            write_stamped(&d.join(names::IVECTOR_GMVN), h, "postprocess", &gmvn)?;
        }
        Ok(iv)
    })?;
    let model = staged(Stage::TrainClf, || {
        let mut mlp = c.mlp.clone();
        mlp.seed = c.stage_seed("mlp").wrapping_add(c.mlp.seed);
        let model = stages::train_classifier(&ivectors, &mlp, c.mlp_validation)?;
        if let Some(d) = dir {
            save_mlp(d, h, &model)?;
        }
        Ok(model)
    })?;
    let predictions = staged(Stage::Predict, || {
        let p = stages::predict(&model, &ivectors, &ctx.system.name)?;
        if let Some(d) = dir {
            write_lines(&d.join(names::PREDICTIONS), h, "predict", &p)?;
        }
        Ok(p)
    })?;
    let report = staged(Stage::Evaluate, || {
        let r = stages::evaluate_predictions(&predictions, &ctx.system.name, &ctx.split)?;
        if let Some(d) = dir {
            save_report(d, h, &r)?;
        }
        Ok(r)
    })?;
    Ok(UnitResult {
        report,
        predictions,
        trace,
    })
}

/// Merges per-subject results and writes the top-level outputs.
fn finish(ctx: &Context, results: Vec<(Option<u16>, EvalReport, Vec<Prediction>)>) -> Result<(EvalReport, Vec<Prediction>)> {
    let pooled = results.len() == 1 && results[0].0.is_none();
    let (report, predictions) = if pooled {
        let (_, r, p) = results.into_iter().next().expect("one unit");
        (r, p)
    } else {
        let reports: Vec<EvalReport> = results.iter().map(|(_, r, _)| r.clone()).collect();
        let mut preds: Vec<Prediction> = results.into_iter().flat_map(|(_, _, p)| p).collect();
        preds.sort_by_key(|p| p.key);
        (EvalReport::merge(&ctx.system.name, &ctx.split, &reports)?, preds)
    };
    if let (Some(out), false) = (ctx.config.output_dir.as_deref(), pooled) {
        write_lines(&out.join(names::PREDICTIONS), &ctx.hash, "predict", &predictions)?;
        save_report(out, &ctx.hash, &report)?;
    }
    Ok((report, predictions))
}

/// Runs every stage. With an output directory every intermediate is
/// written as it is produced, so a failed run leaves its partial outputs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let ctx = Context::new(config)?;
    let dataset = config.load_dataset()?;
    let units = units(config, &dataset)?;
    if let Some(out) = &config.output_dir {
        fs::create_dir_all(out)?;
        let list = UnitList {
            subjects: units.iter().map(|(s, _)| *s).collect(),
            channel_names: dataset.channel_names().to_vec(),
        };
        write_units(out, &ctx.hash, &list)?;
    }
    log::info!("running {} ({}) config {}", ctx.system.name, ctx.split, ctx.hash);
    let mut results = Vec::new();
    let mut traces = Vec::new();
    for (subject, split) in &units {
        if let Some(s) = subject {
            log::info!("subject {}", subject_name(*s));
        }
        let r = run_unit(&ctx, dataset.channel_names(), *subject, split)?;
        traces.push(r.trace);
        results.push((*subject, r.report, r.predictions));
    }
    let (report, predictions) = finish(&ctx, results)?;
    Ok(ExperimentOutcome {
        report,
        predictions,
        ubm_traces: traces,
    })
}

/// Runs one stage from the artifacts of the previous stages in the output
/// directory. Returns the report for [`Stage::Evaluate`].
pub fn run_stage(config: &ExperimentConfig, stage: Stage) -> Result<Option<EvalReport>> {
    let ctx = Context::new(config)?;
    let out = ctx.require_output()?.to_path_buf();
    let h = ctx.hash.as_str();
    let c = &ctx.config;

    if stage == Stage::Featurize {
        let dataset = config.load_dataset()?;
        let units = units(config, &dataset)?;
        fs::create_dir_all(&out)?;
        write_units(
            &out,
            h,
            &UnitList {
                subjects: units.iter().map(|(s, _)| *s).collect(),
                channel_names: dataset.channel_names().to_vec(),
            },
        )?;
        for (subject, split) in &units {
            let dir = ctx.unit_dir(*subject).expect("output dir set");
            fs::create_dir_all(&dir)?;
            staged(stage, || {
                let f = stages::featurize(&ctx.system, dataset.channel_names(), split, c.gmvn_floor)?;
                save_features(&dir, h, &f)
            })?;
        }
        return Ok(None);
    }

    let list = read_units(&out, h).stage(stage.name())?;
    let mut results = Vec::new();
    for subject in list.subjects {
        let dir = ctx.unit_dir(subject).expect("output dir set");
        let d = dir.as_path();
        staged(stage, || {
            match stage {
                Stage::Featurize => unreachable!("handled above"),
                Stage::TrainUbm => {
                    let feats = load_features(d, h)?;
                    let (ubm, trace) = stages::train_ubm(&feats, &c.ubm, c.stage_seed("ubm"))?;
                    save_ubm(d, h, &ubm, &trace)?;
                }
                Stage::AccumulateStats => {
                    let ubm = load_ubm(d, h)?;
                    let feats = load_features(d, h)?;
                    save_stats(d, h, &stages::accumulate_stats(&ubm, &feats)?)?;
                }
                Stage::TrainTv => {
                    let ubm = load_ubm(d, h)?;
                    let stats = load_stats(d, h)?;
                    save_tv(d, h, &stages::train_tv(&ubm, &stats, &c.tv, c.stage_seed("tv"))?)?;
                }
                Stage::Extract => {
                    let ubm = load_ubm(d, h)?;
                    let tv = load_tv(d, h, ubm)?;
                    let stats = load_stats(d, h)?;
                    save_ivectors(&d.join(names::IVECTORS_RAW), h, "extract", &stages::extract(&tv, &stats)?)?;
                }
                Stage::Postprocess => {
                    let raw = load_ivectors(&d.join(names::IVECTORS_RAW), h)?;
                    let (iv, gmvn) = stages::postprocess(&raw, ctx.window(), c.gmvn_floor)?;
                    save_ivectors(&d.join(names::IVECTORS), h, "postprocess", &iv)?;
                    write_stamped(&d.join(names::IVECTOR_GMVN), h, "postprocess", &gmvn)?;
                }
                Stage::TrainClf => {
                    let iv = load_ivectors(&d.join(names::IVECTORS), h)?;
                    let mut mlp = c.mlp.clone();
                    mlp.seed = c.stage_seed("mlp").wrapping_add(c.mlp.seed);
                    save_mlp(d, h, &stages::train_classifier(&iv, &mlp, c.mlp_validation)?)?;
                }
                Stage::Predict => {
                    let iv = load_ivectors(&d.join(names::IVECTORS), h)?;
                    let model = load_mlp(d, h)?;
                    let p = stages::predict(&model, &iv, &ctx.system.name)?;
                    write_lines(&d.join(names::PREDICTIONS), h, "predict", &p)?;
                }
                Stage::Evaluate => {
                    let p = load_predictions(d, h)?;
                    let r = stages::evaluate_predictions(&p, &ctx.system.name, &ctx.split)?;
                    save_report(d, h, &r)?;
                    results.push((subject, r, p));
                }
            }
            Ok(())
        })?;
    }
    if stage == Stage::Evaluate {
        let (report, _) = staged(stage, || finish(&ctx, results))?;
        return Ok(Some(report));
    }
    Ok(None)
}

fn ensemble_hash(hashes: &[String]) -> String {
    let mut h = Sha256::new();
    for x in hashes {
        h.update(x.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Predictions from a finished run in the system's output directory, or a
/// fresh run when there is none.
fn system_predictions(config: &ExperimentConfig) -> Result<(EvalReport, Vec<Prediction>)> {
    if let Some(dir) = &config.output_dir {
        if dir.join(names::PREDICTIONS).exists() {
            let hash = config.hash();
            let name = config.system_spec()?.name;
            log::info!("reusing predictions of {name} from {}", dir.display());
            let preds = load_predictions(dir, &hash)?;
            let report = stages::evaluate_predictions(&preds, &name, &config.split_description())?;
            return Ok((report, preds));
        }
    }
    let outcome = run_experiment(config)?;
    Ok((outcome.report, outcome.predictions))
}

/// Runs (or reuses) each system and combines their test predictions by
/// voting. All configs must share the dataset and split.
pub fn run_ensemble(configs: &[ExperimentConfig], output_dir: Option<&Path>) -> Result<EnsembleOutcome> {
    let first = configs
        .first()
        .ok_or_else(|| Error::config("ensemble needs at least one system"))?;
    for c in configs {
        c.validate()?;
        if c.dataset_path() != first.dataset_path() {
            return Err(Error::config(format!(
                "ensemble systems use different datasets: {} vs {}",
                first.dataset_path().display(),
                c.dataset_path().display()
            )));
        }
        if c.split != first.split {
            return Err(Error::config("ensemble systems use different splits"));
        }
    }
    let hashes: Vec<String> = configs.iter().map(ExperimentConfig::hash).collect();
    let mut unique: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, h) in hashes.iter().enumerate() {
        unique.entry(h.as_str()).or_insert(i);
    }
    let jobs: Vec<usize> = {
        let mut v: Vec<usize> = unique.values().copied().collect();
        v.sort_unstable();
        v
    };
    let done: Vec<(EvalReport, Vec<Prediction>)> = jobs
        .par_iter()
        .map(|&i| system_predictions(&configs[i]))
        .collect::<Result<_>>()?;
    let by_hash: BTreeMap<&str, &(EvalReport, Vec<Prediction>)> =
        jobs.iter().map(|&i| hashes[i].as_str()).zip(done.iter()).collect();
    let per_system: Vec<&(EvalReport, Vec<Prediction>)> = hashes.iter().map(|h| by_hash[h.as_str()]).collect();

    let mut epochs: BTreeMap<EpochKey, (Label, Vec<SystemOutput>)> = BTreeMap::new();
    for (k, (_, preds)) in per_system.iter().enumerate() {
        if k > 0 && preds.len() != epochs.len() {
            return Err(Error::validation("ensemble systems predicted different epoch sets"));
        }
        for p in preds {
            let out = SystemOutput {
                system_name: p.system_name.clone(),
                posteriors: p.posteriors,
                predicted: p.predicted,
            };
            match epochs.get_mut(&p.key) {
                Some((label, outs)) if *label == p.label => outs.push(out),
                Some(_) => return Err(Error::validation(format!("systems disagree on the label of {:?}", p.key))),
                None if k == 0 => {
                    epochs.insert(p.key, (p.label, vec![out]));
                }
                None => return Err(Error::validation(format!("epoch {:?} missing from the first system", p.key))),
            }
        }
    }
    let name = if configs.len() == 7 {
        ENSEMBLE_NAME.to_string()
    } else {
        format!("{}-system", configs.len())
    };
    let predictions: Vec<Prediction> = epochs
        .iter()
        .map(|(key, (label, outs))| {
            Ok(Prediction {
                key: *key,
                label: *label,
                system_name: name.clone(),
                posteriors: mean_posteriors(outs),
                predicted: vote_combine(outs)?,
            })
        })
        .collect::<Result<_>>()?;
    let report = stages::evaluate_predictions(&predictions, &name, &first.split_description())?;
    let system_reports: Vec<EvalReport> = per_system.iter().map(|(r, _)| r.clone()).collect();
    if let Some(out) = output_dir {
        fs::create_dir_all(out)?;
        let h = ensemble_hash(&hashes);
        write_lines(&out.join(names::PREDICTIONS), &h, "ensemble", &predictions)?;
        save_report(out, &h, &report)?;
        let mut table: Vec<EvalReport> = Vec::new();
        for r in &system_reports {
            if !table.iter().any(|t| t.system == r.system) {
                table.push(r.clone());
            }
        }
        table.push(report.clone());
        fs::write(out.join("table.txt"), render_table(&table))?;
    }
    Ok(EnsembleOutcome {
        report,
        system_reports,
        predictions,
    })
}
