//! `cogload`: stage-by-stage and one-shot experiment runner.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cogload::dataset::{import_csv, synth_generate, write_epoch_file};
use cogload::eval::{render_report, render_table, ReportFormat};
use cogload::experiment::{run_stage, Stage, PRESETS};
use cogload::{run_ensemble, run_experiment, EnsembleConfig, Error, ExperimentConfig, Result, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "cogload", version, about = "EEG cognitive-load classification with i-vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format printed to stdout.
    #[arg(long, global = true, default_value = "text")]
    format: ReportFormat,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus into `<out>/dataset.epo`.
    Synth,
    /// Convert a CSV manifest into `<out>/dataset.epo`.
    ImportCsv,
    Featurize,
    TrainUbm,
    AccumulateStats,
    TrainTv,
    Extract,
    Postprocess,
    TrainClf,
    Predict,
    Evaluate,
    /// Run or reuse several systems and combine them by voting.
    Ensemble,
    /// Run every stage of one system.
    Run,
    /// List the named system presets.
    Presets,
}

impl Command {
    fn stage(&self) -> Option<Stage> {
        Some(match self {
            Command::Featurize => Stage::Featurize,
            Command::TrainUbm => Stage::TrainUbm,
            Command::AccumulateStats => Stage::AccumulateStats,
            Command::TrainTv => Stage::TrainTv,
            Command::Extract => Stage::Extract,
            Command::Postprocess => Stage::Postprocess,
            Command::TrainClf => Stage::TrainClf,
            Command::Predict => Stage::Predict,
            Command::Evaluate => Stage::Evaluate,
            _ => return None,
        })
    }
}

fn require_config(cli: &Cli) -> Result<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required for this subcommand".into()))
}

fn require_out(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required for this subcommand".into()))
}

fn experiment_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(require_config(cli)?)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = Some(out.clone());
    }
    Ok(config)
}

fn write_dataset(out: &Path, dataset: &cogload::EpochDataset) -> Result<()> {
    fs::create_dir_all(out)?;
    let path = out.join("dataset.epo");
    write_epoch_file(dataset, &path)?;
    log::info!("wrote {} epochs to {}", dataset.len(), path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))?;
    }
    if let Some(stage) = cli.command.stage() {
        let config = experiment_config(cli)?;
        if let Some(report) = run_stage(&config, stage)? {
            print!("{}", render_report(&report, cli.format));
        }
        return Ok(());
    }
    match cli.command {
        Command::Synth => {
            let mut config = match &cli.config {
                Some(path) => serde_json::from_str::<SynthConfig>(&fs::read_to_string(path)?)?,
                None => SynthConfig::default(),
            };
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            write_dataset(require_out(cli)?, &synth_generate(&config)?)
        }
        Command::ImportCsv => write_dataset(require_out(cli)?, &import_csv(require_config(cli)?)?),
        Command::Run => {
            let outcome = run_experiment(&experiment_config(cli)?)?;
            print!("{}", render_report(&outcome.report, cli.format));
            Ok(())
        }
        Command::Ensemble => {
            let mut config = EnsembleConfig::load(require_config(cli)?)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            if let Some(out) = &cli.out {
                config.output_dir = Some(out.clone());
            }
            let outcome = run_ensemble(&config.system_configs()?, config.output_dir.as_deref())?;
            match cli.format {
                ReportFormat::Text => {
                    let mut all = outcome.system_reports.clone();
                    all.dedup_by(|a, b| a.system == b.system);
                    all.push(outcome.report);
                    print!("{}", render_table(&all));
                }
                format => print!("{}", render_report(&outcome.report, format)),
            }
            Ok(())
        }
        Command::Presets => {
            for p in PRESETS {
                println!(
                    "{:<14} {:>2} groups  pooling {:<7}  SMA {}",
                    p.name,
                    p.grouping.group_count(),
                    p.pooling.to_string(),
                    p.sma_window
                );
            }
            Ok(())
        }
        _ => unreachable!("stage subcommands are handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
