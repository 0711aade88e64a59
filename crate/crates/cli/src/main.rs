//! `forensic`: command-line front end for the ratio-based fraud analytics
//! pipeline. Each subcommand runs one stage; `run` chains all of them.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::fs::{self, File};
use std::io::{self, Write};
use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forensic_core::ingest::{write_statements, Industry};
use forensic_core::metrics::{cross_validate, render_table};
use forensic_core::models::{FittedModel, ModelKind, ModelParams, ModelSpec};
use forensic_core::pipeline::{
    cv_options, industry_folds, ingest_inputs, matched_sample, run_from_observations, run_pipeline,
    too_small_for_folds, PipelineConfig, PipelineError, PipelineRun, SelectionMode, Stage,
    StageContext,
};
use forensic_core::ratios::{
    observations_from_statements, read_observations, write_observations, Observation, Ratio,
};
use forensic_core::rules::extract_rules;
use forensic_core::sampling::write_folds_csv;
use forensic_core::stats::{
    correlation_matrix, published_preset, select_features, write_correlation_csv,
};
use forensic_core::synth::{generate_dataset, SynthConfig};
use forensic_core::Error;

#[derive(Parser)]
#[command(
    name = "forensic",
    version,
    about = "Financial-ratio fraud analytics: selection, models, red-flag rules"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// AUC from hard 0/1 predictions instead of scores.
    #[arg(long, global = true)]
    hard_auc: bool,
    /// Keep fraud cases that found no same-industry, same-year control.
    #[arg(long, global = true)]
    keep_unmatched: bool,
    /// Repeat feature selection inside each training fold.
    #[arg(long, global = true)]
    selection_in_folds: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate statement CSVs and write the accepted rows.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rejections: Option<PathBuf>,
    },
    /// Compute the twenty ratios for every accepted statement.
    Ratios {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mann-Whitney screening and redundancy pruning per industry (JSON).
    Select {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        industry: Option<Industry>,
        /// Use the published per-industry subsets instead of testing.
        #[arg(long)]
        preset: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kendall tau-a matrix of the ratios within one industry (CSV).
    Correlate {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        industry: Industry,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Matched sample and stratified fold assignment for one industry.
    Sample {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        industry: Industry,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Select, cross-validate and extract rules from an observations table.
    Train {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Cross-validate chosen models on one industry and print mean metrics.
    Evaluate {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        industry: Industry,
        /// Model codes (LDA, QDA, LR, AB, DT, BT, RF); default all configured.
        #[arg(long, value_delimiter = ',')]
        models: Vec<ModelKind>,
        /// Ratio list, e.g. RETA,CATA; default runs feature selection.
        #[arg(long, value_delimiter = ',')]
        features: Vec<Ratio>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Red-flag rules from a fitted decision tree (tree.json).
    Rules {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        industry: Industry,
        #[arg(long)]
        min_fraud_fraction: Option<f64>,
        #[arg(long)]
        min_support: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate labelled synthetic statements.
    Synth {
        #[arg(long)]
        industry: Industry,
        #[arg(long, default_value_t = 200)]
        n_per_class: usize,
        #[arg(long, default_value_t = 2.0)]
        separation: f64,
        #[arg(long, value_delimiter = ',')]
        informative: Vec<Ratio>,
        #[arg(long)]
        out: PathBuf,
    },
    /// The whole pipeline, writing all artifacts and a manifest.
    Run {
        /// Statement CSVs; overrides `inputs` in the config.
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also copy each industry report to this directory as a regression fixture.
        #[arg(long, value_name = "DIR")]
        golden: Option<PathBuf>,
        /// Print the effective configuration as TOML and exit.
        #[arg(long)]
        print_config: bool,
    },
}

type CliResult<T> = Result<T, PipelineError>;

fn exit_code(e: &PipelineError) -> u8 {
    match e.source {
        Error::NothingToRank | Error::LengthMismatch { .. } | Error::DimensionMismatch { .. } => 3,
        _ => 2,
    }
}

fn config(global: &GlobalArgs) -> CliResult<PipelineConfig> {
    let mut cfg = match &global.config {
        Some(path) => PipelineConfig::load(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            .stage(Stage::Config)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    cfg.hard_auc |= global.hard_auc;
    cfg.keep_unmatched |= global.keep_unmatched;
    cfg.selection_in_folds |= global.selection_in_folds;
    cfg.validate().stage(Stage::Config)?;
    Ok(cfg)
}

fn create(path: &Path, stage: Stage) -> CliResult<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(Error::from)
            .stage(stage)?;
    }
    File::create(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
        .stage(stage)
}

/// Writes to `out` or, when absent, to stdout.
fn emit(
    out: Option<&Path>,
    stage: Stage,
    f: impl FnOnce(&mut dyn Write) -> forensic_core::Result<()>,
) -> CliResult<()> {
    match out {
        Some(path) => {
            let mut file = create(path, stage)?;
            f(&mut file).stage(stage)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).stage(stage)
        }
    }
}

fn load_observations(path: &Path) -> CliResult<Vec<Observation>> {
    let file = File::open(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
        .stage(Stage::Ratios)?;
    read_observations(file).stage(Stage::Ratios)
}

fn in_industry(obs: &[Observation], industry: Industry) -> Vec<Observation> {
    obs.iter()
        .filter(|o| o.industry == industry)
        .cloned()
        .collect()
}

fn write_json<T: serde::Serialize + ?Sized>(
    w: &mut dyn Write,
    value: &T,
) -> forensic_core::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn print_run_summary(run: &PipelineRun) {
    for out in &run.industries {
        match &out.report {
            Some(_) => {
                println!(
                    "{}: {} models evaluated, {} red-flag rules",
                    out.industry,
                    out.evaluations.len(),
                    out.rules.len()
                );
                for f in &out.failures {
                    eprintln!(
                        "warning: {} {} failed: {}",
                        out.industry, f.model, f.message
                    );
                }
            }
            None => println!("{}: skipped ({:?})", out.industry, out.status),
        }
    }
    if run.manifest.partial {
        eprintln!("warning: some stages failed; the manifest is marked partial");
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let cfg = config(&cli.global)?;
    match cli.command {
        Command::Ingest {
            inputs,
            out,
            rejections,
        } => {
            let cfg = PipelineConfig { inputs, ..cfg };
            let (statements, rejected, _) = ingest_inputs(&cfg)?;
            write_statements(&statements, create(&out, Stage::Ingest)?).stage(Stage::Ingest)?;
            let rows: Vec<_> = rejected.into_iter().map(|(_, r)| r).collect();
            if let Some(path) = rejections {
                forensic_core::ingest::write_rejections(&rows, create(&path, Stage::Ingest)?)
                    .stage(Stage::Ingest)?;
            }
            eprintln!(
                "{} statements accepted, {} rows rejected",
                statements.len(),
                rows.len()
            );
        }
        Command::Ratios { inputs, out } => {
            let cfg = PipelineConfig { inputs, ..cfg };
            let (statements, rejected, _) = ingest_inputs(&cfg)?;
            let obs = observations_from_statements(&statements);
            write_observations(&obs, create(&out, Stage::Ratios)?).stage(Stage::Ratios)?;
            eprintln!(
                "{} observations written, {} rows rejected",
                obs.len(),
                rejected.len()
            );
        }
        Command::Select {
            observations,
            industry,
            preset,
            out,
        } => {
            let obs = load_observations(&observations)?;
            let industries: Vec<Industry> = match industry {
                Some(i) => vec![i],
                None => Industry::ALL
                    .into_iter()
                    .filter(|i| obs.iter().any(|o| o.industry == *i))
                    .collect(),
            };
            let mut selections = Vec::new();
            for i in industries {
                let sel = if preset || cfg.selection == SelectionMode::PublishedPreset {
                    published_preset(i)
                } else {
                    let (sample, _) =
                        matched_sample(&cfg, &in_industry(&obs, i)).stage(Stage::Sample)?;
                    select_features(&sample, i, cfg.selection_params()).stage(Stage::Select)?
                };
                selections.push(sel);
            }
            emit(out.as_deref(), Stage::Select, |w| {
                write_json(w, &selections)
            })?;
        }
        Command::Correlate {
            observations,
            industry,
            out,
        } => {
            let obs = load_observations(&observations)?;
            let (sample, _) =
                matched_sample(&cfg, &in_industry(&obs, industry)).stage(Stage::Sample)?;
            let m = correlation_matrix(&sample);
            emit(out.as_deref(), Stage::Select, |w| {
                write_correlation_csv(&m, w)
            })?;
        }
        Command::Sample {
            observations,
            industry,
            k,
            out_dir,
        } => {
            let cfg = PipelineConfig {
                cv_k: k.unwrap_or(cfg.cv_k),
                ..cfg
            };
            cfg.validate().stage(Stage::Config)?;
            let obs = load_observations(&observations)?;
            let (sample, matching) =
                matched_sample(&cfg, &in_industry(&obs, industry)).stage(Stage::Sample)?;
            if let Some(reason) = too_small_for_folds(&cfg, &sample) {
                return Err(Error::InsufficientData(reason)).stage(Stage::Sample);
            }
            let folds = industry_folds(&cfg, industry, &sample).stage(Stage::Sample)?;
            emit(Some(&out_dir.join("matching.json")), Stage::Sample, |w| {
                write_json(w, &matching)
            })?;
            emit(Some(&out_dir.join("folds.csv")), Stage::Sample, |w| {
                write_folds_csv(&sample, &folds, w)
            })?;
            eprintln!(
                "{} matched pairs, {} cases in {} folds",
                matching.pairs,
                sample.len(),
                folds.k
            );
        }
        Command::Train {
            observations,
            out_dir,
        } => {
            let obs = load_observations(&observations)?;
            let cfg = PipelineConfig {
                output_dir: out_dir.unwrap_or(cfg.output_dir.clone()),
                ..cfg
            };
            print_run_summary(&run_from_observations(&cfg, &obs)?);
        }
        Command::Evaluate {
            observations,
            industry,
            models,
            features,
            out,
        } => {
            let obs = load_observations(&observations)?;
            let (sample, _) =
                matched_sample(&cfg, &in_industry(&obs, industry)).stage(Stage::Sample)?;
            if let Some(reason) = too_small_for_folds(&cfg, &sample) {
                return Err(Error::InsufficientData(reason)).stage(Stage::Sample);
            }
            let folds = industry_folds(&cfg, industry, &sample).stage(Stage::Sample)?;
            let features = if features.is_empty() {
                select_features(&sample, industry, cfg.selection_params())
                    .stage(Stage::Select)?
                    .selected
            } else {
                features
            };
            let models = if models.is_empty() {
                cfg.models.clone()
            } else {
                models
            };
            let mut reports = Vec::new();
            for kind in models {
                let spec = ModelSpec {
                    kind,
                    hyperparameters: cfg.hyperparameters.clone(),
                };
                let mut r = cross_validate(
                    &sample,
                    &folds,
                    &spec,
                    &features,
                    cv_options(&cfg, industry),
                )
                .stage(Stage::Train)?;
                r.industry = Some(industry);
                reports.push(r);
            }
            print!("{}", render_table(&reports));
            if let Some(path) = out {
                emit(Some(&path), Stage::Report, |w| write_json(w, &reports))?;
            }
        }
        Command::Rules {
            tree,
            industry,
            min_fraud_fraction,
            min_support,
            out,
        } => {
            let text = fs::read_to_string(&tree)
                .map_err(|e| {
                    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", tree.display())))
                })
                .stage(Stage::Rules)?;
            let model = FittedModel::from_json(&text).stage(Stage::Rules)?;
            let ModelParams::Tree(t) = &model.model else {
                return Err(Error::InvalidParameter(format!(
                    "{} is a {} model, not a decision tree",
                    tree.display(),
                    model.kind
                )))
                .stage(Stage::Rules);
            };
            let rules = extract_rules(
                &t.root,
                &model.preprocessing.features,
                industry,
                min_fraud_fraction.unwrap_or(cfg.min_fraud_fraction),
                min_support.unwrap_or(cfg.min_support),
            )
            .stage(Stage::Rules)?;
            for (i, r) in rules.iter().enumerate() {
                println!(
                    "{}. IF {} (fraud fraction {:.3}, support {})",
                    i + 1,
                    r.describe(),
                    r.fraud_fraction,
                    r.support
                );
            }
            if let Some(path) = out {
                emit(Some(&path), Stage::Rules, |w| write_json(w, &rules))?;
            }
        }
        Command::Synth {
            industry,
            n_per_class,
            separation,
            informative,
            out,
        } => {
            let sc = SynthConfig {
                n_per_class,
                industry,
                separation,
                informative_ratios: informative,
                seed: cfg.seed,
                window: cfg.window,
            };
            let data = generate_dataset(&sc).stage(Stage::Ingest)?;
            write_statements(&data, create(&out, Stage::Ingest)?).stage(Stage::Ingest)?;
            eprintln!("{} statements written to {}", data.len(), out.display());
        }
        Command::Run {
            inputs,
            out_dir,
            golden,
            print_config,
        } => {
            let mut cfg = cfg;
            if !inputs.is_empty() {
                cfg.inputs = inputs;
            }
            if let Some(dir) = out_dir {
                cfg.output_dir = dir;
            }
            if print_config {
                print!("{}", cfg.to_toml_string().stage(Stage::Config)?);
                return Ok(());
            }
            let run = run_pipeline(&cfg)?;
            print_run_summary(&run);
            if let Some(dir) = golden {
                for out in &run.industries {
                    if let Some(report) = &out.report {
                        let path = dir.join(format!("report_{}.md", out.industry.slug()));
                        emit(Some(&path), Stage::Report, |w| {
                            Ok(w.write_all(report.as_bytes())?)
                        })?;
                    }
                }
            }
            println!("artifacts in {}", cfg.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("error: internal failure (panic)");
            ExitCode::from(3)
        }
    }
}
