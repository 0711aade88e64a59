//! Configuration and the end-to-end run: ingest → ratios → matching and
//! folds → selection → cross-validation → rules → report, per industry.
//!
//! Every random stream is derived from the master seed with
//! [`derive_seed`](crate::seed::derive_seed):
//!
//! | stage | stream label |
//! |---|---|
//! | matching | `match` (then `match/<industry>/<year>` per stratum) |
//! | folds | `folds/<industry>` |
//! | cross-validation | `cv/<industry>` (then `cv/<model>/fold/<f>`) |
//! | final tree | `rules/<industry>` |

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{
    parse_statements_in, write_rejections, Industry, RawStatement, Rejection, StudyWindow,
};
use crate::metrics::{
    cross_validate, cross_validate_in_folds, render_table, CvOptions, EvaluationReport,
};
use crate::models::{FittedModel, Hyperparameters, ModelKind, ModelParams, ModelSpec, THRESHOLD};
use crate::ratios::{observations_from_statements, write_observations, Observation, Ratio};
use crate::rules::{
    extract_rules, render_report, RedFlagRule, DEFAULT_MIN_FRAUD_FRACTION, DEFAULT_MIN_SUPPORT,
};
use crate::sampling::{match_dataset, stratified_folds, write_folds_csv, FoldAssignment};
use crate::seed::derive_seed;
use crate::stats::{
    correlation_matrix, published_preset, select_features, write_correlation_csv,
    CorrelationMatrix, FeatureSelection, SelectionParams,
};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Mann-Whitney filter plus Kendall redundancy pruning on the sample.
    #[default]
    Computed,
    /// The published per-industry subsets.
    #[serde(rename = "table7_preset")]
    PublishedPreset,
}

/// Every knob of a run. Missing keys in a config file take these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Statement CSV files, concatenated in order.
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub alpha: f64,
    pub tau_cap: f64,
    pub selection: SelectionMode,
    /// Re-run feature selection inside every training fold.
    pub selection_in_folds: bool,
    pub cv_k: usize,
    pub models: Vec<ModelKind>,
    pub threshold: f64,
    /// AUC from 0/1 predictions rather than scores.
    pub hard_auc: bool,
    /// Keep fraud cases without a same-stratum control in the modelling set.
    pub keep_unmatched: bool,
    pub window: StudyWindow,
    pub min_fraud_fraction: f64,
    pub min_support: usize,
    /// Industries to analyse; empty means every industry present.
    pub industries: Vec<Industry>,
    pub hyperparameters: Hyperparameters,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inputs: Vec::new(),
            output_dir: PathBuf::from("out"),
            seed: 42,
            alpha: 0.05,
            tau_cap: 0.65,
            selection: SelectionMode::Computed,
            selection_in_folds: false,
            cv_k: 10,
            models: ModelKind::ALL.to_vec(),
            threshold: THRESHOLD,
            hard_auc: false,
            keep_unmatched: false,
            window: StudyWindow::default(),
            min_fraud_fraction: DEFAULT_MIN_FRAUD_FRACTION,
            min_support: DEFAULT_MIN_SUPPORT,
            industries: Vec::new(),
            hyperparameters: Hyperparameters::default(),
        }
    }
}

/// The fields that change results; paths are excluded.
#[derive(Serialize)]
struct SemanticConfig<'a> {
    seed: u64,
    alpha: f64,
    tau_cap: f64,
    selection: SelectionMode,
    selection_in_folds: bool,
    cv_k: usize,
    models: &'a [ModelKind],
    threshold: f64,
    hard_auc: bool,
    keep_unmatched: bool,
    window: StudyWindow,
    min_fraud_fraction: f64,
    min_support: usize,
    industries: &'a [Industry],
    hyperparameters: &'a Hyperparameters,
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        PipelineConfig::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.tau_cap > 0.0 && self.tau_cap <= 1.0) {
            return bad(format!("tau_cap must lie in (0, 1], got {}", self.tau_cap));
        }
        if self.cv_k < 2 {
            return bad(format!("cv_k must be at least 2, got {}", self.cv_k));
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            ));
        }
        if !(0.0..=1.0).contains(&self.min_fraud_fraction) {
            return bad(format!(
                "min_fraud_fraction must lie in [0, 1], got {}",
                self.min_fraud_fraction
            ));
        }
        if self.window.first_year > self.window.last_year {
            return bad("study window is empty".into());
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of the result-affecting fields.
    pub fn config_hash(&self) -> String {
        let semantic = SemanticConfig {
            seed: self.seed,
            alpha: self.alpha,
            tau_cap: self.tau_cap,
            selection: self.selection,
            selection_in_folds: self.selection_in_folds,
            cv_k: self.cv_k,
            models: &self.models,
            threshold: self.threshold,
            hard_auc: self.hard_auc,
            keep_unmatched: self.keep_unmatched,
            window: self.window,
            min_fraud_fraction: self.min_fraud_fraction,
            min_support: self.min_support,
            industries: &self.industries,
            hyperparameters: &self.hyperparameters,
        };
        sha256_hex(
            serde_json::to_string(&semantic)
                .expect("config serializes")
                .as_bytes(),
        )
    }

    pub fn selection_params(&self) -> SelectionParams {
        SelectionParams {
            alpha: self.alpha,
            tau_cap: self.tau_cap,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pipeline stage names used to tag errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    Ratios,
    Sample,
    Select,
    Train,
    Rules,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Ratios => "ratios",
            Stage::Sample => "sample",
            Stage::Select => "select",
            Stage::Train => "train",
            Stage::Rules => "rules",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An error with the stage it arose in.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub trait StageContext<T> {
    fn stage(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFailure {
    pub model: ModelKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum IndustryStatus {
    Completed,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingSummary {
    pub pairs: usize,
    pub unmatched: Vec<String>,
    pub kept_unmatched: bool,
    pub seed: u64,
}

/// Everything computed for one industry.
#[derive(Debug, Clone, PartialEq)]
pub struct IndustryOutcome {
    pub industry: Industry,
    pub status: IndustryStatus,
    pub matching: Option<MatchingSummary>,
    /// The modelling sample, in the order `folds` refers to.
    pub sample: Vec<Observation>,
    pub folds: Option<FoldAssignment>,
    pub correlation: Option<CorrelationMatrix>,
    pub selection: Option<FeatureSelection>,
    pub evaluations: Vec<EvaluationReport>,
    pub failures: Vec<ModelFailure>,
    pub tree: Option<FittedModel>,
    pub rules: Vec<RedFlagRule>,
    pub report: Option<String>,
}

impl IndustryOutcome {
    fn skipped(industry: Industry, reason: String) -> IndustryOutcome {
        IndustryOutcome {
            industry,
            status: IndustryStatus::Skipped(reason),
            matching: None,
            sample: Vec::new(),
            folds: None,
            correlation: None,
            selection: None,
            evaluations: Vec::new(),
            failures: Vec::new(),
            tree: None,
            rules: Vec::new(),
            report: None,
        }
    }

    pub fn evaluation(&self, model: ModelKind) -> Option<&EvaluationReport> {
        self.evaluations.iter().find(|e| e.model == model)
    }
}

/// Industries to analyse, in canonical order.
fn industries_for(cfg: &PipelineConfig, obs: &[Observation]) -> Vec<Industry> {
    let present: BTreeSet<Industry> = obs.iter().map(|o| o.industry).collect();
    Industry::ALL
        .into_iter()
        .filter(|i| {
            if cfg.industries.is_empty() {
                present.contains(i)
            } else {
                cfg.industries.contains(i)
            }
        })
        .collect()
}

/// Runs matching, selection, cross-validation and rule extraction for every
/// industry. Pure apart from parallelism; no files are touched.
pub fn analyze(
    cfg: &PipelineConfig,
    obs: &[Observation],
) -> std::result::Result<Vec<IndustryOutcome>, PipelineError> {
    cfg.validate().stage(Stage::Config)?;
    industries_for(cfg, obs)
        .into_iter()
        .map(|industry| {
            let members: Vec<Observation> = obs
                .iter()
                .filter(|o| o.industry == industry)
                .cloned()
                .collect();
            analyze_industry(cfg, industry, &members)
        })
        .collect()
}

/// Matched modelling sample for one industry's observations.
pub fn matched_sample(
    cfg: &PipelineConfig,
    obs: &[Observation],
) -> Result<(Vec<Observation>, MatchingSummary)> {
    let matched = match_dataset(obs, derive_seed(cfg.seed, "match"))?;
    let sample = matched.observations(cfg.keep_unmatched);
    let matching = MatchingSummary {
        pairs: matched.pairs.len(),
        unmatched: matched
            .unmatched
            .iter()
            .map(|o| format!("{} {}", o.company_id, o.fiscal_year))
            .collect(),
        kept_unmatched: cfg.keep_unmatched,
        seed: matched.rng_seed,
    };
    Ok((sample, matching))
}

/// Why an industry's sample is too small for `cfg.cv_k` folds, if it is.
pub fn too_small_for_folds(cfg: &PipelineConfig, sample: &[Observation]) -> Option<String> {
    let n_fraud = sample.iter().filter(|o| o.fraud).count();
    let n_other = sample.len() - n_fraud;
    (n_fraud < cfg.cv_k || n_other < cfg.cv_k).then(|| {
        format!(
            "{n_fraud} fraud and {n_other} non-fraud cases after matching; {}-fold cross-validation needs {} of each",
            cfg.cv_k, cfg.cv_k
        )
    })
}

pub fn industry_folds(
    cfg: &PipelineConfig,
    industry: Industry,
    sample: &[Observation],
) -> Result<FoldAssignment> {
    stratified_folds(
        sample,
        cfg.cv_k,
        derive_seed(cfg.seed, &format!("folds/{}", industry.slug())),
    )
}

pub fn cv_options(cfg: &PipelineConfig, industry: Industry) -> CvOptions {
    CvOptions {
        hard_auc: cfg.hard_auc,
        seed: derive_seed(cfg.seed, &format!("cv/{}", industry.slug())),
        threshold: cfg.threshold,
    }
}

pub fn analyze_industry(
    cfg: &PipelineConfig,
    industry: Industry,
    obs: &[Observation],
) -> std::result::Result<IndustryOutcome, PipelineError> {
    let slug = industry.slug();
    let (sample, matching) = matched_sample(cfg, obs).stage(Stage::Sample)?;
    if let Some(reason) = too_small_for_folds(cfg, &sample) {
        let mut out = IndustryOutcome::skipped(industry, reason);
        out.matching = Some(matching);
        return Ok(out);
    }
    let folds = industry_folds(cfg, industry, &sample).stage(Stage::Sample)?;
    let correlation = correlation_matrix(&sample);

    let params = cfg.selection_params();
    let selection = match cfg.selection {
        SelectionMode::Computed => match select_features(&sample, industry, params) {
            Ok(s) => s,
            Err(e @ Error::CannotTestSeparation(_)) => {
                let mut out = IndustryOutcome::skipped(industry, e.to_string());
                out.matching = Some(matching);
                return Ok(out);
            }
            Err(e) => return Err(e).stage(Stage::Select),
        },
        SelectionMode::PublishedPreset => published_preset(industry),
    };

    let opts = cv_options(cfg, industry);
    let mut evaluations = Vec::new();
    let mut failures = Vec::new();
    for &kind in &cfg.models {
        let spec = ModelSpec {
            kind,
            hyperparameters: cfg.hyperparameters.clone(),
        };
        let outcome = if cfg.selection_in_folds && cfg.selection == SelectionMode::Computed {
            let select = |train: &[Observation]| -> Result<Vec<Ratio>> {
                Ok(select_features(train, industry, params)?.selected)
            };
            cross_validate_in_folds(&sample, &folds, &spec, select, opts)
        } else {
            cross_validate(&sample, &folds, &spec, &selection.selected, opts)
        };
        match outcome {
            Ok(r) => evaluations.push(r),
            Err(e) => failures.push(ModelFailure {
                model: kind,
                message: e.to_string(),
            }),
        }
    }

    let tree_spec = ModelSpec {
        kind: ModelKind::DecisionTree,
        hyperparameters: cfg.hyperparameters.clone(),
    };
    let refs: Vec<&Observation> = sample.iter().collect();
    let tree = FittedModel::fit(
        &tree_spec,
        &refs,
        &selection.selected,
        derive_seed(cfg.seed, &format!("rules/{slug}")),
    )
    .stage(Stage::Rules)?;
    let ModelParams::Tree(t) = &tree.model else {
        unreachable!("a decision tree spec fits a tree")
    };
    let rules = extract_rules(
        &t.root,
        &selection.selected,
        industry,
        cfg.min_fraud_fraction,
        cfg.min_support,
    )
    .stage(Stage::Rules)?;
    let report = render_report(&rules, &selection, &evaluations).stage(Stage::Report)?;

    Ok(IndustryOutcome {
        industry,
        status: IndustryStatus::Completed,
        matching: Some(matching),
        sample,
        folds: Some(folds),
        correlation: Some(correlation),
        selection: Some(selection),
        evaluations,
        failures,
        tree: Some(tree),
        rules,
        report: Some(report),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub rows_accepted: usize,
    pub rows_rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndustryRecord {
    pub industry: Industry,
    #[serde(flatten)]
    pub status: IndustryStatus,
    pub model_failures: Vec<ModelFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: Vec<InputDigest>,
    pub stages: Vec<StageRecord>,
    pub industries: Vec<IndustryRecord>,
    pub artifacts: Vec<Artifact>,
    /// Set when a stage failed and the artifacts are incomplete.
    pub partial: bool,
}

impl Manifest {
    fn new(cfg: &PipelineConfig) -> Manifest {
        Manifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config_hash: cfg.config_hash(),
            inputs: Vec::new(),
            stages: Vec::new(),
            industries: Vec::new(),
            artifacts: Vec::new(),
            partial: false,
        }
    }

    fn record(&mut self, stage: Stage, status: &str, detail: Option<String>) {
        self.stages.push(StageRecord {
            stage,
            status: status.into(),
            detail,
        });
    }
}

/// Writes files under an output directory and remembers their digests.
pub struct ArtifactWriter {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl ArtifactWriter {
    pub fn new(root: &Path) -> Result<ArtifactWriter> {
        fs::create_dir_all(root)?;
        Ok(ArtifactWriter {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.artifacts.retain(|a| a.path != rel);
        self.artifacts.push(Artifact {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn write_with<F: FnOnce(&mut Vec<u8>) -> Result<()>>(
        &mut self,
        rel: &str,
        f: F,
    ) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    pub fn artifacts(&self) -> Vec<Artifact> {
        let mut a = self.artifacts.clone();
        a.sort_by(|x, y| x.path.cmp(&y.path));
        a
    }
}

#[derive(Serialize)]
struct EvaluationFile<'a> {
    industry: Industry,
    evaluations: &'a [EvaluationReport],
    failures: &'a [ModelFailure],
}

/// Writes one industry's artifacts under `<slug>/`.
pub fn write_industry(w: &mut ArtifactWriter, out: &IndustryOutcome) -> Result<()> {
    let dir = out.industry.slug();
    if let Some(m) = &out.matching {
        w.write_json(&format!("{dir}/matching.json"), m)?;
    }
    if let Some(folds) = &out.folds {
        w.write_with(&format!("{dir}/folds.csv"), |buf| {
            write_folds_csv(&out.sample, folds, buf)
        })?;
    }
    if let Some(c) = &out.correlation {
        w.write_with(&format!("{dir}/correlation.csv"), |buf| {
            write_correlation_csv(c, buf)
        })?;
    }
    if let Some(s) = &out.selection {
        w.write_json(&format!("{dir}/selection.json"), s)?;
    }
    if out.status == IndustryStatus::Completed {
        let file = EvaluationFile {
            industry: out.industry,
            evaluations: &out.evaluations,
            failures: &out.failures,
        };
        w.write_json(&format!("{dir}/evaluation.json"), &file)?;
        w.write(
            &format!("{dir}/leaderboard.txt"),
            render_table(&out.evaluations).as_bytes(),
        )?;
        w.write_json(&format!("{dir}/rules.json"), &out.rules)?;
    }
    if let Some(t) = &out.tree {
        w.write_json(&format!("{dir}/tree.json"), t)?;
    }
    if let Some(r) = &out.report {
        w.write(&format!("{dir}/report.md"), r.as_bytes())?;
    }
    Ok(())
}

/// Result of a complete run.
#[derive(Debug)]
pub struct PipelineRun {
    pub manifest: Manifest,
    pub industries: Vec<IndustryOutcome>,
    pub observations: Vec<Observation>,
}

/// Accepted statements, rejected rows with their source file, and input digests.
pub type Ingested = (Vec<RawStatement>, Vec<(PathBuf, Rejection)>, Vec<InputDigest>);

/// Reads and validates every input file.
pub fn ingest_inputs(cfg: &PipelineConfig) -> std::result::Result<Ingested, PipelineError> {
    if cfg.inputs.is_empty() {
        return Err(Error::Config("no input files given".into())).stage(Stage::Ingest);
    }
    let mut statements = Vec::new();
    let mut rejected = Vec::new();
    let mut digests = Vec::new();
    for path in &cfg.inputs {
        let bytes = fs::read(path)
            .map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", path.display()),
                ))
            })
            .stage(Stage::Ingest)?;
        let parsed = parse_statements_in(bytes.as_slice(), cfg.window).stage(Stage::Ingest)?;
        digests.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
            rows_accepted: parsed.statements.len(),
            rows_rejected: parsed.rejected.len(),
        });
        statements.extend(parsed.statements);
        rejected.extend(parsed.rejected.into_iter().map(|r| (path.clone(), r)));
    }
    Ok((statements, rejected, digests))
}

/// The full pipeline, writing artifacts and `manifest.json` to
/// `cfg.output_dir`. On failure the manifest is still written, flagged
/// partial, when the output directory is usable.
pub fn run_pipeline(cfg: &PipelineConfig) -> std::result::Result<PipelineRun, PipelineError> {
    cfg.validate().stage(Stage::Config)?;
    let mut manifest = Manifest::new(cfg);
    let mut writer = ArtifactWriter::new(&cfg.output_dir).stage(Stage::Report)?;
    match run_stages(cfg, &mut manifest, &mut writer) {
        Ok((industries, observations)) => {
            manifest.artifacts = writer.artifacts();
            writer
                .write_json("manifest.json", &manifest)
                .stage(Stage::Report)?;
            Ok(PipelineRun {
                manifest,
                industries,
                observations,
            })
        }
        Err(e) => {
            manifest.record(e.stage, "failed", Some(e.source.to_string()));
            manifest.partial = true;
            manifest.artifacts = writer.artifacts();
            let _ = writer.write_json("manifest.json", &manifest);
            Err(e)
        }
    }
}

fn run_stages(
    cfg: &PipelineConfig,
    manifest: &mut Manifest,
    w: &mut ArtifactWriter,
) -> std::result::Result<(Vec<IndustryOutcome>, Vec<Observation>), PipelineError> {
    let (statements, rejected, digests) = ingest_inputs(cfg)?;
    manifest.inputs = digests;
    let rows: Vec<Rejection> = rejected.into_iter().map(|(_, r)| r).collect();
    w.write_with("rejections.csv", |buf| write_rejections(&rows, buf))
        .stage(Stage::Ingest)?;
    manifest.record(
        Stage::Ingest,
        "ok",
        Some(format!(
            "{} accepted, {} rejected",
            statements.len(),
            rows.len()
        )),
    );

    let observations = observations_from_statements(&statements);
    w.write_with("observations.csv", |buf| {
        write_observations(&observations, buf)
    })
    .stage(Stage::Ratios)?;
    manifest.record(
        Stage::Ratios,
        "ok",
        Some(format!("{} observations", observations.len())),
    );

    let industries = analyze(cfg, &observations)?;
    write_outcomes(manifest, w, &industries)?;
    Ok((industries, observations))
}

/// Writes per-industry artifacts and their manifest entries.
pub fn write_outcomes(
    manifest: &mut Manifest,
    w: &mut ArtifactWriter,
    industries: &[IndustryOutcome],
) -> std::result::Result<(), PipelineError> {
    for out in industries {
        write_industry(w, out).stage(Stage::Report)?;
        manifest.industries.push(IndustryRecord {
            industry: out.industry,
            status: out.status.clone(),
            model_failures: out.failures.clone(),
        });
        if !out.failures.is_empty() {
            manifest.partial = true;
        }
    }
    let completed = industries
        .iter()
        .filter(|o| o.status == IndustryStatus::Completed)
        .count();
    manifest.record(
        Stage::Train,
        "ok",
        Some(format!(
            "{completed} of {} industries analysed",
            industries.len()
        )),
    );
    Ok(())
}

/// Runs the analysis on an existing observations table (the `train`
/// subcommand), writing the same per-industry artifacts as a full run.
pub fn run_from_observations(
    cfg: &PipelineConfig,
    observations: &[Observation],
) -> std::result::Result<PipelineRun, PipelineError> {
    cfg.validate().stage(Stage::Config)?;
    let mut manifest = Manifest::new(cfg);
    let mut writer = ArtifactWriter::new(&cfg.output_dir).stage(Stage::Report)?;
    let industries = analyze(cfg, observations)?;
    write_outcomes(&mut manifest, &mut writer, &industries)?;
    manifest.artifacts = writer.artifacts();
    writer
        .write_json("manifest.json", &manifest)
        .stage(Stage::Report)?;
    Ok(PipelineRun {
        manifest,
        industries,
        observations: observations.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = PipelineConfig::default();
        cfg.inputs = vec![PathBuf::from("data/a.csv")];
        cfg.industries = vec![Industry::Trade];
        cfg.hyperparameters.features_per_split = Some(2);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn empty_file_means_defaults() {
        assert_eq!(
            PipelineConfig::from_toml_str("").unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml_str("sed = 3").is_err());
        assert!(PipelineConfig::from_toml_str("cv_k = 1").is_err());
    }

    #[test]
    fn hash_ignores_paths_but_not_semantics() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        b.inputs = vec![PathBuf::from("x.csv")];
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = a.clone();
        c.alpha = 0.01;
        assert_ne!(a.config_hash(), c.config_hash());
        let mut d = a.clone();
        d.hyperparameters.n_trees = 10;
        assert_ne!(a.config_hash(), d.config_hash());
    }

    #[test]
    fn stage_tagged_message() {
        let e = PipelineError {
            stage: Stage::Ingest,
            source: Error::Config("x".into()),
        };
        assert!(e.to_string().starts_with("ingest stage failed"));
    }
}
