//! Confusion-matrix measures, trapezoidal ROC AUC and k-fold evaluation.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Industry;
use crate::models::{FittedModel, ModelKind, ModelSpec, THRESHOLD};
use crate::ratios::{Observation, Ratio};
use crate::sampling::FoldAssignment;
use crate::seed::derive_seed;

/// Counts with fraud as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(labels: &[bool], predictions: &[bool]) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData(
            "confusion matrix of zero cases".into(),
        ));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in labels.iter().zip(predictions) {
        match (t, p) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Specificity,
    Sensitivity,
    Precision,
    GMean,
    FMeasure,
    Auc,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Accuracy,
        Metric::Specificity,
        Metric::Sensitivity,
        Metric::Precision,
        Metric::GMean,
        Metric::FMeasure,
        Metric::Auc,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Metric::Accuracy => "Accuracy",
            Metric::Specificity => "Specificity",
            Metric::Sensitivity => "Sensitivity",
            Metric::Precision => "Precision",
            Metric::GMean => "G-Mean",
            Metric::FMeasure => "F-Measure",
            Metric::Auc => "AUC",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

/// The seven measures; `None` marks an undefined value (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricValues {
    pub accuracy: Option<f64>,
    pub specificity: Option<f64>,
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub g_mean: Option<f64>,
    pub f_measure: Option<f64>,
    pub auc: Option<f64>,
}

impl MetricValues {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Specificity => self.specificity,
            Metric::Sensitivity => self.sensitivity,
            Metric::Precision => self.precision,
            Metric::GMean => self.g_mean,
            Metric::FMeasure => self.f_measure,
            Metric::Auc => self.auc,
        }
    }

    fn set(&mut self, m: Metric, v: Option<f64>) {
        let slot = match m {
            Metric::Accuracy => &mut self.accuracy,
            Metric::Specificity => &mut self.specificity,
            Metric::Sensitivity => &mut self.sensitivity,
            Metric::Precision => &mut self.precision,
            Metric::GMean => &mut self.g_mean,
            Metric::FMeasure => &mut self.f_measure,
            Metric::Auc => &mut self.auc,
        };
        *slot = v;
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// G-Mean √(sensitivity · specificity).
pub fn g_mean(sensitivity: f64, specificity: f64) -> f64 {
    (sensitivity * specificity).sqrt()
}

/// F-Measure 2·P·S / (P + S); undefined when P + S = 0.
pub fn f_measure(precision: f64, sensitivity: f64) -> Option<f64> {
    let den = precision + sensitivity;
    (den > 0.0).then(|| 2.0 * precision * sensitivity / den)
}

/// Accuracy through F-Measure from a confusion matrix; AUC is left unset.
pub fn classification_metrics(cm: &ConfusionMatrix) -> MetricValues {
    let specificity = ratio(cm.tn, cm.tn + cm.fp);
    let sensitivity = ratio(cm.tp, cm.tp + cm.fn_);
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    MetricValues {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        specificity,
        sensitivity,
        precision,
        g_mean: sensitivity.zip(specificity).map(|(s, p)| g_mean(s, p)),
        f_measure: precision
            .zip(sensitivity)
            .and_then(|(p, s)| f_measure(p, s)),
        auc: None,
    }
}

/// Area under the ROC curve by the trapezoidal rule, sweeping the threshold
/// through the distinct scores (tied scores move together).
///
/// The sum is accumulated in integers, so the result equals the pairwise
/// probability P(pos > neg) + ½ P(tie) up to one final division.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite);
    }
    let pos = labels.iter().filter(|&&l| l).count() as u128;
    let neg = labels.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut fp) = (0u128, 0u128);
    let mut twice_area = 0u128;
    let mut i = 0;
    while i < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1
            } else {
                fp += 1
            }
            i += 1;
        }
        twice_area += (fp - fp0) * (tp + tp0);
    }
    Ok(twice_area as f64 / (2 * pos * neg) as f64)
}

/// Outcome on one held-out fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_test: usize,
    pub features: Vec<Ratio>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricValues,
}

/// Cross-validated performance of one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub industry: Option<Industry>,
    pub model: ModelKind,
    pub features: Vec<Ratio>,
    pub hard_auc: bool,
    pub folds: Vec<FoldResult>,
    /// Unweighted mean over the folds where each metric is defined.
    pub mean: MetricValues,
    /// Number of folds contributing to each mean.
    pub defined_folds: BTreeMap<Metric, usize>,
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn mean_of(&self, m: Metric) -> Option<f64> {
        self.mean.get(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    /// Compute AUC from 0/1 predictions instead of scores.
    pub hard_auc: bool,
    pub seed: u64,
    /// Scores at or above this are classified as fraud.
    pub threshold: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            hard_auc: false,
            seed: 0,
            threshold: THRESHOLD,
        }
    }
}

/// k-fold evaluation with a fixed feature set.
pub fn cross_validate(
    obs: &[Observation],
    folds: &FoldAssignment,
    spec: &ModelSpec,
    features: &[Ratio],
    opts: CvOptions,
) -> Result<EvaluationReport> {
    let mut report = cross_validate_in_folds(obs, folds, spec, |_| Ok(features.to_vec()), opts)?;
    report.features = features.to_vec();
    Ok(report)
}

/// k-fold evaluation where `select` picks the features from each training
/// fold.
pub fn cross_validate_in_folds<S>(
    obs: &[Observation],
    folds: &FoldAssignment,
    spec: &ModelSpec,
    select: S,
    opts: CvOptions,
) -> Result<EvaluationReport>
where
    S: Fn(&[Observation]) -> Result<Vec<Ratio>> + Sync,
{
    if obs.len() != folds.fold_of.len() {
        return Err(Error::LengthMismatch {
            left: obs.len(),
            right: folds.fold_of.len(),
        });
    }
    let outcomes: Vec<Result<(FoldResult, Vec<String>)>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<Observation> = folds
                .train_indices(f)
                .into_iter()
                .map(|i| obs[i].clone())
                .collect();
            let test: Vec<&Observation> =
                folds.test_indices(f).into_iter().map(|i| &obs[i]).collect();
            let features = select(&train)?;
            let train_refs: Vec<&Observation> = train.iter().collect();
            let seed = derive_seed(opts.seed, &format!("cv/{}/fold/{f}", spec.kind));
            let model = FittedModel::fit(spec, &train_refs, &features, seed)?;
            evaluate_fold(f, &model, &test, features, &opts)
        })
        .collect();

    let mut fold_results = Vec::with_capacity(folds.k);
    let mut warnings = Vec::new();
    for o in outcomes {
        let (r, w) = o?;
        fold_results.push(r);
        warnings.extend(w);
    }

    let mut mean = MetricValues::default();
    let mut defined_folds = BTreeMap::new();
    for m in Metric::ALL {
        let vals: Vec<f64> = fold_results
            .iter()
            .filter_map(|r| r.metrics.get(m))
            .collect();
        defined_folds.insert(m, vals.len());
        if vals.len() < fold_results.len() {
            warnings.push(format!(
                "{m} undefined in {} of {} folds; mean taken over the rest",
                fold_results.len() - vals.len(),
                fold_results.len()
            ));
        }
        mean.set(
            m,
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64),
        );
    }

    let industry = obs
        .first()
        .map(|o| o.industry)
        .filter(|&i| obs.iter().all(|o| o.industry == i));
    let features = fold_results
        .first()
        .map(|r| r.features.clone())
        .unwrap_or_default();
    Ok(EvaluationReport {
        industry,
        model: spec.kind,
        features,
        hard_auc: opts.hard_auc,
        folds: fold_results,
        mean,
        defined_folds,
        warnings,
    })
}

fn evaluate_fold(
    fold: usize,
    model: &FittedModel,
    test: &[&Observation],
    features: Vec<Ratio>,
    opts: &CvOptions,
) -> Result<(FoldResult, Vec<String>)> {
    let labels: Vec<bool> = test.iter().map(|o| o.fraud).collect();
    let scores: Vec<f64> = test.iter().map(|o| model.score_observation(o)).collect();
    let preds: Vec<bool> = scores.iter().map(|&s| s >= opts.threshold).collect();
    let cm = confusion(&labels, &preds)?;
    let mut metrics = classification_metrics(&cm);
    let mut warnings = Vec::new();
    let auc_input: Vec<f64> = if opts.hard_auc {
        preds.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect()
    } else {
        scores
    };
    metrics.auc = match roc_auc(&labels, &auc_input) {
        Ok(a) => Some(a),
        Err(Error::AucUndefined) => {
            warnings.push(format!("fold {fold}: test fold holds a single class"));
            None
        }
        Err(e) => return Err(e),
    };
    Ok((
        FoldResult {
            fold,
            n_test: test.len(),
            features,
            confusion: cm,
            metrics,
        },
        warnings,
    ))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

/// Aligned plain-text table of mean metrics, one row per model.
pub fn render_table(reports: &[EvaluationReport]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<6}", "Model");
    for m in Metric::ALL {
        let _ = write!(out, " {:>11}", m.title());
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<6}", r.model.code());
        for m in Metric::ALL {
            let _ = write!(out, " {:>11}", cell(r.mean.get(m)));
        }
        out.push('\n');
    }
    out
}
