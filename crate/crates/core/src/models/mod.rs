//! The seven classifiers behind one contract: fit on labelled ratio
//! vectors, score in [0, 1], classify fraud at score ≥ 0.5.

pub mod adaboost;
pub mod boosted;
pub mod design;
pub mod forest;
pub mod gaussian;
pub mod logreg;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adaboost::{fit_adaboost, AdaBoostModel, BoostRound};
pub use boosted::{fit_boosted_trees, fit_boosted_trees_with, logistic_loss, BoostedTreesModel};
pub use design::{DesignMatrix, Preprocessor, Standardization};
pub use forest::{
    default_features_per_split, fit_random_forest, fit_random_forest_with, ForestParams,
    RandomForestModel,
};
pub use gaussian::{
    fit_lda, fit_lda_with, fit_qda, fit_qda_with, gaussian_posterior, Covariance,
    GaussianClassParams,
};
pub use logreg::{cross_entropy, cross_entropy_gradient, fit_logreg, LogregParams};
pub use tree::{fit_cart, fit_weighted_cart, gini, DecisionTree, TreeNode};

use crate::error::{Error, Result};
use crate::ratios::{Observation, Ratio};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const THRESHOLD: f64 = 0.5;

/// Logistic function, exact at 0 and overflow-free.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(q: f64) -> f64 {
    (q / (1.0 - q)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LDA")]
    Lda,
    #[serde(rename = "QDA")]
    Qda,
    #[serde(rename = "LR")]
    LogisticRegression,
    #[serde(rename = "AB")]
    AdaBoost,
    #[serde(rename = "DT")]
    DecisionTree,
    #[serde(rename = "BT")]
    BoostedTrees,
    #[serde(rename = "RF")]
    RandomForest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Lda,
        ModelKind::Qda,
        ModelKind::LogisticRegression,
        ModelKind::AdaBoost,
        ModelKind::DecisionTree,
        ModelKind::BoostedTrees,
        ModelKind::RandomForest,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ModelKind::Lda => "LDA",
            ModelKind::Qda => "QDA",
            ModelKind::LogisticRegression => "LR",
            ModelKind::AdaBoost => "AB",
            ModelKind::DecisionTree => "DT",
            ModelKind::BoostedTrees => "BT",
            ModelKind::RandomForest => "RF",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ModelKind::Lda => "Linear discriminant analysis",
            ModelKind::Qda => "Quadratic discriminant analysis",
            ModelKind::LogisticRegression => "Logistic regression",
            ModelKind::AdaBoost => "AdaBoost",
            ModelKind::DecisionTree => "Decision tree (CART)",
            ModelKind::BoostedTrees => "Boosted trees",
            ModelKind::RandomForest => "Random forest",
        }
    }

    /// Whether inputs are standardized before fitting.
    pub fn standardizes(self) -> bool {
        matches!(
            self,
            ModelKind::Lda | ModelKind::Qda | ModelKind::LogisticRegression
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        let t = s.trim().to_ascii_lowercase();
        Ok(match t.as_str() {
            "lda" => ModelKind::Lda,
            "qda" => ModelKind::Qda,
            "lr" | "logreg" | "logistic" => ModelKind::LogisticRegression,
            "ab" | "adaboost" => ModelKind::AdaBoost,
            "dt" | "cart" | "tree" => ModelKind::DecisionTree,
            "bt" | "gbt" | "boosted" => ModelKind::BoostedTrees,
            "rf" | "forest" => ModelKind::RandomForest,
            _ => return Err(Error::InvalidParameter(format!("unknown model '{s}'"))),
        })
    }
}

/// Fitting knobs for every family; each family reads the ones it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Boosting rounds for AdaBoost and boosted trees.
    pub rounds: usize,
    pub shrinkage: f64,
    pub n_trees: usize,
    /// Forest features per split; ⌊√p⌋ when unset.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub ridge_scale: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            learning_rate: 0.1,
            max_iters: 5000,
            tol: 1e-6,
            rounds: adaboost::DEFAULT_ROUNDS,
            shrinkage: boosted::DEFAULT_SHRINKAGE,
            n_trees: forest::DEFAULT_TREES,
            features_per_split: None,
            bootstrap: true,
            max_depth: tree::DEFAULT_MAX_DEPTH,
            min_leaf: tree::DEFAULT_MIN_LEAF,
            ridge_scale: gaussian::DEFAULT_RIDGE_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> ModelSpec {
        ModelSpec {
            kind,
            hyperparameters: Hyperparameters::default(),
        }
    }
}

/// Family-specific fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ModelParams {
    Gaussian(GaussianClassParams),
    Logistic(LogregParams),
    Tree(DecisionTree),
    AdaBoost(AdaBoostModel),
    BoostedTrees(BoostedTreesModel),
    RandomForest(RandomForestModel),
}

/// Anything that maps a model-space feature vector to a fraud score.
pub trait Classifier {
    fn score(&self, x: &[f64]) -> Result<f64>;
}

impl Classifier for GaussianClassParams {
    fn score(&self, x: &[f64]) -> Result<f64> {
        gaussian_posterior(self, x)
    }
}

impl Classifier for LogregParams {
    fn score(&self, x: &[f64]) -> Result<f64> {
        LogregParams::score(self, x)
    }
}

impl Classifier for DecisionTree {
    fn score(&self, x: &[f64]) -> Result<f64> {
        DecisionTree::score(self, x)
    }
}

impl Classifier for AdaBoostModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        AdaBoostModel::score(self, x)
    }
}

impl Classifier for BoostedTreesModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        BoostedTreesModel::score(self, x)
    }
}

impl Classifier for RandomForestModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        RandomForestModel::score(self, x)
    }
}

impl Classifier for ModelParams {
    fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            ModelParams::Gaussian(m) => m.score(x),
            ModelParams::Logistic(m) => Classifier::score(m, x),
            ModelParams::Tree(m) => Classifier::score(m, x),
            ModelParams::AdaBoost(m) => Classifier::score(m, x),
            ModelParams::BoostedTrees(m) => Classifier::score(m, x),
            ModelParams::RandomForest(m) => Classifier::score(m, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: bool,
    pub score: f64,
}

/// Score and label; fraud iff the score is at least 0.5.
pub fn predict_label<C: Classifier + ?Sized>(model: &C, x: &[f64]) -> Result<Prediction> {
    let score = model.score(x)?;
    Ok(Prediction {
        label: score >= THRESHOLD,
        score,
    })
}

/// Fits the requested family on an already prepared design matrix.
pub fn fit_params(spec: &ModelSpec, d: &DesignMatrix, seed: u64) -> Result<ModelParams> {
    let h = &spec.hyperparameters;
    Ok(match spec.kind {
        ModelKind::Lda => ModelParams::Gaussian(fit_lda_with(d, h.ridge_scale)?),
        ModelKind::Qda => ModelParams::Gaussian(fit_qda_with(d, h.ridge_scale)?),
        ModelKind::LogisticRegression => {
            ModelParams::Logistic(fit_logreg(d, h.learning_rate, h.max_iters, h.tol)?)
        }
        ModelKind::DecisionTree => ModelParams::Tree(fit_cart(d, h.max_depth, h.min_leaf)?),
        ModelKind::AdaBoost => ModelParams::AdaBoost(fit_adaboost(d, h.rounds)?),
        ModelKind::BoostedTrees => ModelParams::BoostedTrees(fit_boosted_trees_with(
            d,
            h.rounds,
            h.shrinkage,
            h.max_depth,
            h.min_leaf,
        )?),
        ModelKind::RandomForest => {
            let params = ForestParams {
                n_trees: h.n_trees,
                features_per_split: h
                    .features_per_split
                    .unwrap_or_else(|| default_features_per_split(d.p())),
                max_depth: h.max_depth,
                min_leaf: h.min_leaf,
                bootstrap: h.bootstrap,
            };
            ModelParams::RandomForest(fit_random_forest_with(d, &params, seed)?)
        }
    })
}

/// A fitted model with everything needed to score raw ratio values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub hyperparameters: Hyperparameters,
    pub feature_names: Vec<String>,
    pub preprocessing: Preprocessor,
    pub model: ModelParams,
}

impl FittedModel {
    /// Fits on observations: missing ratios are median-imputed from `train`,
    /// and standardization (for the families that use it) comes from `train`.
    pub fn fit(
        spec: &ModelSpec,
        train: &[&Observation],
        features: &[Ratio],
        seed: u64,
    ) -> Result<FittedModel> {
        if features.is_empty() {
            return Err(Error::InsufficientData("no features selected".into()));
        }
        let preprocessing = Preprocessor::fit(train, features, spec.kind.standardizes());
        let d = preprocessing.design(train)?;
        let model = fit_params(spec, &d, seed)?;
        Ok(FittedModel {
            format_version: MODEL_FORMAT_VERSION,
            kind: spec.kind,
            hyperparameters: spec.hyperparameters.clone(),
            feature_names: d.feature_names,
            preprocessing,
            model,
        })
    }

    pub fn score_observation(&self, o: &Observation) -> f64 {
        self.model
            .score(&self.preprocessing.transform(o))
            .expect("preprocessed rows match the model's width")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<FittedModel> {
        let m: FittedModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        Ok(m)
    }
}

/// Raw ratio values in, preprocessing applied, then the model's score.
impl Classifier for FittedModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        self.model.score(&self.preprocessing.apply(x)?)
    }
}
