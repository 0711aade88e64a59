use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::tree::{check_input, check_tree_params, Criterion, FeaturePick, Grower, TreeNode};
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const DEFAULT_TREES: usize = 200;

/// ⌊√p⌋, at least 1.
pub fn default_features_per_split(p: usize) -> usize {
    ((p as f64).sqrt().floor() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub features_per_split: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Resample rows with replacement per tree; when false every tree sees
    /// the training rows as given.
    pub bootstrap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<TreeNode>,
    pub features_per_split: usize,
    pub n_features: usize,
}

impl RandomForestModel {
    /// Number of trees voting fraud.
    pub fn fraud_votes(&self, x: &[f64]) -> usize {
        self.trees.iter().filter(|t| t.predict(x) >= 0.5).count()
    }

    /// Share of trees voting fraud.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_input(self.n_features, x)?;
        Ok(self.fraud_votes(x) as f64 / self.trees.len() as f64)
    }
}

pub fn fit_random_forest(
    d: &DesignMatrix,
    n_trees: usize,
    k: usize,
    max_depth: usize,
    seed: u64,
) -> Result<RandomForestModel> {
    let params = ForestParams {
        n_trees,
        features_per_split: k,
        max_depth,
        min_leaf: 1,
        bootstrap: true,
    };
    fit_random_forest_with(d, &params, seed)
}

pub fn fit_random_forest_with(
    d: &DesignMatrix,
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForestModel> {
    let p = d.p();
    let k = params.features_per_split;
    if k < 1 || k > p {
        return Err(Error::InvalidParameter(format!(
            "features per split must lie in [1, {p}], got {k}"
        )));
    }
    if params.n_trees < 1 {
        return Err(Error::InvalidParameter(
            "a forest needs at least one tree".into(),
        ));
    }
    check_tree_params(params.min_leaf)?;
    let n = d.n();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(seed, &format!("forest/tree/{b}"));
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let g = Grower {
                x: &d.rows,
                labels: &d.labels,
                weights: None,
                criterion: Criterion::Gini,
                max_depth: params.max_depth,
                min_leaf: params.min_leaf,
                n_features: p,
            };
            g.grow(rows, 0, &mut FeaturePick::Random { k, rng: &mut rng })
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        features_per_split: k,
        n_features: p,
    })
}
