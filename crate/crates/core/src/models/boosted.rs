use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::tree::{check_input, check_tree_params, Criterion, FeaturePick, Grower, TreeNode};
use super::{logit, sigmoid};
use crate::error::{Error, Result};

pub const DEFAULT_SHRINKAGE: f64 = 0.1;
/// Probabilities are kept within [ε, 1 − ε] when converted to log-odds.
const PROB_CLAMP: f64 = 1e-6;
const BISECTION_STEPS: usize = 200;

/// Gradient boosting with logistic loss over regression trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTreesModel {
    pub initial_score: f64,
    pub shrinkage: f64,
    /// Each leaf's value is that leaf's fitted step γ (before shrinkage).
    pub trees: Vec<TreeNode>,
    /// Training log-loss (mean) after F₀ and after each round.
    pub loss_trace: Vec<f64>,
    pub n_features: usize,
}

impl BoostedTreesModel {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(self.initial_score, |f, t| f + self.shrinkage * t.predict(x))
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_input(self.n_features, x)?;
        Ok(sigmoid(self.raw_score(x)))
    }
}

fn clamp_prob(q: f64) -> f64 {
    q.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean logistic loss of raw scores `f` against labels.
pub fn logistic_loss(f: &[f64], labels: &[bool]) -> f64 {
    let total: f64 = f
        .iter()
        .zip(labels)
        .map(|(&z, &t)| {
            let m = if t { -z } else { z };
            if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            }
        })
        .sum();
    total / f.len() as f64
}

/// The step γ minimizing Σ loss(t_i, F_i + γ) over one leaf, with the
/// leaf's fraud share clamped away from 0 and 1 so γ stays finite.
fn leaf_step(f: &[f64], labels: &[bool]) -> f64 {
    let n = f.len() as f64;
    let q = clamp_prob(labels.iter().filter(|&&t| t).count() as f64 / n);
    if f.iter().all(|&v| v == f[0]) {
        return logit(q) - f[0];
    }
    // Σ σ(F_i + γ) = q·n is increasing in γ; bracket and bisect.
    let target = q * n;
    let fmax = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fmin = f.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (logit(PROB_CLAMP) - fmax, logit(1.0 - PROB_CLAMP) - fmin);
    for _ in 0..BISECTION_STEPS {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        let s: f64 = f.iter().map(|&v| sigmoid(v + mid)).sum();
        if s < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + (hi - lo) / 2.0
}

pub fn fit_boosted_trees(
    d: &DesignMatrix,
    rounds: usize,
    shrinkage: f64,
    max_depth: usize,
) -> Result<BoostedTreesModel> {
    fit_boosted_trees_with(d, rounds, shrinkage, max_depth, 1)
}

pub fn fit_boosted_trees_with(
    d: &DesignMatrix,
    rounds: usize,
    shrinkage: f64,
    max_depth: usize,
    min_leaf: usize,
) -> Result<BoostedTreesModel> {
    if rounds < 1 {
        return Err(Error::InvalidParameter(
            "boosting needs at least one round".into(),
        ));
    }
    if !(shrinkage > 0.0 && shrinkage <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "shrinkage must lie in (0, 1], got {shrinkage}"
        )));
    }
    check_tree_params(min_leaf)?;
    let n = d.n();
    let base = d.labels.iter().filter(|&&t| t).count() as f64 / n as f64;
    let initial_score = logit(clamp_prob(base));
    let mut f = vec![initial_score; n];
    let mut model = BoostedTreesModel {
        initial_score,
        shrinkage,
        trees: Vec::with_capacity(rounds),
        loss_trace: vec![logistic_loss(&f, &d.labels)],
        n_features: d.p(),
    };

    for _ in 0..rounds {
        let residuals: Vec<f64> = f
            .iter()
            .zip(&d.labels)
            .map(|(&z, &t)| if t { 1.0 } else { 0.0 } - sigmoid(z))
            .collect();
        let g = Grower {
            x: &d.rows,
            labels: &d.labels,
            weights: None,
            criterion: Criterion::Variance(&residuals),
            max_depth,
            min_leaf,
            n_features: d.p(),
        };
        let mut tree =
            g.grow::<rand_chacha::ChaCha8Rng>((0..n).collect(), 0, &mut FeaturePick::All);

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.n_leaves()];
        for (i, x) in d.rows.iter().enumerate() {
            members[tree.leaf_index(x)].push(i);
        }
        for (leaf, idx) in tree.leaves_mut().into_iter().zip(&members) {
            if let TreeNode::Leaf { value, .. } = leaf {
                let fs: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
                let ts: Vec<bool> = idx.iter().map(|&i| d.labels[i]).collect();
                *value = if idx.is_empty() {
                    0.0
                } else {
                    leaf_step(&fs, &ts)
                };
            }
        }
        for (fi, x) in f.iter_mut().zip(&d.rows) {
            *fi += shrinkage * tree.predict(x);
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence);
        }
        model.loss_trace.push(logistic_loss(&f, &d.labels));
        model.trees.push(tree);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> DesignMatrix {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![6.0], vec![7.0]];
        DesignMatrix::unnamed(rows, vec![false, false, false, true, true]).unwrap()
    }

    #[test]
    fn constant_negative_labels_score_low() {
        let d = DesignMatrix::unnamed(vec![vec![1.0], vec![2.0]], vec![false, false]).unwrap();
        let m = fit_boosted_trees(&d, 3, 0.1, 5).unwrap();
        assert!(m.initial_score.is_finite());
        assert!(m.score(&[1.5]).unwrap() < 0.5);
    }

    #[test]
    fn one_full_round_fits_separable_data() {
        let d = separable();
        let m = fit_boosted_trees(&d, 1, 1.0, 5).unwrap();
        for (x, &t) in d.rows.iter().zip(&d.labels) {
            assert_eq!(m.score(x).unwrap() >= 0.5, t);
        }
    }

    #[test]
    fn training_loss_is_non_increasing() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![((i * 13) % 7) as f64, (i % 5) as f64])
            .collect();
        let labels: Vec<bool> = (0..30).map(|i| (i * 11) % 3 == 0).collect();
        let d = DesignMatrix::unnamed(rows, labels).unwrap();
        let m = fit_boosted_trees(&d, 40, 0.3, 2).unwrap();
        for w in m.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn leaf_step_solves_the_score_equation() {
        let f = [0.3, -1.0, 2.0, 0.0];
        let t = [true, false, true, true];
        let g = leaf_step(&f, &t);
        let s: f64 = f.iter().map(|&v| sigmoid(v + g)).sum();
        assert!((s - 3.0).abs() < 1e-9);
    }

    #[test]
    fn shrinkage_out_of_range() {
        assert!(fit_boosted_trees(&separable(), 1, 0.0, 5).is_err());
        assert!(fit_boosted_trees(&separable(), 1, 1.5, 5).is_err());
        assert!(fit_boosted_trees(&separable(), 0, 0.5, 5).is_err());
    }
}
