use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::tree::{check_input, fit_weighted_cart, TreeNode};
use crate::error::{Error, Result};

pub const DEFAULT_ROUNDS: usize = 100;
/// Weighted error used in place of an exact zero when computing α.
const ERROR_FLOOR: f64 = 1e-10;

/// Diagnostics for one boosting round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    pub weighted_error: f64,
    pub alpha: f64,
    /// Weighted error of this round's stump under the updated, renormalized
    /// weights; absent when the round ended training.
    pub error_after_update: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub stumps: Vec<TreeNode>,
    pub alphas: Vec<f64>,
    pub trace: Vec<BoostRound>,
    pub n_features: usize,
}

fn vote(stump: &TreeNode, x: &[f64]) -> bool {
    stump.predict(x) >= 0.5
}

impl AdaBoostModel {
    /// Σ α_m 1[G_m(x) = fraud] / Σ α_m; an unweighted vote when every α is 0.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_input(self.n_features, x)?;
        let total: f64 = self.alphas.iter().sum();
        if total > 0.0 {
            let fraud: f64 = self
                .stumps
                .iter()
                .zip(&self.alphas)
                .filter(|(s, _)| vote(s, x))
                .map(|(_, a)| a)
                .sum();
            Ok((fraud / total).clamp(0.0, 1.0))
        } else {
            let fraud = self.stumps.iter().filter(|s| vote(s, x)).count();
            Ok(fraud as f64 / self.stumps.len() as f64)
        }
    }
}

/// Discrete AdaBoost over weighted depth-1 trees.
///
/// Stops early when a stump is perfect (it is kept with α computed from the
/// floored error) or when the weighted error reaches 0.5 (the stump is
/// dropped unless it is the first, which is kept with α = 0).
pub fn fit_adaboost(d: &DesignMatrix, rounds: usize) -> Result<AdaBoostModel> {
    if rounds < 1 {
        return Err(Error::InvalidParameter(
            "AdaBoost needs at least one round".into(),
        ));
    }
    let n = d.n();
    let mut w = vec![1.0 / n as f64; n];
    let mut model = AdaBoostModel {
        stumps: Vec::new(),
        alphas: Vec::new(),
        trace: Vec::new(),
        n_features: d.p(),
    };

    for _ in 0..rounds {
        let stump = fit_weighted_cart(d, Some(&w), 1, 1)?.root;
        let missed: Vec<bool> = d
            .rows
            .iter()
            .zip(&d.labels)
            .map(|(x, &t)| vote(&stump, x) != t)
            .collect();
        let total: f64 = w.iter().sum();
        let err = w
            .iter()
            .zip(&missed)
            .filter(|(_, &m)| m)
            .map(|(wi, _)| wi)
            .sum::<f64>()
            / total;

        if err >= 0.5 {
            if model.stumps.is_empty() {
                model.stumps.push(stump);
                model.alphas.push(0.0);
                model.trace.push(BoostRound {
                    weighted_error: err,
                    alpha: 0.0,
                    error_after_update: None,
                });
            }
            break;
        }
        if err <= 0.0 {
            let alpha = ((1.0 - ERROR_FLOOR) / ERROR_FLOOR).ln();
            model.stumps.push(stump);
            model.alphas.push(alpha);
            model.trace.push(BoostRound {
                weighted_error: err,
                alpha,
                error_after_update: None,
            });
            break;
        }

        let alpha = ((1.0 - err) / err).ln();
        let boost = alpha.exp();
        for (wi, &m) in w.iter_mut().zip(&missed) {
            if m {
                *wi *= boost;
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= total);
        let after: f64 = w
            .iter()
            .zip(&missed)
            .filter(|(_, &m)| m)
            .map(|(wi, _)| wi)
            .sum();

        model.stumps.push(stump);
        model.alphas.push(alpha);
        model.trace.push(BoostRound {
            weighted_error: err,
            alpha,
            error_after_update: Some(after),
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_values() {
        assert_eq!(((1.0 - 0.5_f64) / 0.5).ln(), 0.0);
        assert!((((1.0 - 0.25_f64) / 0.25).ln() - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn separable_data_stops_after_one_perfect_stump() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![7.0], vec![8.0]];
        let d = DesignMatrix::unnamed(rows, vec![false, false, false, true, true]).unwrap();
        let m = fit_adaboost(&d, 50).unwrap();
        assert_eq!(m.stumps.len(), 1);
        assert_eq!(m.trace[0].weighted_error, 0.0);
        for (x, &t) in d.rows.iter().zip(&d.labels) {
            assert_eq!(m.score(x).unwrap() >= 0.5, t);
        }
    }

    #[test]
    fn updated_error_is_one_half() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64, ((i * 7) % 5) as f64])
            .collect();
        let labels: Vec<bool> = (0..20).map(|i| (i * 3) % 4 == 0 || i > 14).collect();
        let d = DesignMatrix::unnamed(rows, labels).unwrap();
        let m = fit_adaboost(&d, 25).unwrap();
        assert!(m.trace.len() > 1);
        for r in &m.trace {
            if let Some(e) = r.error_after_update {
                assert!((e - 0.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_rounds_rejected() {
        let d = DesignMatrix::unnamed(vec![vec![0.0], vec![1.0]], vec![false, true]).unwrap();
        assert!(fit_adaboost(&d, 0).is_err());
    }

    #[test]
    fn useless_first_stump_scores_by_plain_vote() {
        // A single point cannot be split, so the stump is a leaf scoring 0.5.
        let d = DesignMatrix::unnamed(vec![vec![0.0], vec![0.0]], vec![false, true]).unwrap();
        let m = fit_adaboost(&d, 5).unwrap();
        assert_eq!(m.alphas, vec![0.0]);
        assert_eq!(m.score(&[0.0]).unwrap(), 1.0);
    }
}
