use rand::Rng;
use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEPTH: usize = 5;
pub const DEFAULT_MIN_LEAF: usize = 1;

/// A later candidate split replaces the incumbent only if it lowers the
/// impurity by more than this, so near-ties resolve to the earliest
/// (feature, threshold) in scan order.
const SPLIT_TOLERANCE: f64 = 1e-12;

/// Binary tree node. Cases with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Fraud fraction for classification trees, the fitted output for
        /// regression trees.
        value: f64,
        /// Training mass of (non-fraud, fraud) cases reaching the node.
        class_mass: [f64; 2],
        n_samples: usize,
        depth: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
        class_mass: [f64; 2],
        n_samples: usize,
        depth: usize,
    },
}

impl TreeNode {
    /// The leaf reached by `x`.
    pub fn leaf_for(&self, x: &[f64]) -> &TreeNode {
        let mut node = self;
        while let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } = node
        {
            node = if x[*feature] <= *threshold {
                left
            } else {
                right
            };
        }
        node
    }

    /// Position of the reached leaf in left-first depth-first order.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut node = self;
        let mut offset = 0;
        while let TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } = node
        {
            if x[*feature] <= *threshold {
                node = left;
            } else {
                offset += left.n_leaves();
                node = right;
            }
        }
        offset
    }

    pub fn value(&self) -> f64 {
        match self {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Split { class_mass, .. } => fraction(*class_mass),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.leaf_for(x).value()
    }

    pub fn class_mass(&self) -> [f64; 2] {
        match self {
            TreeNode::Leaf { class_mass, .. } | TreeNode::Split { class_mass, .. } => *class_mass,
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Leaf { n_samples, .. } | TreeNode::Split { n_samples, .. } => *n_samples,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    /// Depth of the deepest leaf below (a lone root has depth 0).
    pub fn max_depth(&self) -> usize {
        match self {
            TreeNode::Leaf { depth, .. } => *depth,
            TreeNode::Split { left, right, .. } => left.max_depth().max(right.max_depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Leaves in left-first depth-first order.
    pub fn leaves_mut(&mut self) -> Vec<&mut TreeNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            if node.is_leaf() {
                out.push(node);
            } else if let TreeNode::Split { left, right, .. } = node {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature,
                left,
                right,
                ..
            } => Some(
                [Some(*feature), left.max_feature(), right.max_feature()]
                    .into_iter()
                    .flatten()
                    .max()?,
            ),
        }
    }
}

fn fraction(mass: [f64; 2]) -> f64 {
    let total = mass[0] + mass[1];
    if total > 0.0 {
        mass[1] / total
    } else {
        0.0
    }
}

/// Gini impurity Σ_k p_k(1 − p_k) of a node with the given class mass.
pub fn gini(mass: [f64; 2]) -> f64 {
    let total = mass[0] + mass[1];
    if total > 0.0 {
        2.0 * mass[0] * mass[1] / (total * total)
    } else {
        0.0
    }
}

/// Split quality criterion.
#[derive(Clone, Copy)]
pub(crate) enum Criterion<'a> {
    /// Weighted Gini impurity of the labels.
    Gini,
    /// Within-node sum of squared deviations of real targets.
    Variance(&'a [f64]),
}

/// Which features a node may split on.
pub(crate) enum FeaturePick<'r, R: Rng> {
    All,
    Random { k: usize, rng: &'r mut R },
}

pub(crate) struct Grower<'a> {
    pub x: &'a [Vec<f64>],
    pub labels: &'a [bool],
    pub weights: Option<&'a [f64]>,
    pub criterion: Criterion<'a>,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub n_features: usize,
}

#[derive(Default, Clone, Copy)]
struct Stats {
    mass: [f64; 2],
    w: f64,
    wy: f64,
    wy2: f64,
}

impl Stats {
    fn add(&mut self, label: bool, w: f64, y: f64) {
        self.mass[label as usize] += w;
        self.w += w;
        self.wy += w * y;
        self.wy2 += w * y * y;
    }

    fn sub(&self, other: &Stats) -> Stats {
        Stats {
            mass: [self.mass[0] - other.mass[0], self.mass[1] - other.mass[1]],
            w: self.w - other.w,
            wy: self.wy - other.wy,
            wy2: self.wy2 - other.wy2,
        }
    }
}

impl Grower<'_> {
    fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    fn target(&self, i: usize) -> f64 {
        match self.criterion {
            Criterion::Gini => 0.0,
            Criterion::Variance(t) => t[i],
        }
    }

    /// Node impurity scaled by node weight, so children can be summed.
    fn weighted_impurity(&self, s: &Stats) -> f64 {
        match self.criterion {
            Criterion::Gini => {
                let t = s.mass[0] + s.mass[1];
                if t > 0.0 {
                    2.0 * s.mass[0] * s.mass[1] / t
                } else {
                    0.0
                }
            }
            Criterion::Variance(_) => {
                if s.w > 0.0 {
                    (s.wy2 - s.wy * s.wy / s.w).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }

    fn is_pure(&self, idx: &[usize], s: &Stats) -> bool {
        match self.criterion {
            Criterion::Gini => s.mass[0] == 0.0 || s.mass[1] == 0.0,
            Criterion::Variance(t) => idx.iter().all(|&i| t[i] == t[idx[0]]),
        }
    }

    fn stats(&self, idx: &[usize]) -> Stats {
        let mut s = Stats::default();
        for &i in idx {
            s.add(self.labels[i], self.weight(i), self.target(i));
        }
        s
    }

    /// Best (feature, threshold) over the given features, or `None` if no
    /// split leaves `min_leaf` cases on both sides.
    fn best_split(&self, idx: &[usize], features: &[usize], total: &Stats) -> Option<(usize, f64)> {
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = Stats::default();
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                left.add(self.labels[i], self.weight(i), self.target(i));
                let (lo, hi) = (self.x[i][f], self.x[order[pos + 1]][f]);
                if lo == hi {
                    continue;
                }
                let n_left = pos + 1;
                if n_left < self.min_leaf || order.len() - n_left < self.min_leaf {
                    continue;
                }
                let right = total.sub(&left);
                let impurity =
                    (self.weighted_impurity(&left) + self.weighted_impurity(&right)) / total.w;
                if best.is_none_or(|(b, _, _)| impurity < b - SPLIT_TOLERANCE) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((impurity, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    pub(crate) fn grow<R: Rng>(
        &self,
        idx: Vec<usize>,
        depth: usize,
        pick: &mut FeaturePick<'_, R>,
    ) -> TreeNode {
        let s = self.stats(&idx);
        let leaf = |s: &Stats| TreeNode::Leaf {
            value: match self.criterion {
                Criterion::Gini => fraction(s.mass),
                Criterion::Variance(_) => {
                    if s.w > 0.0 {
                        s.wy / s.w
                    } else {
                        0.0
                    }
                }
            },
            class_mass: s.mass,
            n_samples: idx.len(),
            depth,
        };
        if depth >= self.max_depth || idx.len() < 2 || self.is_pure(&idx, &s) {
            return leaf(&s);
        }
        let features: Vec<usize> = match pick {
            FeaturePick::All => (0..self.n_features).collect(),
            FeaturePick::Random { k, rng } => {
                let mut f = rand::seq::index::sample(*rng, self.n_features, *k).into_vec();
                f.sort_unstable();
                f
            }
        };
        let Some((feature, threshold)) = self.best_split(&idx, &features, &s) else {
            return leaf(&s);
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1, pick);
        let right = self.grow(r, depth + 1, pick);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
            class_mass: s.mass,
            n_samples: idx.len(),
            depth,
        }
    }
}

/// A fitted classification tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub n_features: usize,
}

impl DecisionTree {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_input(self.n_features, x)?;
        Ok(self.root.predict(x))
    }
}

pub(crate) fn check_input(p: usize, x: &[f64]) -> Result<()> {
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

pub(crate) fn check_tree_params(min_leaf: usize) -> Result<()> {
    if min_leaf == 0 {
        return Err(Error::InvalidParameter(
            "min_leaf must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Grows a Gini classification tree; leaves score their fraud fraction.
pub fn fit_cart(d: &DesignMatrix, max_depth: usize, min_leaf: usize) -> Result<DecisionTree> {
    fit_weighted_cart(d, None, max_depth, min_leaf)
}

/// [`fit_cart`] with per-case weights: impurities and leaf fractions use
/// weight mass, while `min_leaf` still counts cases.
pub fn fit_weighted_cart(
    d: &DesignMatrix,
    weights: Option<&[f64]>,
    max_depth: usize,
    min_leaf: usize,
) -> Result<DecisionTree> {
    check_tree_params(min_leaf)?;
    if let Some(w) = weights {
        if w.len() != d.n() {
            return Err(Error::LengthMismatch {
                left: d.n(),
                right: w.len(),
            });
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "case weights must be finite and nonnegative".into(),
            ));
        }
    }
    let g = Grower {
        x: &d.rows,
        labels: &d.labels,
        weights,
        criterion: Criterion::Gini,
        max_depth,
        min_leaf,
        n_features: d.p(),
    };
    let root = g.grow::<rand_chacha::ChaCha8Rng>((0..d.n()).collect(), 0, &mut FeaturePick::All);
    debug_assert!(root.max_feature().is_none_or(|f| f < d.p()));
    Ok(DecisionTree {
        root,
        n_features: d.p(),
    })
}
