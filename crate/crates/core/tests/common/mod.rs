//! Reference implementations used as test oracles. Each one is the plain
//! textbook definition with no shared code from the crate.
#![allow(dead_code)]

use forensic_core::models::DesignMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Doubled midranks by direct counting: 2·(#less) + #equal + 1.
pub fn doubled_midranks(v: &[f64]) -> Vec<i64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as i64;
            let equal = v.iter().filter(|&&b| b == a).count() as i64;
            2 * less + equal + 1
        })
        .collect()
}

/// Two-tailed exact Mann-Whitney p by enumerating every way of choosing
/// the first group's positions in the pooled sample.
pub fn brute_force_mw_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    assert!(n <= 20);
    let r2 = doubled_midranks(&pooled);
    let n1 = a.len();
    let centre = (n1 * (n + 1)) as i64;
    let observed: i64 = r2[..n1].iter().sum();
    let dev = (observed - centre).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let s: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r2[i]).sum();
        total += 1;
        if (s - centre).abs() >= dev {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

/// Tau-a from all n(n−1)/2 pairs.
pub fn tau_a_pairs(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).partial_cmp(&0.0).unwrap() as i64;
            let dy = (y[i] - y[j]).partial_cmp(&0.0).unwrap() as i64;
            s += dx * dy;
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

/// P(score_pos > score_neg) + ½ P(tie) over all positive/negative pairs.
pub fn pairwise_auc(labels: &[bool], scores: &[f64]) -> f64 {
    let (mut wins2, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            wins2 += if scores[i] > scores[j] {
                2
            } else if scores[i] == scores[j] {
                1
            } else {
                0
            };
        }
    }
    wins2 as f64 / (2 * pairs) as f64
}

/// Class-size-weighted Gini impurity of a partition, Σ_k (n_k/n)·Σ_c p_c(1−p_c).
pub fn split_gini(left: [usize; 2], right: [usize; 2]) -> f64 {
    let g = |c: [usize; 2]| {
        let t = (c[0] + c[1]) as f64;
        if t == 0.0 {
            return 0.0;
        }
        let p0 = c[0] as f64 / t;
        let p1 = c[1] as f64 / t;
        p0 * (1.0 - p0) + p1 * (1.0 - p1)
    };
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    (nl * g(left) + nr * g(right)) / (nl + nr)
}

/// Smallest split impurity over every feature and every cut between two
/// distinct observed values; `None` when no feature varies.
pub fn exhaustive_best_gini(d: &DesignMatrix) -> Option<f64> {
    let mut best: Option<f64> = None;
    for f in 0..d.p() {
        let mut values: Vec<f64> = d.rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let mut left = [0usize; 2];
            let mut right = [0usize; 2];
            for (row, &y) in d.rows.iter().zip(&d.labels) {
                if row[f] <= w[0] {
                    left[y as usize] += 1;
                } else {
                    right[y as usize] += 1;
                }
            }
            let g = split_gini(left, right);
            best = Some(best.map_or(g, |b: f64| b.min(g)));
        }
    }
    best
}

/// Random design with both classes present. `levels` > 0 draws integer
/// values in 0..levels to force ties.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize, levels: u32) -> DesignMatrix {
    loop {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|_| {
                        if levels > 0 {
                            rng.random_range(0..levels) as f64
                        } else {
                            rng.random_range(-3.0..3.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let labels: Vec<bool> = rows
            .iter()
            .map(|r| r[0] + rng.random_range(-2.0..2.0) > 0.5 * levels as f64)
            .collect();
        let fraud = labels.iter().filter(|&&l| l).count();
        if fraud > 0 && fraud < n {
            return DesignMatrix::unnamed(rows, labels).unwrap();
        }
    }
}

/// Central finite-difference gradient.
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(f: F, w: &[f64], h: f64) -> Vec<f64> {
    (0..w.len())
        .map(|j| {
            let mut up = w.to_vec();
            let mut down = w.to_vec();
            up[j] += h;
            down[j] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// One row of the published per-industry results table:
/// (industry, model, accuracy, specificity, sensitivity, precision, G-Mean, F-Measure, AUC).
pub type PublishedRow = (&'static str, &'static str, [f64; 7]);

pub const PUBLISHED: [PublishedRow; 35] = [
    (
        "Agriculture",
        "LDA",
        [0.714, 0.500, 1.000, 0.600, 0.707, 0.750, 0.750],
    ),
    (
        "Agriculture",
        "QDA",
        [0.857, 0.750, 1.000, 0.750, 0.866, 0.857, 0.875],
    ),
    (
        "Agriculture",
        "LR",
        [0.714, 0.500, 1.000, 0.600, 0.707, 0.750, 0.750],
    ),
    (
        "Agriculture",
        "AB",
        [0.857, 0.750, 1.000, 0.750, 0.866, 0.857, 0.875],
    ),
    (
        "Agriculture",
        "DT",
        [0.571, 0.750, 0.333, 0.500, 0.500, 0.400, 0.542],
    ),
    (
        "Agriculture",
        "BT",
        [0.571, 0.750, 0.333, 0.500, 0.500, 0.400, 0.542],
    ),
    (
        "Agriculture",
        "RF",
        [0.714, 0.500, 1.000, 0.600, 0.707, 0.750, 0.750],
    ),
    (
        "Mining",
        "LDA",
        [0.656, 0.917, 0.500, 0.909, 0.677, 0.645, 0.708],
    ),
    (
        "Mining",
        "QDA",
        [0.812, 0.917, 0.750, 0.938, 0.829, 0.833, 0.833],
    ),
    (
        "Mining",
        "LR",
        [0.688, 0.917, 0.550, 0.917, 0.710, 0.687, 0.733],
    ),
    (
        "Mining",
        "AB",
        [0.625, 0.667, 0.600, 0.750, 0.632, 0.667, 0.633],
    ),
    (
        "Mining",
        "DT",
        [0.812, 0.833, 0.800, 0.889, 0.816, 0.842, 0.817],
    ),
    (
        "Mining",
        "BT",
        [0.750, 0.833, 0.700, 0.875, 0.764, 0.778, 0.767],
    ),
    (
        "Mining",
        "RF",
        [0.781, 1.000, 0.650, 1.000, 0.806, 0.788, 0.825],
    ),
    (
        "Manufacturing",
        "LDA",
        [0.530, 0.460, 0.594, 0.548, 0.522, 0.570, 0.527],
    ),
    (
        "Manufacturing",
        "QDA",
        [0.546, 0.109, 0.943, 0.539, 0.321, 0.686, 0.526],
    ),
    (
        "Manufacturing",
        "LR",
        [0.530, 0.425, 0.625, 0.545, 0.516, 0.583, 0.525],
    ),
    (
        "Manufacturing",
        "AB",
        [0.585, 0.557, 0.609, 0.603, 0.583, 0.606, 0.583],
    ),
    (
        "Manufacturing",
        "DT",
        [0.555, 0.259, 0.823, 0.551, 0.461, 0.660, 0.541],
    ),
    (
        "Manufacturing",
        "BT",
        [0.574, 0.621, 0.531, 0.607, 0.574, 0.567, 0.576],
    ),
    (
        "Manufacturing",
        "RF",
        [0.503, 0.460, 0.542, 0.525, 0.499, 0.533, 0.501],
    ),
    (
        "Transportation",
        "LDA",
        [0.562, 0.625, 0.500, 0.571, 0.559, 0.533, 0.562],
    ),
    (
        "Transportation",
        "QDA",
        [0.562, 0.969, 0.156, 0.833, 0.389, 0.263, 0.562],
    ),
    (
        "Transportation",
        "LR",
        [0.578, 0.594, 0.562, 0.581, 0.578, 0.571, 0.578],
    ),
    (
        "Transportation",
        "AB",
        [0.609, 0.719, 0.500, 0.640, 0.599, 0.561, 0.609],
    ),
    (
        "Transportation",
        "DT",
        [0.531, 0.625, 0.438, 0.538, 0.523, 0.483, 0.531],
    ),
    (
        "Transportation",
        "BT",
        [0.672, 0.719, 0.625, 0.690, 0.670, 0.656, 0.672],
    ),
    (
        "Transportation",
        "RF",
        [0.656, 0.562, 0.750, 0.632, 0.650, 0.686, 0.656],
    ),
    (
        "Trade",
        "LDA",
        [0.559, 0.521, 0.593, 0.582, 0.556, 0.587, 0.557],
    ),
    (
        "Trade",
        "QDA",
        [0.500, 0.042, 0.907, 0.516, 0.194, 0.658, 0.475],
    ),
    (
        "Trade",
        "LR",
        [0.549, 0.521, 0.574, 0.574, 0.547, 0.574, 0.547],
    ),
    (
        "Trade",
        "AB",
        [0.608, 0.542, 0.667, 0.621, 0.601, 0.643, 0.604],
    ),
    (
        "Trade",
        "DT",
        [0.637, 0.479, 0.778, 0.627, 0.610, 0.694, 0.628],
    ),
    (
        "Trade",
        "BT",
        [0.745, 0.771, 0.722, 0.780, 0.746, 0.750, 0.747],
    ),
    (
        "Trade",
        "RF",
        [0.637, 0.625, 0.648, 0.660, 0.636, 0.654, 0.637],
    ),
];

/// Smallest test set (by total, then negatives, tn, tp) whose confusion
/// matrix rounds to the published accuracy, specificity, sensitivity and
/// precision. Returns (tp, fp, fn, tn).
pub fn reconstruct_confusion(row: &[f64; 7]) -> Option<(u64, u64, u64, u64)> {
    let close = |num: u64, den: u64, target: f64| {
        den > 0 && (num as f64 / den as f64 - target).abs() <= 0.0005 + 1e-12
    };
    let [acc, spec, sens, prec, ..] = *row;
    for total in 2..=5000u64 {
        for neg in 1..total {
            let pos = total - neg;
            let near = |x: f64, cap: u64| {
                let c = (x.round() as i64).clamp(0, cap as i64) as u64;
                c.saturating_sub(1)..=(c + 1).min(cap)
            };
            for tn in near(spec * neg as f64, neg) {
                if !close(tn, neg, spec) {
                    continue;
                }
                for tp in near(sens * pos as f64, pos) {
                    let fp = neg - tn;
                    if close(tp, pos, sens)
                        && close(tp, tp + fp, prec)
                        && close(tp + tn, total, acc)
                    {
                        return Some((tp, fp, pos - tp, tn));
                    }
                }
            }
        }
    }
    None
}
