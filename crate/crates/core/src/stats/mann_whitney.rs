use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::rank::{midrank, tie_groups};
use crate::error::{Error, Result};

/// Largest smaller-group size for which [`PValueMethod::Auto`] uses the
/// exact permutation distribution.
pub const EXACT_MAX_SMALLER_GROUP: usize = 8;

/// Which group has the larger mean rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
    #[serde(rename = "0")]
    Neutral,
}

impl Direction {
    pub fn symbol(self) -> char {
        match self {
            Direction::Positive => '+',
            Direction::Negative => '-',
            Direction::Neutral => '0',
        }
    }

    /// +1, -1 or 0.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
            Direction::Neutral => 0.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Exact when the smaller group has at most [`EXACT_MAX_SMALLER_GROUP`]
    /// members, normal approximation otherwise.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyResult {
    /// U of the fraud group: its rank sum minus n_fraud(n_fraud+1)/2.
    pub u_statistic: f64,
    /// Continuity-corrected, tie-corrected normal score (signed by direction).
    pub z_score: f64,
    /// Two-tailed p-value.
    pub p_value: f64,
    pub direction: Direction,
    pub n_fraud: usize,
    pub n_nonfraud: usize,
    /// Whether `p_value` came from the exact permutation distribution.
    pub exact: bool,
}

/// Two-tailed Mann-Whitney test of fraud vs non-fraud values.
pub fn mann_whitney(fraud: &[f64], nonfraud: &[f64]) -> Result<MannWhitneyResult> {
    mann_whitney_with(fraud, nonfraud, PValueMethod::Auto)
}

pub fn mann_whitney_with(
    fraud: &[f64],
    nonfraud: &[f64],
    method: PValueMethod,
) -> Result<MannWhitneyResult> {
    if fraud.is_empty() || nonfraud.is_empty() {
        return Err(Error::InsufficientData(format!(
            "Mann-Whitney needs both groups nonempty (fraud = {}, non-fraud = {})",
            fraud.len(),
            nonfraud.len()
        )));
    }
    if fraud.iter().chain(nonfraud).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (n1, n2) = (fraud.len(), nonfraud.len());
    let n = n1 + n2;
    let pooled: Vec<f64> = fraud.iter().chain(nonfraud).copied().collect();
    let ranks = midrank(&pooled)?;

    // Doubled midranks are integers, which keeps the exact path in integer
    // arithmetic.
    let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
    let fraud_sum2: u64 = doubled[..n1].iter().sum();
    let u = fraud_sum2 as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    let mean = (n1 * n2) as f64 / 2.0;

    let ties = tie_groups(&pooled);
    let base = MannWhitneyResult {
        u_statistic: u,
        z_score: 0.0,
        p_value: 1.0,
        direction: Direction::Neutral,
        n_fraud: n1,
        n_nonfraud: n2,
        exact: false,
    };
    if ties.len() == 1 {
        return Ok(base);
    }

    // 2U - n1*n2, exactly.
    let twice_dev = fraud_sum2 as i128 - (n1 * (n1 + 1)) as i128 - (n1 * n2) as i128;
    let direction = match twice_dev.signum() {
        1 => Direction::Positive,
        -1 => Direction::Negative,
        _ => Direction::Neutral,
    };

    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let variance = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let corrected = ((u - mean).abs() - 0.5).max(0.0);
    let z = direction.sign() * corrected / variance.sqrt();

    let use_exact = match method {
        PValueMethod::Auto => n1.min(n2) <= EXACT_MAX_SMALLER_GROUP,
        PValueMethod::Exact => true,
        PValueMethod::Normal => false,
    };
    let p_value = if use_exact {
        exact_two_tailed(&doubled, n1)?
    } else {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.sf(z.abs())).min(1.0)
    };

    Ok(MannWhitneyResult {
        z_score: z,
        p_value,
        direction,
        exact: use_exact,
        ..base
    })
}

/// Exact two-tailed p-value under the permutation distribution conditional
/// on the observed ties: the share of equally likely group assignments whose
/// rank sum lies at least as far from its mean as the observed one.
fn exact_two_tailed(doubled: &[u64], n_first: usize) -> Result<f64> {
    let n = doubled.len();
    // Count subsets of the smaller group; |U - mean| is the same for either.
    let (m, observed): (usize, u64) = if n_first <= n - n_first {
        (n_first, doubled[..n_first].iter().sum())
    } else {
        (n - n_first, doubled[n_first..].iter().sum())
    };
    let max_sum: u64 = {
        let mut sorted = doubled.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        sorted[..m].iter().sum()
    };
    let width = max_sum as usize + 1;

    // counts[j * width + s]: subsets of size j with doubled rank sum s.
    let mut counts = vec![0u128; (m + 1) * width];
    counts[0] = 1;
    for (seen, &r) in doubled.iter().enumerate() {
        let r = r as usize;
        let top = m.min(seen + 1);
        for j in (1..=top).rev() {
            let (lower, upper) = counts.split_at_mut(j * width);
            let src = &lower[(j - 1) * width..];
            let dst = &mut upper[..width];
            for s in (r..width).rev() {
                let add = src[s - r];
                if add != 0 {
                    dst[s] = dst[s].checked_add(add).ok_or_else(|| {
                        Error::InvalidParameter("exact Mann-Whitney distribution overflows".into())
                    })?;
                }
            }
        }
    }

    let centre = (m * (n + 1)) as i128; // mean doubled rank sum
    let observed_dev = (observed as i128 - centre).abs();
    let row = &counts[m * width..(m + 1) * width];
    let mut extreme = 0u128;
    let mut total = 0u128;
    for (s, &c) in row.iter().enumerate() {
        if c == 0 {
            continue;
        }
        total += c;
        if (s as i128 - centre).abs() >= observed_dev {
            extreme += c;
        }
    }
    Ok((extreme as f64 / total as f64).min(1.0))
}
