use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratios::{Observation, Ratio};

/// Complete numeric training data: `rows[i][j]` is feature `j` of case `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub feature_names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<bool>,
        feature_names: Vec<String>,
    ) -> Result<DesignMatrix> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        if rows.is_empty() {
            return Err(Error::InsufficientData("design matrix has no rows".into()));
        }
        let p = feature_names.len();
        if p == 0 {
            return Err(Error::InsufficientData(
                "design matrix has no features".into(),
            ));
        }
        for r in &rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(DesignMatrix {
            rows,
            labels,
            feature_names,
        })
    }

    /// Unnamed features `x0, x1, ...`.
    pub fn unnamed(rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<DesignMatrix> {
        let p = rows.first().map_or(0, Vec::len);
        DesignMatrix::new(rows, labels, (0..p).map(|j| format!("x{j}")).collect())
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.labels.iter().filter(|&&l| l).count();
        [self.labels.len() - pos, pos]
    }

    pub fn targets(&self) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&l| if l { 1.0 } else { 0.0 })
            .collect()
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        let [neg, pos] = self.class_counts();
        if neg == 0 || pos == 0 {
            return Err(Error::InsufficientData(format!(
                "both classes are needed to fit (fraud = {pos}, non-fraud = {neg})"
            )));
        }
        Ok(())
    }
}

/// Training-fold statistics: per-feature medians for imputing missing
/// ratios and, for the linear and Gaussian families, mean/scale for
/// standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub features: Vec<Ratio>,
    pub medians: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Standardization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    })
}

impl Preprocessor {
    pub fn fit(train: &[&Observation], features: &[Ratio], standardize: bool) -> Preprocessor {
        let medians: Vec<f64> = features
            .iter()
            .map(|&r| {
                let mut present: Vec<f64> = train.iter().filter_map(|o| o.ratios.get(r)).collect();
                median(&mut present).unwrap_or(0.0)
            })
            .collect();
        let mut pre = Preprocessor {
            features: features.to_vec(),
            medians,
            standardization: None,
        };
        if standardize && !train.is_empty() {
            let imputed: Vec<Vec<f64>> = train.iter().map(|o| pre.impute(o)).collect();
            let n = imputed.len() as f64;
            let p = features.len();
            let means: Vec<f64> = (0..p)
                .map(|j| imputed.iter().map(|r| r[j]).sum::<f64>() / n)
                .collect();
            let scales: Vec<f64> = (0..p)
                .map(|j| {
                    let ss: f64 = imputed.iter().map(|r| (r[j] - means[j]).powi(2)).sum();
                    let sd = (ss / (n - 1.0).max(1.0)).sqrt();
                    if sd.is_finite() && sd > 0.0 {
                        sd
                    } else {
                        1.0
                    }
                })
                .collect();
            pre.standardization = Some(Standardization { means, scales });
        }
        pre
    }

    fn impute(&self, o: &Observation) -> Vec<f64> {
        self.features
            .iter()
            .zip(&self.medians)
            .map(|(&r, &m)| o.ratios.get(r).unwrap_or(m))
            .collect()
    }

    /// Maps raw, complete feature values into model space.
    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                got: raw.len(),
            });
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(match &self.standardization {
            None => raw.to_vec(),
            Some(s) => raw
                .iter()
                .zip(&s.means)
                .zip(&s.scales)
                .map(|((x, m), sd)| (x - m) / sd)
                .collect(),
        })
    }

    /// Imputes missing ratios, then applies [`Preprocessor::apply`].
    pub fn transform(&self, o: &Observation) -> Vec<f64> {
        self.apply(&self.impute(o))
            .expect("imputed row has the right width and finite values")
    }

    pub fn design(&self, obs: &[&Observation]) -> Result<DesignMatrix> {
        DesignMatrix::new(
            obs.iter().map(|o| self.transform(o)).collect(),
            obs.iter().map(|o| o.fraud).collect(),
            self.features.iter().map(|r| r.name().to_string()).collect(),
        )
    }
}
