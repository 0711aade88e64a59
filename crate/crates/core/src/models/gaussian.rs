use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::sigmoid;
use crate::error::{Error, Result};

/// Default ridge: this fraction of the mean diagonal variance.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-6;
const MAX_RIDGE_ESCALATIONS: usize = 16;

/// A covariance matrix after ridge, with its Cholesky factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredCovariance {
    pub matrix: Vec<Vec<f64>>,
    /// Lower-triangular L with L Lᵀ = matrix.
    pub cholesky: Vec<Vec<f64>>,
    pub log_det: f64,
    pub ridge: f64,
}

impl FactoredCovariance {
    /// Adds `scale · trace/p` to the diagonal, escalating tenfold until the
    /// matrix factors.
    fn with_ridge(mut cov: Vec<Vec<f64>>, scale: f64) -> Result<FactoredCovariance> {
        let p = cov.len();
        let trace: f64 = (0..p).map(|i| cov[i][i]).sum();
        let mut ridge = if trace > 0.0 {
            scale * trace / p as f64
        } else {
            scale
        };
        if ridge <= 0.0 {
            ridge = f64::MIN_POSITIVE;
        }
        for _ in 0..MAX_RIDGE_ESCALATIONS {
            let m = DMatrix::from_fn(p, p, |i, j| cov[i][j] + if i == j { ridge } else { 0.0 });
            if let Some(ch) = m.clone().cholesky() {
                let l = ch.l();
                let log_det = 2.0 * (0..p).map(|i| l[(i, i)].ln()).sum::<f64>();
                if log_det.is_finite() {
                    for (i, row) in cov.iter_mut().enumerate() {
                        row[i] += ridge;
                    }
                    return Ok(FactoredCovariance {
                        matrix: cov,
                        cholesky: (0..p)
                            .map(|i| (0..p).map(|j| l[(i, j)]).collect())
                            .collect(),
                        log_det,
                        ridge,
                    });
                }
            }
            ridge *= 10.0;
        }
        Err(Error::DegenerateCovariance(
            "covariance is not positive definite even after ridge".into(),
        ))
    }

    /// (x − μ)ᵀ Σ⁻¹ (x − μ) by forward substitution.
    fn mahalanobis(&self, x: &[f64], mean: &[f64]) -> f64 {
        let p = mean.len();
        let mut y = vec![0.0; p];
        for i in 0..p {
            let mut s = x[i] - mean[i];
            for k in 0..i {
                s -= self.cholesky[i][k] * y[k];
            }
            y[i] = s / self.cholesky[i][i];
        }
        y.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    Shared(FactoredCovariance),
    PerClass([FactoredCovariance; 2]),
}

/// Fitted Gaussian class-conditional model; index 0 is non-fraud, 1 fraud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClassParams {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub covariance: Covariance,
}

impl GaussianClassParams {
    pub fn n_features(&self) -> usize {
        self.means[0].len()
    }

    fn cov(&self, class: usize) -> &FactoredCovariance {
        match &self.covariance {
            Covariance::Shared(c) => c,
            Covariance::PerClass(cs) => &cs[class],
        }
    }

    /// ln P(Y=k) + ln N(x; μ_k, Σ_k) without the shared 2π term.
    fn log_joint(&self, class: usize, x: &[f64]) -> f64 {
        let c = self.cov(class);
        self.priors[class].ln() - 0.5 * c.log_det - 0.5 * c.mahalanobis(x, &self.means[class])
    }

    /// Posterior probability of both classes, summing to one.
    pub fn posteriors(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let d = self.log_joint(1, x) - self.log_joint(0, x);
        Ok([sigmoid(-d), sigmoid(d)])
    }
}

/// P(fraud | x).
pub fn gaussian_posterior(params: &GaussianClassParams, x: &[f64]) -> Result<f64> {
    Ok(params.posteriors(x)?[1])
}

struct ClassSummary {
    count: [usize; 2],
    means: [Vec<f64>; 2],
}

fn summarize(d: &DesignMatrix) -> Result<ClassSummary> {
    d.require_both_classes()?;
    let p = d.p();
    let mut sums = [vec![0.0; p], vec![0.0; p]];
    let mut count = [0usize; 2];
    for (row, &l) in d.rows.iter().zip(&d.labels) {
        let k = l as usize;
        count[k] += 1;
        for (s, v) in sums[k].iter_mut().zip(row) {
            *s += v;
        }
    }
    let means = [0, 1].map(|k| {
        sums[k]
            .iter()
            .map(|s| s / count[k] as f64)
            .collect::<Vec<_>>()
    });
    Ok(ClassSummary { count, means })
}

/// Scatter matrix Σ (x − μ_k)(x − μ_k)ᵀ over the given classes.
fn scatter(d: &DesignMatrix, means: &[Vec<f64>; 2], classes: &[usize]) -> Vec<Vec<f64>> {
    let p = d.p();
    let mut s = vec![vec![0.0; p]; p];
    for (row, &l) in d.rows.iter().zip(&d.labels) {
        let k = l as usize;
        if !classes.contains(&k) {
            continue;
        }
        let dev: Vec<f64> = row.iter().zip(&means[k]).map(|(x, m)| x - m).collect();
        for i in 0..p {
            for j in 0..=i {
                s[i][j] += dev[i] * dev[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            s[j][i] = s[i][j];
        }
    }
    s
}

fn scaled(mut m: Vec<Vec<f64>>, by: f64) -> Vec<Vec<f64>> {
    m.iter_mut().flatten().for_each(|v| *v /= by);
    m
}

fn priors(count: [usize; 2]) -> [f64; 2] {
    let n = (count[0] + count[1]) as f64;
    [count[0] as f64 / n, count[1] as f64 / n]
}

/// Linear discriminant analysis with a pooled within-class covariance.
pub fn fit_lda(d: &DesignMatrix) -> Result<GaussianClassParams> {
    fit_lda_with(d, DEFAULT_RIDGE_SCALE)
}

pub fn fit_lda_with(d: &DesignMatrix, ridge_scale: f64) -> Result<GaussianClassParams> {
    if d.n() < d.p() {
        return Err(Error::DegenerateCovariance(format!(
            "{} rows cannot support a pooled covariance over {} features",
            d.n(),
            d.p()
        )));
    }
    let s = summarize(d)?;
    let dof = (d.n() as f64 - 2.0).max(1.0);
    let pooled = scaled(scatter(d, &s.means, &[0, 1]), dof);
    Ok(GaussianClassParams {
        priors: priors(s.count),
        means: s.means,
        covariance: Covariance::Shared(FactoredCovariance::with_ridge(pooled, ridge_scale)?),
    })
}

/// Quadratic discriminant analysis with per-class covariances.
pub fn fit_qda(d: &DesignMatrix) -> Result<GaussianClassParams> {
    fit_qda_with(d, DEFAULT_RIDGE_SCALE)
}

pub fn fit_qda_with(d: &DesignMatrix, ridge_scale: f64) -> Result<GaussianClassParams> {
    let s = summarize(d)?;
    if let Some(k) = (0..2).find(|&k| s.count[k] < 2) {
        let class = if k == 1 { "fraud" } else { "non-fraud" };
        return Err(Error::DegenerateCovariance(format!(
            "{class} class has {} member(s); a covariance needs at least 2",
            s.count[k]
        )));
    }
    let covs = [0, 1].map(|k| {
        FactoredCovariance::with_ridge(
            scaled(scatter(d, &s.means, &[k]), s.count[k] as f64 - 1.0),
            ridge_scale,
        )
    });
    let [c0, c1] = covs;
    Ok(GaussianClassParams {
        priors: priors(s.count),
        means: s.means,
        covariance: Covariance::PerClass([c0?, c1?]),
    })
}
