use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratios::{Observation, Ratio};

/// Kendall tau-a: (concordant − discordant) / (n(n−1)/2). Pairs tied in
/// either variable count toward neither.
///
/// Uses Knight's O(n log n) method: sort by (x, y), then count the
/// inversions of the y sequence with a merge sort.
pub fn kendall_tau_a(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientPairs(n));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::NonFinite);
    }
    Ok(concordance_score(x, y) as f64 / total_pairs(n) as f64)
}

fn total_pairs(n: usize) -> i64 {
    (n as i64) * (n as i64 - 1) / 2
}

fn tied_pairs<T, F: Fn(&T, &T) -> bool>(sorted: &[T], eq: F) -> i64 {
    let mut total = 0i64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && eq(&sorted[i], &sorted[j]) {
            j += 1;
        }
        let t = (j - i) as i64;
        total += t * (t - 1) / 2;
        i = j;
    }
    total
}

/// n_c − n_d as an exact integer.
fn concordance_score(x: &[f64], y: &[f64]) -> i64 {
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let x_ties = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let joint_ties = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let discordant = count_inversions(&mut ys, &mut buf);
    let y_ties = tied_pairs(&ys, |a, b| a == b);

    total_pairs(n) - x_ties - y_ties + joint_ties - 2 * discordant
}

/// Sorts `v` ascending and returns the number of pairs i < j with v[i] > v[j].
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (left, right) = v.split_at_mut(mid);
        let (lb, rb) = buf.split_at_mut(mid);
        count_inversions(left, lb) + count_inversions(right, rb)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            inv += (mid - i) as i64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    inv
}

/// Symmetric matrix of pairwise-complete Kendall tau-a coefficients over the
/// twenty ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<Ratio>,
    /// Row-major, `None` where fewer than two complete cases exist.
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: Ratio, b: Ratio) -> Option<f64> {
        let ia = self.names.iter().position(|&r| r == a)?;
        let ib = self.names.iter().position(|&r| r == b)?;
        self.values[ia][ib]
    }

    /// Off-diagonal pairs sorted by descending |tau|, ties kept in table order.
    pub fn strongest_pairs(&self) -> Vec<(Ratio, Ratio, f64)> {
        let mut out = Vec::new();
        for (i, &a) in self.names.iter().enumerate() {
            for (j, &b) in self.names.iter().enumerate().skip(i + 1) {
                if let Some(t) = self.values[i][j] {
                    out.push((a, b, t));
                }
            }
        }
        out.sort_by(|p, q| q.2.abs().total_cmp(&p.2.abs()));
        out
    }
}

/// Complete cases for a pair of ratios.
pub(crate) fn complete_pairs(obs: &[&Observation], a: Ratio, b: Ratio) -> (Vec<f64>, Vec<f64>) {
    obs.iter()
        .filter_map(|o| Some((o.ratios.get(a)?, o.ratios.get(b)?)))
        .unzip()
}

/// Kendall tau-a over the pairwise-complete cases of two ratios.
pub(crate) fn pairwise_tau(obs: &[&Observation], a: Ratio, b: Ratio) -> Option<f64> {
    let (x, y) = complete_pairs(obs, a, b);
    kendall_tau_a(&x, &y).ok()
}

/// Correlation matrix over all twenty ratios. The diagonal is 1 for any
/// ratio with at least two present values.
pub fn correlation_matrix(obs: &[Observation]) -> CorrelationMatrix {
    let refs: Vec<&Observation> = obs.iter().collect();
    let k = Ratio::COUNT;
    let mut values = vec![vec![None; k]; k];
    for (i, &a) in Ratio::ALL.iter().enumerate() {
        let present = refs.iter().filter(|o| o.ratios.get(a).is_some()).count();
        values[i][i] = (present >= 2).then_some(1.0);
        for (j, &b) in Ratio::ALL.iter().enumerate().skip(i + 1) {
            let tau = pairwise_tau(&refs, a, b);
            values[i][j] = tau;
            values[j][i] = tau;
        }
    }
    CorrelationMatrix {
        names: Ratio::ALL.to_vec(),
        values,
    }
}

/// Writes the matrix with a header row and a leading name column; missing
/// entries are blank.
pub fn write_correlation_csv<W: Write>(m: &CorrelationMatrix, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec![String::new()];
    header.extend(m.names.iter().map(|r| r.name().to_string()));
    w.write_record(&header)?;
    for (name, row) in m.names.iter().zip(&m.values) {
        let mut rec = vec![name.name().to_string()];
        rec.extend(
            row.iter()
                .map(|v| v.map(|t| t.to_string()).unwrap_or_default()),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
