//! Matched fraud/control sampling and stratified k-fold assignment.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Industry;
use crate::ratios::Observation;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedSample {
    /// (fraud, control) pairs sharing industry and fiscal year.
    pub pairs: Vec<(Observation, Observation)>,
    /// Fraud observations whose stratum ran out of controls.
    pub unmatched: Vec<Observation>,
    pub rng_seed: u64,
}

impl MatchedSample {
    /// Flattens the sample into a modelling set: fraud then control for each
    /// pair, optionally followed by the unmatched fraud cases.
    pub fn observations(&self, keep_unmatched: bool) -> Vec<Observation> {
        let mut out = Vec::with_capacity(2 * self.pairs.len() + self.unmatched.len());
        for (f, c) in &self.pairs {
            out.push(f.clone());
            out.push(c.clone());
        }
        if keep_unmatched {
            out.extend(self.unmatched.iter().cloned());
        }
        out
    }
}

/// Pairs each fraud observation with a control drawn uniformly without
/// replacement from the pool members of the same (industry, fiscal year).
///
/// Candidates are put in canonical order (by company id) before the seeded
/// shuffle, so the outcome does not depend on the order of `pool`.
pub fn match_controls(
    fraud: &[Observation],
    pool: &[Observation],
    seed: u64,
) -> Result<MatchedSample> {
    if let Some(o) = fraud.iter().find(|o| !o.fraud) {
        return Err(Error::InvalidParameter(format!(
            "fraud list contains a control observation ({} {})",
            o.company_id, o.fiscal_year
        )));
    }
    if let Some(o) = pool.iter().find(|o| o.fraud) {
        return Err(Error::InvalidParameter(format!(
            "control pool contains a fraud observation ({} {})",
            o.company_id, o.fiscal_year
        )));
    }

    let mut strata: BTreeMap<(Industry, i32), Vec<&Observation>> = BTreeMap::new();
    for o in pool {
        strata
            .entry((o.industry, o.fiscal_year))
            .or_default()
            .push(o);
    }
    for ((industry, year), members) in strata.iter_mut() {
        members.sort_by(|a, b| a.company_id.cmp(&b.company_id));
        let mut rng = rng_for(seed, &format!("match/{industry}/{year}"));
        members.shuffle(&mut rng);
        // draw from the back
        members.reverse();
    }

    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for f in fraud {
        match strata
            .get_mut(&(f.industry, f.fiscal_year))
            .and_then(Vec::pop)
        {
            Some(c) => pairs.push((f.clone(), c.clone())),
            None => unmatched.push(f.clone()),
        }
    }
    Ok(MatchedSample {
        pairs,
        unmatched,
        rng_seed: seed,
    })
}

/// Splits `obs` into fraud and non-fraud and matches within each.
pub fn match_dataset(obs: &[Observation], seed: u64) -> Result<MatchedSample> {
    let (fraud, pool): (Vec<Observation>, Vec<Observation>) =
        obs.iter().cloned().partition(|o| o.fraud);
    match_controls(&fraud, &pool, seed)
}

/// Fold index per observation (by position in the input slice).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    /// (fraud, non-fraud) counts per fold.
    pub fn class_counts(&self, obs: &[Observation]) -> Vec<(usize, usize)> {
        let mut counts = vec![(0, 0); self.k];
        for (o, &f) in obs.iter().zip(&self.fold_of) {
            if o.fraud {
                counts[f].0 += 1;
            } else {
                counts[f].1 += 1;
            }
        }
        counts
    }
}

/// Shuffles each class with the seed and deals it round-robin into `k`
/// folds, both classes starting at fold 0.
pub fn stratified_folds(obs: &[Observation], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "k must be at least 2, got {k}"
        )));
    }
    let mut fraud: Vec<usize> = (0..obs.len()).filter(|&i| obs[i].fraud).collect();
    let mut other: Vec<usize> = (0..obs.len()).filter(|&i| !obs[i].fraud).collect();
    if fraud.len() < k {
        return Err(Error::ClassTooSmall {
            class: "fraud",
            count: fraud.len(),
            k,
        });
    }
    if other.len() < k {
        return Err(Error::ClassTooSmall {
            class: "non-fraud",
            count: other.len(),
            k,
        });
    }
    fraud.shuffle(&mut rng_for(seed, "folds/fraud"));
    other.shuffle(&mut rng_for(seed, "folds/nonfraud"));

    let mut fold_of = vec![0; obs.len()];
    for class in [&fraud, &other] {
        for (pos, &i) in class.iter().enumerate() {
            fold_of[i] = pos % k;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

/// Writes `company_id,fiscal_year,fold`.
pub fn write_folds_csv<W: Write>(
    obs: &[Observation],
    folds: &FoldAssignment,
    sink: W,
) -> Result<()> {
    if obs.len() != folds.fold_of.len() {
        return Err(Error::LengthMismatch {
            left: obs.len(),
            right: folds.fold_of.len(),
        });
    }
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["company_id", "fiscal_year", "fold"])?;
    for (o, f) in obs.iter().zip(&folds.fold_of) {
        w.write_record([
            o.company_id.clone(),
            o.fiscal_year.to_string(),
            f.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
