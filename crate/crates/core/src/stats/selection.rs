use serde::{Deserialize, Serialize};

use super::kendall::pairwise_tau;
use super::mann_whitney::{mann_whitney, Direction, MannWhitneyResult};
use crate::error::{Error, Result};
use crate::ingest::Industry;
use crate::ratios::{Observation, Ratio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Computed,
    #[serde(rename = "table7_preset")]
    PublishedPreset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub alpha: f64,
    pub tau_cap: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            alpha: 0.05,
            tau_cap: 0.65,
        }
    }
}

/// Mann-Whitney outcome for one ratio; `None` when either class had no
/// present values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTest {
    pub ratio: Ratio,
    pub result: Option<MannWhitneyResult>,
}

impl RatioTest {
    pub fn p_value(&self) -> f64 {
        self.result.map_or(1.0, |r| r.p_value)
    }
}

/// A significant ratio removed for redundancy with `kept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedRatio {
    pub ratio: Ratio,
    pub kept: Ratio,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub industry: Industry,
    pub selected: Vec<Ratio>,
    pub provenance: Provenance,
    /// Per-ratio tests in table order (empty for presets).
    #[serde(default)]
    pub tests: Vec<RatioTest>,
    #[serde(default)]
    pub pruned: Vec<PrunedRatio>,
    /// Set when no ratio reached significance and the single smallest
    /// p-value ratio was kept so that the selection stays nonempty.
    #[serde(default)]
    pub fallback: bool,
}

/// Significance filter followed by greedy redundancy pruning.
///
/// Ratios with two-tailed p < alpha are kept. Then, while some kept pair has
/// |tau| > tau_cap, the most correlated pair loses its member with the larger
/// p-value (equal p-values: the later ratio in table order goes).
pub fn select_features(
    obs: &[Observation],
    industry: Industry,
    params: SelectionParams,
) -> Result<FeatureSelection> {
    if !(params.alpha > 0.0 && params.alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {}",
            params.alpha
        )));
    }
    let members: Vec<&Observation> = obs.iter().filter(|o| o.industry == industry).collect();
    let n_fraud = members.iter().filter(|o| o.fraud).count();
    if n_fraud == 0 || n_fraud == members.len() {
        return Err(Error::CannotTestSeparation(format!(
            "{industry}: {n_fraud} fraud and {} non-fraud observations",
            members.len() - n_fraud
        )));
    }

    let tests: Vec<RatioTest> = Ratio::ALL
        .iter()
        .map(|&ratio| {
            let (f, nf): (Vec<f64>, Vec<f64>) =
                members
                    .iter()
                    .fold((Vec::new(), Vec::new()), |(mut f, mut nf), o| {
                        if let Some(v) = o.ratios.get(ratio) {
                            if o.fraud {
                                f.push(v)
                            } else {
                                nf.push(v)
                            }
                        }
                        (f, nf)
                    });
            RatioTest {
                ratio,
                result: mann_whitney(&f, &nf).ok(),
            }
        })
        .collect();

    let mut kept: Vec<Ratio> = tests
        .iter()
        .filter(|t| t.result.is_some() && t.p_value() < params.alpha)
        .map(|t| t.ratio)
        .collect();

    let mut fallback = false;
    if kept.is_empty() {
        let best = tests
            .iter()
            .filter(|t| t.result.is_some())
            .min_by(|a, b| a.p_value().total_cmp(&b.p_value()))
            .ok_or_else(|| {
                Error::CannotTestSeparation(format!(
                    "{industry}: no ratio has values in both classes"
                ))
            })?;
        kept.push(best.ratio);
        fallback = true;
    }

    let p_of = |r: Ratio| tests[r.index()].p_value();
    let mut pruned = Vec::new();
    loop {
        let mut worst: Option<(Ratio, Ratio, f64)> = None;
        for (i, &a) in kept.iter().enumerate() {
            for &b in &kept[i + 1..] {
                if let Some(t) = pairwise_tau(&members, a, b) {
                    if t.abs() > params.tau_cap && worst.is_none_or(|w| t.abs() > w.2.abs()) {
                        worst = Some((a, b, t));
                    }
                }
            }
        }
        let Some((a, b, tau)) = worst else { break };
        // `kept` stays in table order, so `b` is the later ratio.
        let (drop, keep) = if p_of(a) > p_of(b) { (a, b) } else { (b, a) };
        kept.retain(|&r| r != drop);
        pruned.push(PrunedRatio {
            ratio: drop,
            kept: keep,
            tau,
        });
    }

    Ok(FeatureSelection {
        industry,
        selected: kept,
        provenance: Provenance::Computed,
        tests,
        pruned,
        fallback,
    })
}

/// Published per-industry ratio subsets, in published order.
pub fn published_preset(industry: Industry) -> FeatureSelection {
    use Ratio::*;
    let selected = match industry {
        Industry::Agriculture => vec![Reta, Cata, Ivsa, Pycogs],
        Industry::MiningConstruction => {
            vec![
                Tlta, Tlte, Ltdta, Reta, Cacl, Rvsa, Ivta, Ivcogs, Pycogs, Sata,
            ]
        }
        Industry::Manufacturing => vec![Tlta, Tlte, Reta, Cata, Cacl, Rvsa],
        Industry::Transportation => vec![Reta, Ivsa, Ivta, Sata, Pycogs],
        Industry::Trade => vec![Reta, Cata, Ivsa],
        Industry::Finance => vec![Tlta, Tlte, Ltdta, Reta, Cffoni, Ivcogs, Pycogs, Sata],
        Industry::Services => vec![Reta, Cacl, Ivsa, Ivcogs, Pycogs, Sata],
        Industry::PublicAdministration => vec![Ltdta, Reta, Cata, Cacl, Ivsa, Ivta, Ivcogs, Sata],
    };
    FeatureSelection {
        industry,
        selected,
        provenance: Provenance::PublishedPreset,
        tests: Vec::new(),
        pruned: Vec::new(),
        fallback: false,
    }
}

// Published significance signs: one row per ratio in table order, one column
// per industry in `Industry::ALL` order. '.' = not significant.
const PUBLISHED_DIRECTIONS: [&str; Ratio::COUNT] = [
    ".+-..+..", // TLTA
    ".++..+..", // TLTE
    ".+...+.+", // LTDTA
    "..-.....", // NITA
    ".+-+++++", // RETA
    "+++...++", // EBITTA
    "........", // WCTA
    "..-.+..-", // CATA
    "---...--", // CACL
    ".....-..", // CHNI
    "..-.....", // CFFONI
    ".--..--.", // RVSA
    ".+......", // RVTA
    "-..-...+", // IVSA
    ".+.-+.-+", // IVTA
    ".++-+.-+", // IVCA
    ".+...+-+", // IVCOGS
    "--.-.--.", // PYCOGS
    ".+.-.---", // SATA
    ".+......", // SATE
];

/// Published direction of association with fraud, if the ratio was
/// significant for the industry.
pub fn published_direction(industry: Industry, ratio: Ratio) -> Option<Direction> {
    match PUBLISHED_DIRECTIONS[ratio.index()].as_bytes()[industry.index()] {
        b'+' => Some(Direction::Positive),
        b'-' => Some(Direction::Negative),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratios::RatioVector;

    #[test]
    fn manufacturing_preset() {
        let s = published_preset(Industry::Manufacturing);
        let names: Vec<_> = s.selected.iter().map(|r| r.name()).collect();
        assert_eq!(names, ["TLTA", "TLTE", "RETA", "CATA", "CACL", "RVSA"]);
        assert_eq!(s.provenance, Provenance::PublishedPreset);
    }

    #[test]
    fn preset_sizes_match_published_counts() {
        let sizes: Vec<usize> = Industry::ALL
            .iter()
            .map(|&i| published_preset(i).selected.len())
            .collect();
        assert_eq!(sizes, vec![4, 10, 6, 5, 3, 8, 6, 8]);
        for i in Industry::ALL {
            let s = published_preset(i).selected;
            let mut d = s.clone();
            d.sort();
            d.dedup();
            assert_eq!(d.len(), s.len());
        }
    }

    #[test]
    fn published_direction_spot_checks() {
        assert_eq!(
            published_direction(Industry::MiningConstruction, Ratio::Tlta),
            Some(Direction::Positive)
        );
        assert_eq!(
            published_direction(Industry::Manufacturing, Ratio::Reta),
            Some(Direction::Negative)
        );
        assert_eq!(
            published_direction(Industry::PublicAdministration, Ratio::Ivsa),
            Some(Direction::Positive)
        );
        assert_eq!(
            published_direction(Industry::Finance, Ratio::Chni),
            Some(Direction::Negative)
        );
        assert!(Industry::ALL
            .iter()
            .all(|&i| published_direction(i, Ratio::Wcta).is_none()));
        for row in PUBLISHED_DIRECTIONS {
            assert_eq!(row.len(), 8);
        }
    }

    fn obs(fraud: bool, values: &[(Ratio, f64)]) -> Observation {
        let mut ratios = RatioVector::default();
        for &(r, v) in values {
            ratios.set(r, Some(v));
        }
        Observation {
            company_id: "c".into(),
            fiscal_year: 2000,
            industry: Industry::Trade,
            ratios,
            fraud,
        }
    }

    #[test]
    fn one_class_cannot_be_tested() {
        let data = vec![
            obs(true, &[(Ratio::Tlta, 1.0)]),
            obs(true, &[(Ratio::Tlta, 2.0)]),
        ];
        let e = select_features(&data, Industry::Trade, SelectionParams::default());
        assert!(matches!(e, Err(Error::CannotTestSeparation(_))));
        let e = select_features(&data, Industry::Finance, SelectionParams::default());
        assert!(matches!(e, Err(Error::CannotTestSeparation(_))));
    }

    #[test]
    fn perfectly_correlated_pair_keeps_one() {
        // TLTA and SATA both separate the classes perfectly and are
        // monotone in each other (|tau| = 1), RETA carries no signal.
        let mut data = Vec::new();
        for i in 0..20 {
            let fraud = i >= 10;
            let v = i as f64;
            data.push(obs(
                fraud,
                &[
                    (Ratio::Tlta, v),
                    (Ratio::Sata, 2.0 * v + 1.0),
                    (Ratio::Reta, (i % 2) as f64),
                ],
            ));
        }
        let s = select_features(&data, Industry::Trade, SelectionParams::default()).unwrap();
        assert_eq!(s.selected, vec![Ratio::Tlta]);
        assert_eq!(s.pruned.len(), 1);
        assert_eq!(s.pruned[0].ratio, Ratio::Sata);
        assert_eq!(s.pruned[0].tau, 1.0);
        assert!(!s.fallback);
    }

    #[test]
    fn nothing_significant_falls_back_to_smallest_p() {
        let data = vec![
            obs(true, &[(Ratio::Tlta, 1.0), (Ratio::Reta, 1.0)]),
            obs(true, &[(Ratio::Tlta, 3.0), (Ratio::Reta, 4.0)]),
            obs(false, &[(Ratio::Tlta, 2.0), (Ratio::Reta, 2.0)]),
            obs(false, &[(Ratio::Tlta, 4.0), (Ratio::Reta, 3.0)]),
        ];
        let s = select_features(&data, Industry::Trade, SelectionParams::default()).unwrap();
        assert!(s.fallback);
        assert_eq!(s.selected.len(), 1);
    }
}
