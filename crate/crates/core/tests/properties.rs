mod common;

use common::*;
use forensic_core::ingest::Industry;
use forensic_core::metrics::{classification_metrics, confusion, roc_auc};
use forensic_core::models::{fit_cart, fit_lda, DesignMatrix, TreeNode};
use forensic_core::ratios::{Observation, Ratio, RatioVector};
use forensic_core::rules::extract_rules;
use forensic_core::sampling::{match_dataset, stratified_folds};
use forensic_core::seed::rng_for;
use forensic_core::stats::{kendall_tau_a, mann_whitney_with, midrank, PValueMethod};
use proptest::prelude::*;

fn small_values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..6).prop_map(f64::from), 1..=max_len)
}

fn obs(id: usize, industry: Industry, year: i32, fraud: bool, values: &[f64]) -> Observation {
    let mut r = RatioVector::default();
    for (ratio, v) in Ratio::ALL.iter().zip(values) {
        r.set(*ratio, Some(*v));
    }
    Observation {
        company_id: format!("c{id}"),
        fiscal_year: year,
        industry,
        ratios: r,
        fraud,
    }
}

proptest! {
    #[test]
    fn midranks_sum_to_triangular(v in prop::collection::vec(-5i32..5, 1..40)) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let r = midrank(&v).unwrap();
        let n = v.len() as f64;
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
        let oracle = doubled_midranks(&v);
        for (a, b) in r.iter().zip(oracle) {
            prop_assert_eq!(*a * 2.0, b as f64);
        }
    }

    #[test]
    fn exact_mann_whitney_matches_enumeration(a in small_values(6), b in small_values(6)) {
        let got = mann_whitney_with(&a, &b, PValueMethod::Exact).unwrap();
        prop_assert_eq!(got.p_value, brute_force_mw_p(&a, &b));
        prop_assert!(got.p_value > 0.0 && got.p_value <= 1.0);
    }

    #[test]
    fn mann_whitney_is_symmetric_in_groups(a in small_values(7), b in small_values(7)) {
        let ab = mann_whitney_with(&a, &b, PValueMethod::Exact).unwrap();
        let ba = mann_whitney_with(&b, &a, PValueMethod::Exact).unwrap();
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert_eq!(ab.direction.sign(), -ba.direction.sign());
    }

    #[test]
    fn tau_matches_pairs_and_is_symmetric(pairs in prop::collection::vec((0i32..5, -3i32..3), 2..40)) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let t = kendall_tau_a(&x, &y).unwrap();
        prop_assert_eq!(t, tau_a_pairs(&x, &y));
        prop_assert_eq!(t, kendall_tau_a(&y, &x).unwrap());
        prop_assert!((-1.0..=1.0).contains(&t));
    }

    #[test]
    fn auc_matches_pairwise(points in prop::collection::vec((any::<bool>(), 0u8..8), 2..120)) {
        let labels: Vec<bool> = points.iter().map(|p| p.0).collect();
        let scores: Vec<f64> = points.iter().map(|p| p.1 as f64).collect();
        match roc_auc(&labels, &scores) {
            Ok(a) => prop_assert!((a - pairwise_auc(&labels, &scores)).abs() <= 1e-12),
            Err(_) => prop_assert!(labels.iter().all(|&l| l) || labels.iter().all(|&l| !l)),
        }
    }

    #[test]
    fn metrics_lie_in_unit_interval(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..80)) {
        let labels: Vec<bool> = pairs.iter().map(|p| p.0).collect();
        let preds: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let cm = confusion(&labels, &preds).unwrap();
        prop_assert_eq!(cm.total() as usize, pairs.len());
        let m = classification_metrics(&cm);
        for metric in forensic_core::metrics::Metric::ALL {
            if let Some(v) = m.get(metric) {
                prop_assert!((0.0..=1.0).contains(&v), "{metric:?} = {v}");
            }
        }
    }

    #[test]
    fn folds_partition_and_stratify(n_fraud in 5usize..40, n_other in 5usize..40, k in 2usize..6, seed in any::<u64>()) {
        prop_assume!(n_fraud >= k && n_other >= k);
        let data: Vec<Observation> = (0..n_fraud + n_other)
            .map(|i| obs(i, Industry::Trade, 2000, i < n_fraud, &[i as f64]))
            .collect();
        let folds = stratified_folds(&data, k, seed).unwrap();
        let mut seen = vec![0usize; data.len()];
        for f in 0..k {
            for i in folds.test_indices(f) {
                seen[i] += 1;
            }
            let frauds = folds.test_indices(f).iter().filter(|&&i| data[i].fraud).count();
            prop_assert!(frauds == n_fraud / k || frauds == n_fraud / k + 1);
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn matched_pairs_share_stratum(years in prop::collection::vec((2000i32..2004, any::<bool>()), 2..60), seed in any::<u64>()) {
        let data: Vec<Observation> = years
            .iter()
            .enumerate()
            .map(|(i, &(y, f))| obs(i, Industry::Services, y, f, &[1.0]))
            .collect();
        let m = match_dataset(&data, seed).unwrap();
        let frauds = data.iter().filter(|o| o.fraud).count();
        prop_assert_eq!(m.pairs.len() + m.unmatched.len(), frauds);
        let mut controls = std::collections::BTreeSet::new();
        for (f, c) in &m.pairs {
            prop_assert!(f.fraud && !c.fraud);
            prop_assert_eq!(f.fiscal_year, c.fiscal_year);
            prop_assert!(controls.insert(c.company_id.clone()));
        }
    }

    #[test]
    fn rule_predicates_select_their_leaf(seed in 0u64..500) {
        let mut rng = rng_for(seed, "rules");
        let d = random_design(&mut rng, 60, 3, 0);
        let features = [Ratio::Reta, Ratio::Cata, Ratio::Pycogs];
        let tree = fit_cart(&d, 4, 2).unwrap();
        let rules = extract_rules(&tree.root, &features, Industry::Manufacturing, 0.0, 1).unwrap();
        let data: Vec<Observation> = d
            .rows
            .iter()
            .zip(&d.labels)
            .enumerate()
            .map(|(i, (row, &y))| obs(i, Industry::Manufacturing, 2001, y, &[]).with(&features, row))
            .collect();
        for rule in &rules {
            for (o, row) in data.iter().zip(&d.rows) {
                prop_assert_eq!(rule.matches(o), tree.root.leaf_index(row) == rule.leaf);
            }
        }
    }
}

trait WithValues {
    fn with(self, features: &[Ratio], row: &[f64]) -> Self;
}

impl WithValues for Observation {
    fn with(mut self, features: &[Ratio], row: &[f64]) -> Self {
        for (r, v) in features.iter().zip(row) {
            self.ratios.set(*r, Some(*v));
        }
        self
    }
}

#[test]
fn lda_matches_one_dimensional_closed_form() {
    let x0 = [0.1, 0.5, 0.9, 1.3, 0.4, 0.7];
    let x1 = [1.2, 1.9, 2.4, 1.6, 2.2];
    let rows: Vec<Vec<f64>> = x0.iter().chain(&x1).map(|&v| vec![v]).collect();
    let labels: Vec<bool> = (0..rows.len()).map(|i| i >= x0.len()).collect();
    let model = fit_lda(&DesignMatrix::unnamed(rows, labels).unwrap()).unwrap();

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m0, m1) = (mean(&x0), mean(&x1));
    let ss: f64 = x0.iter().map(|v| (v - m0).powi(2)).sum::<f64>()
        + x1.iter().map(|v| (v - m1).powi(2)).sum::<f64>();
    let var = ss / (x0.len() + x1.len() - 2) as f64;
    let (p0, p1): (f64, f64) = (6.0 / 11.0, 5.0 / 11.0);
    for x in [-1.0, 0.3, 1.1, 1.5, 3.0] {
        let logit = (m1 - m0) / var * x - (m1 * m1 - m0 * m0) / (2.0 * var) + (p1 / p0).ln();
        let want = 1.0 / (1.0 + (-logit).exp());
        let got = model.posteriors(&[x]).unwrap()[1];
        assert!((got - want).abs() < 1e-5, "x = {x}: {got} vs {want}");
    }
}

#[test]
fn cart_root_is_optimal_on_tied_data() {
    let mut rng = rng_for(17, "cart");
    for _ in 0..30 {
        let d = random_design(&mut rng, 30, 3, 3);
        let tree = fit_cart(&d, 3, 1).unwrap();
        if let (
            TreeNode::Split {
                feature, threshold, ..
            },
            Some(best),
        ) = (&tree.root, exhaustive_best_gini(&d))
        {
            let mut l = [0; 2];
            let mut r = [0; 2];
            for (row, &y) in d.rows.iter().zip(&d.labels) {
                if row[*feature] <= *threshold {
                    l[y as usize] += 1
                } else {
                    r[y as usize] += 1
                }
            }
            assert!(split_gini(l, r) <= best + 1e-12);
        }
    }
}
