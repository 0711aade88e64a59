//! Red-flag rules read off fraud-leaning tree paths, and the markdown report.

use std::cmp::Ordering;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Industry;
use crate::metrics::{EvaluationReport, Metric};
use crate::models::TreeNode;
use crate::ratios::{Observation, Ratio};
use crate::stats::{FeatureSelection, Provenance};

pub const DEFAULT_MIN_FRAUD_FRACTION: f64 = 0.6;
pub const DEFAULT_MIN_SUPPORT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "<=")]
    LessEq,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Greater => ">",
            Comparator::LessEq => "≤",
        }
    }

    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Greater => value > threshold,
            Comparator::LessEq => value <= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub ratio: Ratio,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl Condition {
    pub fn holds(&self, value: f64) -> bool {
        self.comparator.holds(value, self.threshold)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.ratio,
            self.comparator.symbol(),
            format_sig(self.threshold, 3)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedFlagRule {
    pub industry: Industry,
    pub conditions: Vec<Condition>,
    pub fraud_fraction: f64,
    /// Training cases reaching the leaf.
    pub support: usize,
    /// Leaf position in left-first depth-first order.
    pub leaf: usize,
}

impl RedFlagRule {
    /// Evaluates the conjunction; a missing value fails its condition.
    pub fn matches_with<F: Fn(Ratio) -> Option<f64>>(&self, value: F) -> bool {
        self.conditions
            .iter()
            .all(|c| value(c.ratio).is_some_and(|v| c.holds(v)))
    }

    pub fn matches(&self, o: &Observation) -> bool {
        self.matches_with(|r| o.ratios.get(r))
    }

    pub fn describe(&self) -> String {
        self.conditions
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" AND ")
    }

    pub fn describe_exact(&self) -> String {
        self.conditions
            .iter()
            .map(|c| format!("{} {} {}", c.ratio, c.comparator.symbol(), c.threshold))
            .collect::<Vec<_>>()
            .join(" AND ")
    }
}

/// Rounds to `digits` significant digits for display: 0.011834 → "0.0118".
pub fn format_sig(x: f64, digits: i32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = digits - 1 - magnitude;
    if decimals >= 0 {
        format!("{x:.prec$}", prec = decimals as usize)
    } else {
        let unit = 10f64.powi(-decimals);
        format!("{:.0}", (x / unit).round() * unit)
    }
}

/// Intersects all conditions on the same ratio into at most one lower and
/// one upper bound, keeping ratios in order of first appearance.
fn merge(path: &[Condition]) -> Vec<Condition> {
    let mut order: Vec<Ratio> = Vec::new();
    for c in path {
        if !order.contains(&c.ratio) {
            order.push(c.ratio);
        }
    }
    let mut out = Vec::new();
    for r in order {
        let same = path.iter().filter(|c| c.ratio == r);
        let lower = same
            .clone()
            .filter(|c| c.comparator == Comparator::Greater)
            .map(|c| c.threshold)
            .reduce(f64::max);
        let upper = same
            .filter(|c| c.comparator == Comparator::LessEq)
            .map(|c| c.threshold)
            .reduce(f64::min);
        if let Some(t) = lower {
            out.push(Condition {
                ratio: r,
                comparator: Comparator::Greater,
                threshold: t,
            });
        }
        if let Some(t) = upper {
            out.push(Condition {
                ratio: r,
                comparator: Comparator::LessEq,
                threshold: t,
            });
        }
    }
    out
}

/// One rule per root-to-leaf path whose leaf reaches both emission floors,
/// most fraud-leaning first (then larger support, then path order).
///
/// `features[j]` names the ratio behind tree feature `j`; the tree must have
/// been grown on raw ratio values for the thresholds to be meaningful.
pub fn extract_rules(
    tree: &TreeNode,
    features: &[Ratio],
    industry: Industry,
    min_fraud_fraction: f64,
    min_support: usize,
) -> Result<Vec<RedFlagRule>> {
    let mut rules = Vec::new();
    let mut leaf = 0;
    walk(
        tree,
        features,
        &mut Vec::new(),
        &mut leaf,
        &mut |path, node, leaf| {
            let mass = node.class_mass();
            let total = mass[0] + mass[1];
            let fraction = if total > 0.0 { mass[1] / total } else { 0.0 };
            if !path.is_empty() && fraction >= min_fraud_fraction && node.n_samples() >= min_support
            {
                rules.push(RedFlagRule {
                    industry,
                    conditions: merge(path),
                    fraud_fraction: fraction,
                    support: node.n_samples(),
                    leaf,
                });
            }
        },
    )?;
    rules.sort_by(|a, b| {
        b.fraud_fraction
            .partial_cmp(&a.fraud_fraction)
            .unwrap_or(Ordering::Equal)
            .then(b.support.cmp(&a.support))
    });
    Ok(rules)
}

fn walk<F: FnMut(&[Condition], &TreeNode, usize)>(
    node: &TreeNode,
    features: &[Ratio],
    path: &mut Vec<Condition>,
    leaf: &mut usize,
    visit: &mut F,
) -> Result<()> {
    match node {
        TreeNode::Leaf { .. } => {
            visit(path, node, *leaf);
            *leaf += 1;
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            let ratio = *features.get(*feature).ok_or(Error::DimensionMismatch {
                expected: *feature + 1,
                got: features.len(),
            })?;
            for (child, comparator) in [(left, Comparator::LessEq), (right, Comparator::Greater)] {
                path.push(Condition {
                    ratio,
                    comparator,
                    threshold: *threshold,
                });
                walk(child, features, path, leaf, visit)?;
                path.pop();
            }
        }
    }
    Ok(())
}

fn p_value_text(p: f64) -> String {
    if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

fn metric_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3}"))
}

/// Markdown report with the sections Selection, Leaderboard and Red-Flags.
pub fn render_report(
    rules: &[RedFlagRule],
    selection: &FeatureSelection,
    evals: &[EvaluationReport],
) -> Result<String> {
    let industry = selection.industry;
    if let Some(r) = rules.iter().find(|r| r.industry != industry) {
        return Err(Error::IndustryMismatch(format!(
            "rule for {} in a {industry} report",
            r.industry
        )));
    }
    if let Some(e) = evals
        .iter()
        .find(|e| e.industry.is_some_and(|i| i != industry))
    {
        return Err(Error::IndustryMismatch(format!(
            "{} evaluation for {} in a {industry} report",
            e.model,
            e.industry.map_or("?", Industry::slug)
        )));
    }

    let mut out = String::new();
    let _ = writeln!(out, "# Red-flag report: {}\n", industry.title());

    let _ = writeln!(out, "## Selection\n");
    let how = match selection.provenance {
        Provenance::Computed => "computed from this sample",
        Provenance::PublishedPreset => "published preset",
    };
    let names: Vec<&str> = selection.selected.iter().map(|r| r.name()).collect();
    let _ = writeln!(out, "Selected ratios ({how}): {}\n", names.join(", "));
    if selection.fallback {
        let _ = writeln!(
            out,
            "No ratio reached significance; the smallest p-value ratio was kept.\n"
        );
    }
    if !selection.tests.is_empty() {
        let _ = writeln!(out, "| Ratio | Direction | U | z | p-value |");
        let _ = writeln!(out, "|---|---|---|---|---|");
        for r in &selection.selected {
            if let Some(m) = selection
                .tests
                .iter()
                .find(|t| t.ratio == *r)
                .and_then(|t| t.result)
            {
                let _ = writeln!(
                    out,
                    "| {r} | {} | {} | {:.3} | {} |",
                    m.direction,
                    m.u_statistic,
                    m.z_score,
                    p_value_text(m.p_value)
                );
            }
        }
        out.push('\n');
    }
    for p in &selection.pruned {
        let _ = writeln!(
            out,
            "- {} dropped as redundant with {} (tau = {:.3})",
            p.ratio, p.kept, p.tau
        );
    }
    if !selection.pruned.is_empty() {
        out.push('\n');
    }

    let _ = writeln!(out, "## Leaderboard\n");
    if evals.is_empty() {
        let _ = writeln!(out, "No models were evaluated.\n");
    } else {
        let mut ranked: Vec<&EvaluationReport> = evals.iter().collect();
        ranked.sort_by(|a, b| {
            let (x, y) = (a.mean.auc, b.mean.auc);
            match (x, y) {
                (Some(x), Some(y)) => y.total_cmp(&x),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            }
            .then(a.model.cmp(&b.model))
        });
        let _ = write!(out, "| Rank | Model |");
        for m in Metric::ALL {
            let _ = write!(out, " {} |", m.title());
        }
        let _ = writeln!(out, "\n|---|---|{}", "---|".repeat(Metric::ALL.len()));
        for (i, e) in ranked.iter().enumerate() {
            let _ = write!(out, "| {} | {} |", i + 1, e.model);
            for m in Metric::ALL {
                let _ = write!(out, " {} |", metric_cell(e.mean.get(m)));
            }
            out.push('\n');
        }
        out.push('\n');
    }

    let _ = writeln!(out, "## Red-Flags\n");
    if rules.is_empty() {
        let _ = writeln!(out, "None: no red-flags met the emission floor.");
    } else {
        for (i, r) in rules.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}. IF {} THEN fraud risk (fraud fraction {:.3}, support {})",
                i + 1,
                r.describe(),
                r.fraud_fraction,
                r.support
            );
            let _ = writeln!(out, "   exact thresholds: {}", r.describe_exact());
        }
    }
    Ok(out)
}
