//! Synthetic labelled statements with a class-separation knob.
//!
//! Every line item is driven by a standard-normal latent pushed through a
//! log or logistic link, so amounts stay positive and ratio distributions
//! are skewed. For fraud rows the latent behind each informative ratio is
//! shifted by `separation` units, in the published direction for the
//! industry when there is one and upward otherwise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Industry, LineItem, RawStatement, StudyWindow};
use crate::models::{logit, sigmoid};
use crate::ratios::Ratio;
use crate::seed::rng_for;
use crate::stats::published_direction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub industry: Industry,
    pub separation: f64,
    pub informative_ratios: Vec<Ratio>,
    pub seed: u64,
    #[serde(default)]
    pub window: StudyWindow,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class < 1 {
            return Err(Error::InvalidParameter(
                "n_per_class must be at least 1".into(),
            ));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "separation must be nonnegative, got {}",
                self.separation
            )));
        }
        if self.separation > 0.0 && self.informative_ratios.is_empty() {
            return Err(Error::InvalidParameter(
                "a positive separation needs informative ratios".into(),
            ));
        }
        if self.window.first_year > self.window.last_year {
            return Err(Error::InvalidParameter("study window is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Latent {
    Size,
    Leverage,
    LongTermDebt,
    Ebit,
    NetIncome,
    Retained,
    CurrentAssets,
    CurrentLiabilities,
    Cash,
    CashFlow,
    Receivables,
    Inventory,
    Sales,
    Cogs,
    Payables,
}

const LATENTS: usize = 15;

/// The latent each ratio responds to most directly, and whether raising the
/// latent raises (+1) or lowers (−1) the ratio.
fn driver(r: Ratio) -> (Latent, f64) {
    use Latent::*;
    match r {
        Ratio::Tlta | Ratio::Tlte => (Leverage, 1.0),
        Ratio::Ltdta => (LongTermDebt, 1.0),
        Ratio::Nita => (NetIncome, 1.0),
        Ratio::Reta => (Retained, 1.0),
        Ratio::Ebitta => (Ebit, 1.0),
        Ratio::Wcta | Ratio::Cacl => (CurrentLiabilities, -1.0),
        Ratio::Cata => (CurrentAssets, 1.0),
        Ratio::Chni => (Cash, 1.0),
        Ratio::Cffoni => (CashFlow, 1.0),
        Ratio::Rvsa | Ratio::Rvta => (Receivables, 1.0),
        Ratio::Ivsa | Ratio::Ivta | Ratio::Ivca | Ratio::Ivcogs => (Inventory, 1.0),
        Ratio::Pycogs => (Payables, 1.0),
        Ratio::Sata | Ratio::Sate => (Sales, 1.0),
    }
}

/// Median total assets (millions) by industry.
fn base_assets(industry: Industry) -> f64 {
    match industry {
        Industry::Agriculture => 150.0,
        Industry::MiningConstruction => 800.0,
        Industry::Manufacturing => 1200.0,
        Industry::Transportation => 2000.0,
        Industry::Trade => 900.0,
        Industry::Finance => 5000.0,
        Industry::Services => 600.0,
        Industry::PublicAdministration => 300.0,
    }
}

/// Per-latent shift applied to fraud rows.
fn fraud_shift(cfg: &SynthConfig) -> [f64; LATENTS] {
    let mut shift = [0.0; LATENTS];
    for &r in &cfg.informative_ratios {
        let dir = published_direction(cfg.industry, r).map_or(1.0, |d| d.sign());
        let (latent, link) = driver(r);
        shift[latent as usize] += dir * link * cfg.separation;
    }
    shift
}

fn items_from_latents(industry: Industry, z: &[f64; LATENTS]) -> [Option<f64>; LineItem::COUNT] {
    use Latent::*;
    let g = |l: Latent| z[l as usize];
    let share = |p: f64, spread: f64, l: Latent| sigmoid(logit(p) + spread * g(l));
    let scale = |m: f64, spread: f64, l: Latent| (m.ln() + spread * g(l)).exp();

    let ta = base_assets(industry) * g(Size).exp();
    let tl = ta * share(0.55, 0.8, Leverage);
    let te = ta - tl;
    let ltd = tl * share(0.4, 0.8, LongTermDebt);
    let ebit = ta * scale(0.08, 0.5, Ebit);
    let ni = ebit * share(0.6, 0.6, NetIncome);
    let re = ta * scale(0.2, 0.8, Retained);
    let ca = ta * share(0.45, 0.6, CurrentAssets);
    let cl = ca * scale(0.7, 0.4, CurrentLiabilities);
    let cash = ca * share(0.2, 0.6, Cash);
    let cfo = ni * scale(1.0, 0.5, CashFlow);
    let rv = ca * share(0.3, 0.6, Receivables);
    let inv = ca * share(0.3, 0.6, Inventory);
    let sales = ta * scale(1.0, 0.5, Sales);
    let cogs = sales * share(0.65, 0.5, Cogs);
    let py = cogs * scale(0.12, 0.5, Payables);

    let mut items = [None; LineItem::COUNT];
    for (item, v) in [
        (LineItem::TotalAssets, ta),
        (LineItem::TotalLiabilities, tl),
        (LineItem::TotalEquity, te),
        (LineItem::LongTermDebt, ltd),
        (LineItem::NetIncome, ni),
        (LineItem::RetainedEarnings, re),
        (LineItem::Ebit, ebit),
        (LineItem::CurrentAssets, ca),
        (LineItem::CurrentLiabilities, cl),
        (LineItem::Cash, cash),
        (LineItem::CashFlowOps, cfo),
        (LineItem::Receivables, rv),
        (LineItem::Inventory, inv),
        (LineItem::Cogs, cogs),
        (LineItem::Payables, py),
        (LineItem::Sales, sales),
    ] {
        items[item as usize] = Some(v);
    }
    items
}

/// `n_per_class` fraud/control pairs; both members of a pair share the
/// fiscal year, so every fraud case has a same-stratum control.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<RawStatement>> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, &format!("synth/{}", cfg.industry));
    let shift = fraud_shift(cfg);
    let sic = cfg.industry.sic_range();
    let mut out = Vec::with_capacity(2 * cfg.n_per_class);
    for i in 0..cfg.n_per_class {
        let year = rng.random_range(cfg.window.first_year..=cfg.window.last_year);
        for fraud in [true, false] {
            let mut z = [0.0; LATENTS];
            for (zj, s) in z.iter_mut().zip(&shift) {
                let e: f64 = rng.sample(StandardNormal);
                *zj = e + if fraud { *s } else { 0.0 };
            }
            let tag = if fraud { 'F' } else { 'C' };
            out.push(RawStatement {
                company_id: format!("{}-{tag}{:05}", cfg.industry.slug(), i + 1),
                fiscal_year: year,
                sic_code: rng.random_range(sic.clone()),
                fraud,
                items: items_from_latents(cfg.industry, &z),
            });
        }
    }
    Ok(out)
}
