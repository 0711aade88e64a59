//! The twenty financial ratios and the modelling unit, [`Observation`].

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Industry, LineItem, RawStatement};

/// Financial ratios, in canonical table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Ratio {
    Tlta,
    Tlte,
    Ltdta,
    Nita,
    Reta,
    Ebitta,
    Wcta,
    Cata,
    Cacl,
    Chni,
    Cffoni,
    Rvsa,
    Rvta,
    Ivsa,
    Ivta,
    Ivca,
    Ivcogs,
    Pycogs,
    Sata,
    Sate,
}

/// Numerator of a ratio: a single line item, or working capital.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Numerator {
    Item(LineItem),
    WorkingCapital,
}

impl Ratio {
    pub const COUNT: usize = 20;

    pub const ALL: [Ratio; Ratio::COUNT] = [
        Ratio::Tlta,
        Ratio::Tlte,
        Ratio::Ltdta,
        Ratio::Nita,
        Ratio::Reta,
        Ratio::Ebitta,
        Ratio::Wcta,
        Ratio::Cata,
        Ratio::Cacl,
        Ratio::Chni,
        Ratio::Cffoni,
        Ratio::Rvsa,
        Ratio::Rvta,
        Ratio::Ivsa,
        Ratio::Ivta,
        Ratio::Ivca,
        Ratio::Ivcogs,
        Ratio::Pycogs,
        Ratio::Sata,
        Ratio::Sate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ratio::Tlta => "TLTA",
            Ratio::Tlte => "TLTE",
            Ratio::Ltdta => "LTDTA",
            Ratio::Nita => "NITA",
            Ratio::Reta => "RETA",
            Ratio::Ebitta => "EBITTA",
            Ratio::Wcta => "WCTA",
            Ratio::Cata => "CATA",
            Ratio::Cacl => "CACL",
            Ratio::Chni => "CHNI",
            Ratio::Cffoni => "CFFONI",
            Ratio::Rvsa => "RVSA",
            Ratio::Rvta => "RVTA",
            Ratio::Ivsa => "IVSA",
            Ratio::Ivta => "IVTA",
            Ratio::Ivca => "IVCA",
            Ratio::Ivcogs => "IVCOGS",
            Ratio::Pycogs => "PYCOGS",
            Ratio::Sata => "SATA",
            Ratio::Sate => "SATE",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn numerator(self) -> Numerator {
        use LineItem::*;
        let item = match self {
            Ratio::Tlta | Ratio::Tlte => TotalLiabilities,
            Ratio::Ltdta => LongTermDebt,
            Ratio::Nita => NetIncome,
            Ratio::Reta => RetainedEarnings,
            Ratio::Ebitta => Ebit,
            Ratio::Wcta => return Numerator::WorkingCapital,
            Ratio::Cata | Ratio::Cacl => CurrentAssets,
            Ratio::Chni => Cash,
            Ratio::Cffoni => CashFlowOps,
            Ratio::Rvsa | Ratio::Rvta => Receivables,
            Ratio::Ivsa | Ratio::Ivta | Ratio::Ivca | Ratio::Ivcogs => Inventory,
            Ratio::Pycogs => Payables,
            Ratio::Sata | Ratio::Sate => Sales,
        };
        Numerator::Item(item)
    }

    pub fn denominator(self) -> LineItem {
        use LineItem::*;
        match self {
            Ratio::Tlta
            | Ratio::Ltdta
            | Ratio::Nita
            | Ratio::Reta
            | Ratio::Ebitta
            | Ratio::Wcta
            | Ratio::Cata
            | Ratio::Rvta
            | Ratio::Ivta
            | Ratio::Sata => TotalAssets,
            Ratio::Tlte | Ratio::Sate => TotalEquity,
            Ratio::Cacl => CurrentLiabilities,
            Ratio::Chni | Ratio::Cffoni => NetIncome,
            Ratio::Rvsa | Ratio::Ivsa => Sales,
            Ratio::Ivca => CurrentAssets,
            Ratio::Ivcogs | Ratio::Pycogs => Cogs,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Ratio::ALL
            .into_iter()
            .find(|r| r.name() == upper)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown ratio `{s}`")))
    }
}

/// Parses a comma-separated ratio list such as `RETA,CATA`.
pub fn parse_ratio_list(s: &str) -> Result<Vec<Ratio>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// One value-or-missing slot per ratio.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RatioVector(pub [Option<f64>; Ratio::COUNT]);

impl RatioVector {
    pub fn get(&self, ratio: Ratio) -> Option<f64> {
        self.0[ratio.index()]
    }

    pub fn set(&mut self, ratio: Ratio, value: Option<f64>) {
        self.0[ratio.index()] = value;
    }

    pub fn present(&self) -> usize {
        self.0.iter().filter(|v| v.is_some()).count()
    }
}

fn quotient(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    let (n, d) = (num?, den?);
    if d == 0.0 {
        return None;
    }
    let q = n / d;
    q.is_finite().then_some(q)
}

/// Computes all twenty ratios. A slot is missing when an operand is missing
/// or the denominator is zero.
pub fn compute_ratios(s: &RawStatement) -> RatioVector {
    let mut out = RatioVector::default();
    for r in Ratio::ALL {
        let num = match r.numerator() {
            Numerator::Item(item) => s.item(item),
            Numerator::WorkingCapital => s
                .item(LineItem::CurrentAssets)
                .zip(s.item(LineItem::CurrentLiabilities))
                .map(|(ca, cl)| ca - cl),
        };
        out.set(r, quotient(num, s.item(r.denominator())));
    }
    out
}

/// Ratio vector plus identity, industry and fraud label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub company_id: String,
    pub fiscal_year: i32,
    pub industry: Industry,
    pub ratios: RatioVector,
    pub fraud: bool,
}

impl Observation {
    /// Builds an observation from an accepted statement; `None` if the SIC
    /// code does not map to an industry.
    pub fn from_statement(s: &RawStatement) -> Option<Observation> {
        Some(Observation {
            company_id: s.company_id.clone(),
            fiscal_year: s.fiscal_year,
            industry: s.industry()?,
            ratios: compute_ratios(s),
            fraud: s.fraud,
        })
    }

    pub fn label(&self) -> u8 {
        u8::from(self.fraud)
    }
}

pub fn observations_from_statements(statements: &[RawStatement]) -> Vec<Observation> {
    statements
        .iter()
        .filter_map(Observation::from_statement)
        .collect()
}

fn observation_header() -> Vec<&'static str> {
    let mut h = vec!["company_id", "fiscal_year", "industry", "label"];
    h.extend(Ratio::ALL.iter().map(|r| r.name()));
    h
}

/// Writes observations as `company_id,fiscal_year,industry,label,TLTA,...,SATE`.
pub fn write_observations<W: Write>(obs: &[Observation], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(observation_header())?;
    for o in obs {
        let mut row = vec![
            o.company_id.clone(),
            o.fiscal_year.to_string(),
            o.industry.slug().to_string(),
            o.label().to_string(),
        ];
        row.extend(
            o.ratios
                .0
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads observations written by [`write_observations`]. Unlike statement
/// ingestion this is strict: any malformed row is an error.
pub fn read_observations<R: Read>(source: R) -> Result<Vec<Observation>> {
    let mut reader = csv::Reader::from_reader(source);
    let expected = observation_header();
    let header = reader.headers()?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Header {
            expected: expected.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |what: &str| Error::InvalidParameter(format!("observations line {line}: {what}"));
        if rec.len() != expected.len() {
            return Err(bad("wrong field count"));
        }
        let fiscal_year = rec[1].parse().map_err(|_| bad("bad fiscal_year"))?;
        let industry = rec[2].parse()?;
        let fraud = match &rec[3] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("label must be 0 or 1")),
        };
        let mut ratios = RatioVector::default();
        for r in Ratio::ALL {
            let cell = &rec[4 + r.index()];
            if !cell.is_empty() {
                let v: f64 = cell.parse().map_err(|_| bad("bad ratio value"))?;
                ratios.set(r, Some(v));
            }
        }
        out.push(Observation {
            company_id: rec[0].to_string(),
            fiscal_year,
            industry,
            ratios,
            fraud,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn statement(items: [f64; LineItem::COUNT]) -> RawStatement {
        RawStatement {
            company_id: "T".into(),
            fiscal_year: 2000,
            sic_code: 2834,
            fraud: false,
            items: items.map(Some),
        }
    }

    // TA TL TE LTD NI RE EBIT CA CL CASH CFO RV INV COGS PY SALES
    const BASE: [f64; 16] = [
        200.0, 100.0, 100.0, 40.0, 10.0, 30.0, 15.0, 80.0, 40.0, 12.0, 9.0, 20.0, 25.0, 120.0,
        14.0, 300.0,
    ];

    #[test]
    fn names_follow_table_order() {
        let names: Vec<_> = Ratio::ALL.iter().map(|r| r.name()).collect();
        assert_eq!(
            names.join(","),
            "TLTA,TLTE,LTDTA,NITA,RETA,EBITTA,WCTA,CATA,CACL,CHNI,CFFONI,RVSA,RVTA,IVSA,IVTA,IVCA,IVCOGS,PYCOGS,SATA,SATE"
        );
    }

    #[test]
    fn direct_quotients() {
        let v = compute_ratios(&statement(BASE));
        assert_eq!(v.get(Ratio::Tlta), Some(0.5));
        assert_eq!(v.get(Ratio::Wcta), Some(0.2));
        assert_eq!(v.get(Ratio::Cacl), Some(2.0));
        assert_eq!(v.get(Ratio::Ivcogs), Some(25.0 / 120.0));
        assert_eq!(v.get(Ratio::Sate), Some(3.0));
        assert_eq!(v.present(), 20);
    }

    #[test]
    fn equal_current_items_give_zero_working_capital() {
        let mut items = BASE;
        items[LineItem::CurrentLiabilities as usize] = items[LineItem::CurrentAssets as usize];
        let v = compute_ratios(&statement(items));
        assert_eq!(v.get(Ratio::Wcta), Some(0.0));
    }

    #[test]
    fn zero_equity_drops_only_equity_ratios() {
        let mut items = BASE;
        items[LineItem::TotalEquity as usize] = 0.0;
        let v = compute_ratios(&statement(items));
        // Frozen by hand: every slot except TLTE and SATE keeps its BASE value.
        let expected_present: Vec<Ratio> = Ratio::ALL
            .into_iter()
            .filter(|r| !matches!(r, Ratio::Tlte | Ratio::Sate))
            .collect();
        for r in Ratio::ALL {
            assert_eq!(v.get(r).is_some(), expected_present.contains(&r), "{r}");
        }
        let full = compute_ratios(&statement(BASE));
        for r in expected_present {
            assert_eq!(v.get(r), full.get(r));
        }
    }

    #[test]
    fn zero_net_income_drops_income_denominators() {
        let mut items = BASE;
        items[LineItem::NetIncome as usize] = 0.0;
        let v = compute_ratios(&statement(items));
        assert_eq!(v.get(Ratio::Chni), None);
        assert_eq!(v.get(Ratio::Cffoni), None);
        assert_eq!(v.get(Ratio::Nita), Some(0.0));
    }

    #[test]
    fn negative_equity_allowed() {
        let mut items = BASE;
        items[LineItem::TotalEquity as usize] = -50.0;
        let v = compute_ratios(&statement(items));
        assert_eq!(v.get(Ratio::Tlte), Some(-2.0));
    }

    #[test]
    fn missing_current_liabilities_drops_wc_and_cacl() {
        let mut s = statement(BASE);
        s.set_item(LineItem::CurrentLiabilities, None);
        let v = compute_ratios(&s);
        assert_eq!(v.get(Ratio::Wcta), None);
        assert_eq!(v.get(Ratio::Cacl), None);
        assert_eq!(v.present(), 18);
    }

    #[test]
    fn observation_csv_round_trip() {
        let mut s = statement(BASE);
        s.set_item(LineItem::Cogs, None);
        let obs = vec![Observation::from_statement(&s).unwrap()];
        let mut buf = Vec::new();
        write_observations(&obs, &mut buf).unwrap();
        let back = read_observations(buf.as_slice()).unwrap();
        assert_eq!(back, obs);
    }

    #[test]
    fn ratio_list_parsing() {
        assert_eq!(
            parse_ratio_list("reta, CATA").unwrap(),
            vec![Ratio::Reta, Ratio::Cata]
        );
        assert!(parse_ratio_list("RETA,XYZ").is_err());
    }
}
