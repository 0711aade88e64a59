//! Financial-statement ingestion.
//!
//! Statements arrive as UTF-8 CSV with a fixed header. Each data row is either
//! accepted as a [`RawStatement`] or rejected with a [`Rejection`] carrying the
//! line number and reason; a malformed row never aborts the parse.

use std::fmt;
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact header expected on statement CSV files.
pub const STATEMENT_HEADER: [&str; 20] = [
    "company_id",
    "fiscal_year",
    "sic_code",
    "fraud_label",
    "total_assets",
    "total_liabilities",
    "total_equity",
    "long_term_debt",
    "net_income",
    "retained_earnings",
    "ebit",
    "current_assets",
    "current_liabilities",
    "cash",
    "cash_flow_ops",
    "receivables",
    "inventory",
    "cogs",
    "payables",
    "sales",
];

/// The eight SIC industry groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Industry {
    Agriculture,
    MiningConstruction,
    Manufacturing,
    Transportation,
    Trade,
    Finance,
    Services,
    PublicAdministration,
}

impl Industry {
    pub const ALL: [Industry; 8] = [
        Industry::Agriculture,
        Industry::MiningConstruction,
        Industry::Manufacturing,
        Industry::Transportation,
        Industry::Trade,
        Industry::Finance,
        Industry::Services,
        Industry::PublicAdministration,
    ];

    /// Inclusive SIC code range covered by the industry.
    pub fn sic_range(self) -> RangeInclusive<u32> {
        match self {
            Industry::Agriculture => 100..=999,
            Industry::MiningConstruction => 1000..=1799,
            Industry::Manufacturing => 2000..=3999,
            Industry::Transportation => 4000..=4999,
            Industry::Trade => 5000..=5999,
            Industry::Finance => 6000..=6799,
            Industry::Services => 7000..=8999,
            Industry::PublicAdministration => 9100..=9729,
        }
    }

    /// Machine-friendly identifier used in CSV files and directory names.
    pub fn slug(self) -> &'static str {
        match self {
            Industry::Agriculture => "agriculture",
            Industry::MiningConstruction => "mining_construction",
            Industry::Manufacturing => "manufacturing",
            Industry::Transportation => "transportation",
            Industry::Trade => "trade",
            Industry::Finance => "finance",
            Industry::Services => "services",
            Industry::PublicAdministration => "public_administration",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Industry::Agriculture => "Agriculture, Forestry and Fishing",
            Industry::MiningConstruction => "Mining and Construction",
            Industry::Manufacturing => "Manufacturing",
            Industry::Transportation => {
                "Transportation, Communications, Electric, Gas and Sanitary Service"
            }
            Industry::Trade => "Wholesale Trade and Retail Trade",
            Industry::Finance => "Finance, Insurance and Real Estate",
            Industry::Services => "Services",
            Industry::PublicAdministration => "Public Administration",
        }
    }

    /// Position in [`Industry::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Industry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Industry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let needle = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Industry::ALL
            .into_iter()
            .find(|i| i.slug() == needle)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown industry `{s}`")))
    }
}

/// Maps a SIC code onto its industry group; codes in the gaps between groups
/// (e.g. 1800–1999, 9000–9099) and outside [100, 9729] are unmapped.
pub fn map_sic_to_industry(sic_code: i64) -> Option<Industry> {
    let code = u32::try_from(sic_code).ok()?;
    Industry::ALL
        .into_iter()
        .find(|i| i.sic_range().contains(&code))
}

/// Monetary line items of a statement, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineItem {
    TotalAssets,
    TotalLiabilities,
    TotalEquity,
    LongTermDebt,
    NetIncome,
    RetainedEarnings,
    Ebit,
    CurrentAssets,
    CurrentLiabilities,
    Cash,
    CashFlowOps,
    Receivables,
    Inventory,
    Cogs,
    Payables,
    Sales,
}

impl LineItem {
    pub const COUNT: usize = 16;

    pub const ALL: [LineItem; LineItem::COUNT] = [
        LineItem::TotalAssets,
        LineItem::TotalLiabilities,
        LineItem::TotalEquity,
        LineItem::LongTermDebt,
        LineItem::NetIncome,
        LineItem::RetainedEarnings,
        LineItem::Ebit,
        LineItem::CurrentAssets,
        LineItem::CurrentLiabilities,
        LineItem::Cash,
        LineItem::CashFlowOps,
        LineItem::Receivables,
        LineItem::Inventory,
        LineItem::Cogs,
        LineItem::Payables,
        LineItem::Sales,
    ];

    pub fn column(self) -> &'static str {
        STATEMENT_HEADER[4 + self as usize]
    }
}

/// One company-year of financial statement line items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawStatement {
    pub company_id: String,
    pub fiscal_year: i32,
    pub sic_code: u32,
    pub fraud: bool,
    /// `None` marks a blank (missing) cell; zero is a real value.
    pub items: [Option<f64>; LineItem::COUNT],
}

impl RawStatement {
    pub fn item(&self, item: LineItem) -> Option<f64> {
        self.items[item as usize]
    }

    pub fn set_item(&mut self, item: LineItem, value: Option<f64>) {
        self.items[item as usize] = value;
    }

    /// Industry implied by the SIC code. Accepted statements always map.
    pub fn industry(&self) -> Option<Industry> {
        map_sic_to_industry(i64::from(self.sic_code))
    }
}

/// Inclusive range of accepted fiscal years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for StudyWindow {
    fn default() -> Self {
        StudyWindow {
            first_year: 1990,
            last_year: 2012,
        }
    }
}

impl StudyWindow {
    pub fn contains(&self, year: i32) -> bool {
        (self.first_year..=self.last_year).contains(&year)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    FieldCount { expected: usize, found: usize },
    EmptyCompanyId,
    BadInteger { column: String, value: String },
    YearOutsideWindow { year: i32 },
    UnmappedSic { sic_code: i64 },
    BadLabel { value: String },
    BadAmount { column: String, value: String },
    Unreadable { message: String },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::FieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            RejectReason::EmptyCompanyId => f.write_str("empty company_id"),
            RejectReason::BadInteger { column, value } => {
                write!(f, "{column}: `{value}` is not an integer")
            }
            RejectReason::YearOutsideWindow { year } => {
                write!(f, "fiscal_year {year} outside study window")
            }
            RejectReason::UnmappedSic { sic_code } => write!(f, "unmapped SIC {sic_code}"),
            RejectReason::BadLabel { value } => {
                write!(f, "fraud_label `{value}` is not 0 or 1")
            }
            RejectReason::BadAmount { column, value } => {
                write!(f, "{column}: `{value}` is not a finite number")
            }
            RejectReason::Unreadable { message } => write!(f, "unreadable row: {message}"),
        }
    }
}

/// Diagnostic for a rejected data row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the source (the header is line 1).
    pub line: u64,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub statements: Vec<RawStatement>,
    pub rejected: Vec<Rejection>,
}

impl ParseOutcome {
    pub fn data_rows(&self) -> usize {
        self.statements.len() + self.rejected.len()
    }
}

/// Parses statements from `source` using the default 1990–2012 study window.
pub fn parse_statements<R: Read>(source: R) -> Result<ParseOutcome> {
    parse_statements_in(source, StudyWindow::default())
}

pub fn parse_statements_in<R: Read>(source: R, window: StudyWindow) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(source);

    let header = reader.headers()?.clone();
    if header.iter().ne(STATEMENT_HEADER.iter().copied()) {
        return Err(Error::Header {
            expected: STATEMENT_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut out = ParseOutcome::default();
    let mut record = csv::StringRecord::new();
    let mut line = 1u64;
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                line = record.position().map_or(line + 1, |p| p.line());
                match parse_row(&record, window) {
                    Ok(s) => out.statements.push(s),
                    Err(reason) => out.rejected.push(Rejection { line, reason }),
                }
            }
            // Invalid UTF-8 inside one row is a per-row problem; anything
            // else (e.g. the underlying reader failing) is fatal.
            Err(e) => match e.kind() {
                csv::ErrorKind::Utf8 { pos, .. } => {
                    line = pos.as_ref().map_or(line + 1, |p| p.line());
                    out.rejected.push(Rejection {
                        line,
                        reason: RejectReason::Unreadable {
                            message: e.to_string(),
                        },
                    });
                }
                _ => return Err(e.into()),
            },
        }
    }
    Ok(out)
}

fn parse_row(
    record: &csv::StringRecord,
    window: StudyWindow,
) -> std::result::Result<RawStatement, RejectReason> {
    if record.len() != STATEMENT_HEADER.len() {
        return Err(RejectReason::FieldCount {
            expected: STATEMENT_HEADER.len(),
            found: record.len(),
        });
    }
    let company_id = record[0].trim();
    if company_id.is_empty() {
        return Err(RejectReason::EmptyCompanyId);
    }
    let fiscal_year: i32 = parse_int(&record[1], "fiscal_year")?;
    if !window.contains(fiscal_year) {
        return Err(RejectReason::YearOutsideWindow { year: fiscal_year });
    }
    let sic: i64 = parse_int(&record[2], "sic_code")?;
    if map_sic_to_industry(sic).is_none() {
        return Err(RejectReason::UnmappedSic { sic_code: sic });
    }
    let fraud = match &record[3] {
        "0" => false,
        "1" => true,
        other => {
            return Err(RejectReason::BadLabel {
                value: other.to_string(),
            })
        }
    };

    let mut items = [None; LineItem::COUNT];
    for (slot, item) in items.iter_mut().zip(LineItem::ALL) {
        let raw = record[4 + item as usize].trim();
        if raw.is_empty() {
            continue;
        }
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => *slot = Some(v),
            _ => {
                return Err(RejectReason::BadAmount {
                    column: item.column().to_string(),
                    value: raw.to_string(),
                })
            }
        }
    }

    Ok(RawStatement {
        company_id: company_id.to_string(),
        fiscal_year,
        sic_code: sic as u32,
        fraud,
        items,
    })
}

fn parse_int<T: FromStr>(raw: &str, column: &str) -> std::result::Result<T, RejectReason> {
    raw.trim().parse().map_err(|_| RejectReason::BadInteger {
        column: column.to_string(),
        value: raw.to_string(),
    })
}

/// Writes statements in the ingest CSV schema. Amounts use Rust's shortest
/// round-trip float formatting, so re-parsing reproduces identical values.
pub fn write_statements<W: Write>(statements: &[RawStatement], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(STATEMENT_HEADER)?;
    let mut row: Vec<String> = Vec::with_capacity(STATEMENT_HEADER.len());
    for s in statements {
        row.clear();
        row.push(s.company_id.clone());
        row.push(s.fiscal_year.to_string());
        row.push(s.sic_code.to_string());
        row.push(if s.fraud { "1" } else { "0" }.to_string());
        row.extend(
            s.items
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rejection diagnostics as `line,reason`.
pub fn write_rejections<W: Write>(rejected: &[Rejection], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["line", "reason"])?;
    for r in rejected {
        w.write_record([r.line.to_string(), r.reason.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        STATEMENT_HEADER.join(",")
    }

    fn full_row(id: &str, year: i32, sic: i64, label: &str) -> String {
        format!("{id},{year},{sic},{label},200,100,100,40,10,30,15,80,40,12,9,20,25,120,14,300")
    }

    #[test]
    fn manufacturing_row_is_accepted() {
        let csv = format!("{}\n{}\n", header(), full_row("ACME", 2001, 2834, "1"));
        let out = parse_statements(csv.as_bytes()).unwrap();
        assert_eq!(out.rejected, vec![]);
        assert_eq!(out.statements.len(), 1);
        let s = &out.statements[0];
        assert_eq!(s.industry(), Some(Industry::Manufacturing));
        assert!(s.fraud);
        assert_eq!(s.item(LineItem::Sales), Some(300.0));
    }

    #[test]
    fn header_only_file_is_empty() {
        let csv = format!("{}\n", header());
        let out = parse_statements(csv.as_bytes()).unwrap();
        assert!(out.statements.is_empty());
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn unmapped_sic_is_rejected_with_line_number() {
        let csv = format!(
            "{}\n{}\n{}\n",
            header(),
            full_row("A", 2001, 2834, "0"),
            full_row("B", 2001, 9900, "0")
        );
        let out = parse_statements(csv.as_bytes()).unwrap();
        assert_eq!(out.statements.len(), 1);
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].line, 3);
        assert_eq!(
            out.rejected[0].reason,
            RejectReason::UnmappedSic { sic_code: 9900 }
        );
        assert_eq!(out.rejected[0].reason.to_string(), "unmapped SIC 9900");
    }

    #[test]
    fn sic_boundaries() {
        assert_eq!(map_sic_to_industry(6021), Some(Industry::Finance));
        assert_eq!(map_sic_to_industry(999), Some(Industry::Agriculture));
        assert_eq!(
            map_sic_to_industry(1000),
            Some(Industry::MiningConstruction)
        );
        assert_eq!(map_sic_to_industry(9000), None);
        assert_eq!(map_sic_to_industry(1850), None);
        assert_eq!(map_sic_to_industry(99), None);
        assert_eq!(
            map_sic_to_industry(9729),
            Some(Industry::PublicAdministration)
        );
        assert_eq!(map_sic_to_industry(9730), None);
        assert_eq!(map_sic_to_industry(-5), None);
    }

    #[test]
    fn sic_ranges_are_disjoint_over_full_span() {
        for s in 0..=10_000u32 {
            let hits = Industry::ALL
                .iter()
                .filter(|i| i.sic_range().contains(&s))
                .count();
            assert!(hits <= 1, "SIC {s} maps to {hits} industries");
        }
        for i in Industry::ALL {
            assert!(!i.sic_range().is_empty());
        }
    }

    #[test]
    fn blank_cells_are_missing_not_zero() {
        let csv = format!(
            "{}\nX,1995,5200,0,200,,100,0,10,30,15,80,40,12,9,20,25,120,14,300\n",
            header()
        );
        let out = parse_statements(csv.as_bytes()).unwrap();
        let s = &out.statements[0];
        assert_eq!(s.item(LineItem::TotalLiabilities), None);
        assert_eq!(s.item(LineItem::LongTermDebt), Some(0.0));
    }

    #[test]
    fn malformed_rows_become_diagnostics() {
        let rows = [
            full_row("A", 1989, 2834, "0"),
            full_row("B", 2001, 2834, "2"),
            full_row("", 2001, 2834, "0"),
            "C,2001,2834,0,1,2".to_string(),
            full_row("D", 2001, 2834, "1").replace(",300", ",abc"),
            full_row("E", 2001, 2834, "1").replace(",300", ",inf"),
            full_row("F", 2001, 2834, "0").replace("2001", "20x1"),
        ];
        let csv = format!("{}\n{}\n", header(), rows.join("\n"));
        let out = parse_statements(csv.as_bytes()).unwrap();
        assert_eq!(out.statements.len(), 0);
        assert_eq!(out.rejected.len(), rows.len());
        assert_eq!(out.data_rows(), rows.len());
        assert!(matches!(
            out.rejected[0].reason,
            RejectReason::YearOutsideWindow { year: 1989 }
        ));
        assert!(matches!(
            out.rejected[1].reason,
            RejectReason::BadLabel { .. }
        ));
        assert!(matches!(
            out.rejected[2].reason,
            RejectReason::EmptyCompanyId
        ));
        assert!(matches!(
            out.rejected[3].reason,
            RejectReason::FieldCount { found: 6, .. }
        ));
        assert!(matches!(
            out.rejected[4].reason,
            RejectReason::BadAmount { .. }
        ));
        assert!(matches!(
            out.rejected[5].reason,
            RejectReason::BadAmount { .. }
        ));
        assert!(matches!(
            out.rejected[6].reason,
            RejectReason::BadInteger { .. }
        ));
    }

    #[test]
    fn custom_study_window() {
        let csv = format!("{}\n{}\n", header(), full_row("A", 1989, 2834, "0"));
        let window = StudyWindow {
            first_year: 1980,
            last_year: 2020,
        };
        let out = parse_statements_in(csv.as_bytes(), window).unwrap();
        assert_eq!(out.statements.len(), 1);
    }

    #[test]
    fn wrong_header_is_fatal() {
        let csv = "a,b,c\n1,2,3\n";
        assert!(matches!(
            parse_statements(csv.as_bytes()),
            Err(Error::Header { .. })
        ));
    }

    #[test]
    fn industry_parses_from_slug_and_display() {
        for i in Industry::ALL {
            assert_eq!(i.slug().parse::<Industry>().unwrap(), i);
        }
        assert_eq!(
            "Public-Administration".parse::<Industry>().unwrap(),
            Industry::PublicAdministration
        );
        assert!("retail".parse::<Industry>().is_err());
    }
}
