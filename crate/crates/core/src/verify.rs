//! Recomputation check of a processed workbook against its input snapshot.
//!
//! The verifier re-reads the input with its own table scan, folds rows in
//! reverse order into its own maps, derives anchors and memberships with its
//! own arithmetic and then compares every cell of the processed workbook.
//! Only row classification ([`crate::rules`]) and header aliases are shared
//! with the processing path. Layout strings (labels, headers) are taken from
//! [`crate::emit`] because they are part of the output contract.
//!
//! Every comparison yields one [`VerificationFinding`]. Non-empty cells that
//! no check accounts for are reported as failures too.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use calamine::{open_workbook, Data, Range, Reader, Xlsx};
use sha2::{Digest, Sha256};

use crate::banding::BandLabel;
use crate::emit::{
    report_year_headers, summary_layout, BAND_COUNT_HEADERS, FUZZY_HEADERS, METHODOLOGY_HEADING,
    METHODOLOGY_LINES, NO_ANCHORS_TEXT, REPORT_KEY_HEADERS, SHEET_FUZZY_BANDS,
    SHEET_PROCESSING_SUMMARY, SHEET_REPORT, SHEET_TREND_ANALYSIS,
};
use crate::error::{Error, Result};
use crate::ingest::{
    canonicalize_header, CellValue, LogicalField, RawRow, DEFAULT_SCAN_COLS, DEFAULT_SCAN_ROWS,
};
use crate::rules::{classify_row, DropReason, RowOutcome};

/// Membership cells are compared to this absolute tolerance.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-6;
/// Half a cent, the largest error two-decimal rounding can introduce.
pub const AMOUNT_TOLERANCE: f64 = 0.005;
const RELATIVE_EPS: f64 = 1e-9;
/// Weights closer than this are treated as a possible tie when predicting
/// the label.
const TIE_EPS: f64 = 1e-12;

const WORKBOOK_LOCATION: &str = "(workbook)";
const BLANK: &str = "(blank)";
const MISSING: &str = "(missing)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Pass,
    Fail,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
        })
    }
}

/// Sheet plus optional 0-based `(row, col)`; displays as `Sheet!B3`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location {
    pub sheet: String,
    pub cell: Option<(u32, u16)>,
}

impl Location {
    pub fn sheet(sheet: &str) -> Self {
        Location {
            sheet: sheet.to_string(),
            cell: None,
        }
    }

    pub fn cell(sheet: &str, row: u32, col: u16) -> Self {
        Location {
            sheet: sheet.to_string(),
            cell: Some((row, col)),
        }
    }
}

pub fn column_letters(col: u16) -> String {
    let mut n = u32::from(col) + 1;
    let mut out = Vec::new();
    while n > 0 {
        let rem = (n - 1) % 26;
        out.push(b'A' + rem as u8);
        n = (n - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cell {
            Some((row, col)) => write!(f, "{}!{}{}", self.sheet, column_letters(col), row + 1),
            None => f.write_str(&self.sheet),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationFinding {
    pub check_id: String,
    pub location: Location,
    pub expected: String,
    pub actual: String,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerificationReport {
    /// Sorted by (sheet, cell, check_id).
    pub findings: Vec<VerificationFinding>,
}

impl VerificationReport {
    pub fn checks(&self) -> usize {
        self.findings.len()
    }

    pub fn failures(&self) -> usize {
        self.findings
            .iter()
            .filter(|f| f.outcome == Outcome::Fail)
            .count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn failed(&self) -> impl Iterator<Item = &VerificationFinding> {
        self.findings.iter().filter(|f| f.outcome == Outcome::Fail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Tsv,
}

/// Text lists failures only; TSV lists every finding. Both end with
/// `N checks, M failures`.
pub fn report_findings(findings: &[VerificationFinding], format: ReportFormat) -> String {
    let mut sorted: Vec<&VerificationFinding> = findings.iter().collect();
    sorted.sort_by(|a, b| (&a.location, &a.check_id).cmp(&(&b.location, &b.check_id)));
    let mut out = String::new();
    for f in &sorted {
        match format {
            ReportFormat::Text if f.outcome == Outcome::Fail => {
                out.push_str(&format!(
                    "FAIL {} {}: expected {}, actual {}\n",
                    f.check_id, f.location, f.expected, f.actual
                ));
            }
            ReportFormat::Text => {}
            ReportFormat::Tsv => {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    f.outcome,
                    f.check_id,
                    f.location,
                    tsv_field(&f.expected),
                    tsv_field(&f.actual)
                ));
            }
        }
    }
    let failures = sorted.iter().filter(|f| f.outcome == Outcome::Fail).count();
    out.push_str(&format!("{} checks, {} failures\n", sorted.len(), failures));
    out
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// A non-empty cell value as read back from a workbook.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Number(f64),
}

impl Value {
    fn from_data(data: &Data) -> Option<Value> {
        Some(match data {
            Data::Empty => return None,
            Data::Int(i) => Value::Number(*i as f64),
            Data::Float(f) => Value::Number(*f),
            Data::String(s) => Value::Text(s.clone()),
            Data::Bool(b) => Value::Text(if *b { "TRUE" } else { "FALSE" }.into()),
            Data::DateTime(dt) => Value::Number(dt.as_f64()),
            Data::DateTimeIso(s) | Data::DurationIso(s) => Value::Text(s.clone()),
            Data::Error(e) => Value::Text(e.to_string()),
        })
    }

    fn number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            Value::Text(_) => None,
        }
    }

    fn text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            Value::Number(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Number(n) => f.write_str(&show_number(*n)),
        }
    }
}

fn show_number(n: f64) -> String {
    if n.is_finite() && n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

fn show(v: Option<&Value>) -> String {
    v.map_or_else(|| BLANK.to_string(), Value::to_string)
}

/// Non-empty cells of one sheet keyed by 0-based `(row, col)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grid {
    pub cells: BTreeMap<(u32, u16), Value>,
}

impl Grid {
    fn from_range(range: &Range<Data>) -> Self {
        let (r0, c0) = range.start().unwrap_or((0, 0));
        let cells = range
            .used_cells()
            .filter_map(|(r, c, d)| {
                Value::from_data(d).map(|v| ((r0 + r as u32, (c0 + c as u32) as u16), v))
            })
            .collect();
        Grid { cells }
    }

    pub fn get(&self, row: u32, col: u16) -> Option<&Value> {
        self.cells.get(&(row, col))
    }

    pub fn set(&mut self, row: u32, col: u16, value: Option<Value>) {
        match value {
            Some(v) => self.cells.insert((row, col), v),
            None => self.cells.remove(&(row, col)),
        };
    }
}

/// The processed workbook's sheets in workbook order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProcessedWorkbook {
    pub sheets: Vec<(String, Grid)>,
}

impl ProcessedWorkbook {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let wrap = |source| Error::WorkbookRead {
            path: path.to_path_buf(),
            source,
        };
        let mut wb: Xlsx<_> = open_workbook(path).map_err(wrap)?;
        let mut sheets = Vec::new();
        for name in wb.sheet_names() {
            let range = wb.worksheet_range(&name).map_err(wrap)?;
            sheets.push((name, Grid::from_range(&range)));
        }
        Ok(ProcessedWorkbook { sheets })
    }

    pub fn sheet(&self, name: &str) -> Option<&Grid> {
        self.sheets.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    pub fn sheet_mut(&mut self, name: &str) -> Option<&mut Grid> {
        self.sheets
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, g)| g)
    }

    pub fn sheet_names(&self) -> Vec<&str> {
        self.sheets.iter().map(|(n, _)| n.as_str()).collect()
    }
}

type SubjectKey = (String, String, String, i32);
type SchoolKey = (String, i32);

/// Cost and student totals for one group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Sums {
    cost: f64,
    students: u64,
}

impl Sums {
    /// `Some(value)` for a shown ratio, `None` for a blank cell.
    fn shown_ratio(self) -> Option<f64> {
        if self.students == 0 {
            (self.cost == 0.0).then_some(0.0)
        } else {
            Some(self.cost / self.students as f64)
        }
    }

    fn eligible(self) -> Option<f64> {
        if self.students == 0 {
            return None;
        }
        let r = self.cost / self.students as f64;
        (r.is_finite() && r > 0.0).then_some(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Anchors {
    min: f64,
    median: f64,
    max: f64,
}

/// Everything the verifier derives from the input snapshot.
#[derive(Debug, Clone)]
pub struct Recomputation {
    pub input_sha256_hex: String,
    pub sheet_name: String,
    pub header_row_0based: u32,
    /// Processing Summary rows 6 to 15 in order.
    pub counters: [u64; 10],
    subject_year: BTreeMap<SubjectKey, Sums>,
    school_year: BTreeMap<SchoolKey, Sums>,
    school_year_from_subjects: BTreeMap<SchoolKey, Sums>,
    anchors: BTreeMap<i32, Option<Anchors>>,
}

impl Recomputation {
    pub fn from_input(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let digest = Sha256::digest(&bytes);
        let input_sha256_hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();

        let wrap = |source| Error::WorkbookRead {
            path: path.to_path_buf(),
            source,
        };
        let mut wb: Xlsx<_> = open_workbook(path).map_err(wrap)?;
        let mut found = None;
        for name in wb.sheet_names() {
            let range = wb.worksheet_range(&name).map_err(wrap)?;
            if let Some((row, cols)) = find_header(&range) {
                found = Some((name, row, cols, range));
                break;
            }
        }
        let Some((sheet_name, header, cols, range)) = found else {
            return Err(Error::TableNotFound {
                scan_rows: DEFAULT_SCAN_ROWS,
                scan_cols: DEFAULT_SCAN_COLS,
            });
        };

        let last_row = range.end().map_or(header, |(r, _)| r);
        let rows: Vec<RawRow> = (header + 1..=last_row)
            .map(|r| {
                let mut raw = RawRow::empty(r);
                for field in LogicalField::ALL {
                    let value = range
                        .get_value((r, cols[field.index()]))
                        .and_then(Value::from_data)
                        .map(|v| match v {
                            Value::Text(s) => CellValue::Text(s),
                            Value::Number(n) => CellValue::Number(n),
                        });
                    raw.set(field, value);
                }
                raw
            })
            .collect();
        Ok(Self::from_rows(input_sha256_hex, sheet_name, header, &rows))
    }

    fn from_rows(
        input_sha256_hex: String,
        sheet_name: String,
        header: u32,
        rows: &[RawRow],
    ) -> Self {
        let mut seen = 0u64;
        let (mut summary, mut keys, mut year, mut negative) = (0u64, 0u64, 0u64, 0u64);
        let (mut missing_cost, mut missing_students, mut kept) = (0u64, 0u64, 0u64);
        let mut subject_year: HashMap<SubjectKey, Sums> = HashMap::new();
        let mut school_year: HashMap<SchoolKey, Sums> = HashMap::new();

        for raw in rows.iter().rev() {
            seen += 1;
            match classify_row(raw) {
                RowOutcome::Dropped(DropReason::SummaryRow) => summary += 1,
                RowOutcome::Dropped(DropReason::MissingKeys) => keys += 1,
                RowOutcome::Dropped(DropReason::MissingYear) => year += 1,
                RowOutcome::Dropped(DropReason::NegativeStudents { cost_missing }) => {
                    negative += 1;
                    if cost_missing {
                        missing_cost += 1;
                    }
                }
                RowOutcome::Kept(row) => {
                    kept += 1;
                    missing_cost += u64::from(row.cost_missing);
                    missing_students += u64::from(row.students_missing);
                    let s = subject_year
                        .entry((row.school.clone(), row.subject_no, row.subject, row.year))
                        .or_default();
                    s.cost += row.cost;
                    s.students += row.students;
                    let s = school_year.entry((row.school, row.year)).or_default();
                    s.cost += row.cost;
                    s.students += row.students;
                }
            }
        }

        let subject_year: BTreeMap<SubjectKey, Sums> = subject_year.into_iter().collect();
        let school_year: BTreeMap<SchoolKey, Sums> = school_year.into_iter().collect();
        let mut school_year_from_subjects: BTreeMap<SchoolKey, Sums> = BTreeMap::new();
        for ((school, _, _, y), s) in &subject_year {
            let t = school_year_from_subjects
                .entry((school.clone(), *y))
                .or_default();
            t.cost += s.cost;
            t.students += s.students;
        }
        let undefined = subject_year
            .values()
            .filter(|s| s.shown_ratio().is_none())
            .count() as u64;
        let no_activity = subject_year
            .values()
            .filter(|s| s.students == 0 && s.cost == 0.0)
            .count() as u64;

        let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
        for ((_, y), s) in &school_year {
            let bucket = by_year.entry(*y).or_default();
            bucket.extend(s.eligible());
        }
        let anchors = by_year
            .into_iter()
            .map(|(y, values)| (y, anchors_of(values)))
            .collect();

        Recomputation {
            input_sha256_hex,
            sheet_name,
            header_row_0based: header,
            counters: [
                seen,
                summary,
                keys,
                year,
                negative,
                missing_cost,
                missing_students,
                kept,
                undefined,
                no_activity,
            ],
            subject_year,
            school_year,
            school_year_from_subjects,
            anchors,
        }
    }
}

fn find_header(range: &Range<Data>) -> Option<(u32, [u32; 6])> {
    let mut rows: BTreeMap<u32, [Option<u32>; 6]> = BTreeMap::new();
    let (r0, c0) = range.start()?;
    for (r, c, d) in range.used_cells() {
        let (row, col) = (r0 + r as u32, c0 + c as u32);
        if row >= DEFAULT_SCAN_ROWS || col >= DEFAULT_SCAN_COLS {
            continue;
        }
        let Some(text) = Value::from_data(d).map(|v| match v {
            Value::Text(s) => s,
            Value::Number(n) => show_number(n),
        }) else {
            continue;
        };
        if let Some(field) = canonicalize_header(&text) {
            let slot = &mut rows.entry(row).or_default()[field.index()];
            *slot = Some(slot.map_or(col, |c| c.min(col)));
        }
    }
    rows.into_iter().find_map(|(row, cols)| {
        let mut out = [0u32; 6];
        for (o, c) in out.iter_mut().zip(cols) {
            *o = c?;
        }
        Some((row, out))
    })
}

/// Descending sort; the median is the mean of the two central picks, which
/// coincide for odd counts.
fn anchors_of(mut values: Vec<f64>) -> Option<Anchors> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| b.total_cmp(a));
    let n = values.len();
    let median = (values[(n - 1) / 2] + values[n / 2]) / 2.0;
    Some(Anchors {
        min: values[n - 1],
        median,
        max: values[0],
    })
}

/// Memberships as `(low, medium, high)` built from two clamped ramps.
fn weights(x: f64, a: &Anchors) -> (f64, f64, f64) {
    let (lo, mid, hi) = (a.min, a.median, a.max);
    let rise = if x <= lo {
        0.0
    } else if x >= mid {
        1.0
    } else {
        (x - lo) / (mid - lo)
    };
    let fall = if x >= hi {
        0.0
    } else if x <= mid {
        1.0
    } else {
        (hi - x) / (hi - mid)
    };
    let medium = if x == mid { 1.0 } else { rise.min(fall) };
    (1.0 - rise, medium, 1.0 - fall)
}

const PRIORITY: [BandLabel; 3] = [BandLabel::Medium, BandLabel::Low, BandLabel::High];

fn pick(w: (f64, f64, f64), eps: f64) -> Vec<BandLabel> {
    let of = |l: BandLabel| match l {
        BandLabel::Low => w.0,
        BandLabel::Medium => w.1,
        BandLabel::High => w.2,
    };
    let top = w.0.max(w.1).max(w.2);
    PRIORITY
        .into_iter()
        .filter(|l| top - of(*l) <= eps)
        .collect()
}

/// Labels a processor could legitimately choose given floating-point
/// near-ties; the first entry is the exact-arithmetic choice.
fn acceptable_labels(w: (f64, f64, f64)) -> Vec<BandLabel> {
    pick(w, TIE_EPS)
}

fn label_from_sheet(w: (f64, f64, f64)) -> BandLabel {
    pick(w, 0.0)[0]
}

fn amount_ok(actual: f64, expected: f64) -> bool {
    (actual - expected).abs() <= AMOUNT_TOLERANCE + RELATIVE_EPS * expected.abs()
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn show_amount(x: f64) -> String {
    format!("{:?}", round2(x))
}

fn anchors_string(a: Option<&Anchors>) -> String {
    match a {
        Some(a) => format!(
            "min {}, median {}, max {}",
            show_amount(a.min),
            show_amount(a.median),
            show_amount(a.max)
        ),
        None => NO_ANCHORS_TEXT.to_string(),
    }
}

fn parse_anchors(text: &str) -> Option<(f64, f64, f64)> {
    let rest = text.strip_prefix("min ")?;
    let (min, rest) = rest.split_once(", median ")?;
    let (median, max) = rest.split_once(", max ")?;
    Some((min.parse().ok()?, median.parse().ok()?, max.parse().ok()?))
}

fn anchors_match(text: &str, expected: Option<&Anchors>) -> bool {
    match expected {
        None => text == NO_ANCHORS_TEXT,
        Some(a) => parse_anchors(text).is_some_and(|(x, y, z)| {
            amount_ok(x, a.min) && amount_ok(y, a.median) && amount_ok(z, a.max)
        }),
    }
}

/// What one cell should hold.
#[derive(Debug, Clone)]
enum Expect {
    Text(String),
    /// Compared exactly.
    Exact(f64),
    /// Two-decimal display value of an unrounded amount.
    Amount(f64),
    Weight(f64),
    Anchors(Option<Anchors>),
    /// `"<year>: "` followed by anchors text.
    YearAnchors(i32, Option<Anchors>),
    /// Any of the listed labels.
    Label(Vec<BandLabel>),
    Blank,
}

impl Expect {
    fn check(&self, actual: Option<&Value>) -> bool {
        match (self, actual) {
            (Expect::Blank, None) => true,
            (Expect::Text(t), Some(Value::Text(a))) => a == t,
            (Expect::Exact(n), Some(Value::Number(a))) => a == n,
            (Expect::Amount(n), Some(Value::Number(a))) => amount_ok(*a, *n),
            (Expect::Weight(n), Some(Value::Number(a))) => (a - n).abs() <= MEMBERSHIP_TOLERANCE,
            (Expect::Anchors(e), Some(Value::Text(a))) => anchors_match(a, e.as_ref()),
            (Expect::YearAnchors(y, e), Some(Value::Text(a))) => a
                .strip_prefix(&format!("{y}: "))
                .is_some_and(|rest| anchors_match(rest, e.as_ref())),
            (Expect::Label(ls), Some(Value::Text(a))) => ls.iter().any(|l| l.as_str() == a),
            _ => false,
        }
    }

    fn describe(&self) -> String {
        match self {
            Expect::Text(t) => format!("{t:?}"),
            Expect::Exact(n) => show_number(*n),
            Expect::Amount(n) => show_amount(*n),
            Expect::Weight(n) => format!("{n:.6}"),
            Expect::Anchors(a) => format!("{:?}", anchors_string(a.as_ref())),
            Expect::YearAnchors(y, a) => {
                format!("{:?}", format!("{y}: {}", anchors_string(a.as_ref())))
            }
            Expect::Label(ls) => ls.iter().map(|l| l.as_str()).collect::<Vec<_>>().join("|"),
            Expect::Blank => BLANK.to_string(),
        }
    }
}

/// Expected cells of one sheet plus the findings gathered while checking.
struct SheetCheck<'a> {
    name: &'static str,
    grid: &'a Grid,
    claimed: BTreeSet<(u32, u16)>,
    findings: &'a mut Vec<VerificationFinding>,
}

impl<'a> SheetCheck<'a> {
    fn new(name: &'static str, grid: &'a Grid, findings: &'a mut Vec<VerificationFinding>) -> Self {
        SheetCheck {
            name,
            grid,
            claimed: BTreeSet::new(),
            findings,
        }
    }

    fn expect(&mut self, check_id: &str, row: u32, col: u16, expected: Expect) -> bool {
        self.claimed.insert((row, col));
        let actual = self.grid.get(row, col);
        let ok = expected.check(actual);
        self.record(check_id, row, col, expected.describe(), show(actual), ok);
        ok
    }

    fn text(&mut self, check_id: &str, row: u32, col: u16, text: &str) {
        self.expect(check_id, row, col, Expect::Text(text.to_string()));
    }

    fn record(
        &mut self,
        check_id: &str,
        row: u32,
        col: u16,
        expected: String,
        actual: String,
        ok: bool,
    ) {
        self.findings.push(VerificationFinding {
            check_id: check_id.to_string(),
            location: Location::cell(self.name, row, col),
            expected,
            actual,
            outcome: if ok { Outcome::Pass } else { Outcome::Fail },
        });
    }

    fn number(&self, row: u32, col: u16) -> Option<f64> {
        self.grid.get(row, col).and_then(Value::number)
    }

    /// Flags every non-empty cell that no expectation claimed.
    fn finish(self) {
        for (&(row, col), value) in &self.grid.cells {
            if !self.claimed.contains(&(row, col)) {
                self.findings.push(VerificationFinding {
                    check_id: "unexpected_cell".into(),
                    location: Location::cell(self.name, row, col),
                    expected: BLANK.into(),
                    actual: value.to_string(),
                    outcome: Outcome::Fail,
                });
            }
        }
    }
}

fn missing_sheet(findings: &mut Vec<VerificationFinding>, check_id: &str, sheet: &str) {
    findings.push(VerificationFinding {
        check_id: check_id.into(),
        location: Location::sheet(sheet),
        expected: "sheet present".into(),
        actual: MISSING.into(),
        outcome: Outcome::Fail,
    });
}

/// Re-aggregates `input_path` and checks `processed_path` against it.
/// Unreadable files are errors; every discrepancy is a finding.
pub fn verify(
    input_path: impl AsRef<Path>,
    processed_path: impl AsRef<Path>,
) -> Result<VerificationReport> {
    let recomputed = Recomputation::from_input(input_path)?;
    let processed = ProcessedWorkbook::open(processed_path)?;
    Ok(verify_against(&recomputed, &processed))
}

pub fn verify_against(re: &Recomputation, wb: &ProcessedWorkbook) -> VerificationReport {
    let mut findings = Vec::new();
    check_sheet_order(wb, &mut findings);

    match wb.sheet(SHEET_PROCESSING_SUMMARY) {
        Some(grid) => check_summary(re, grid, &mut findings),
        None => findings.push(VerificationFinding {
            check_id: "input_hash".into(),
            location: Location::sheet(SHEET_PROCESSING_SUMMARY),
            expected: re.input_sha256_hex.clone(),
            actual: MISSING.into(),
            outcome: Outcome::Fail,
        }),
    }
    match wb.sheet(SHEET_TREND_ANALYSIS) {
        Some(grid) => check_trend(re, grid, &mut findings),
        None => missing_sheet(&mut findings, "sheet_present", SHEET_TREND_ANALYSIS),
    }
    match wb.sheet(SHEET_REPORT) {
        Some(grid) => check_report(re, grid, &mut findings),
        None => missing_sheet(&mut findings, "sheet_present", SHEET_REPORT),
    }
    match wb.sheet(SHEET_FUZZY_BANDS) {
        Some(grid) => check_fuzzy(re, grid, &mut findings),
        None => missing_sheet(&mut findings, "sheet_present", SHEET_FUZZY_BANDS),
    }
    if let (Some(report), Some(trend)) = (wb.sheet(SHEET_REPORT), wb.sheet(SHEET_TREND_ANALYSIS)) {
        check_report_vs_trend(report, trend, &mut findings);
    }

    findings.sort_by(|a, b| (&a.location, &a.check_id).cmp(&(&b.location, &b.check_id)));
    VerificationReport { findings }
}

fn check_sheet_order(wb: &ProcessedWorkbook, findings: &mut Vec<VerificationFinding>) {
    let actual = wb.sheet_names();
    let full = [
        SHEET_PROCESSING_SUMMARY,
        SHEET_TREND_ANALYSIS,
        SHEET_REPORT,
        SHEET_FUZZY_BANDS,
    ];
    let ok = actual == full || actual == full[1..];
    let expected = if actual.first() == Some(&SHEET_PROCESSING_SUMMARY) {
        &full[..]
    } else {
        &full[1..]
    };
    findings.push(VerificationFinding {
        check_id: "sheet_order".into(),
        location: Location::sheet(WORKBOOK_LOCATION),
        expected: expected.join(", "),
        actual: actual.join(", "),
        outcome: if ok { Outcome::Pass } else { Outcome::Fail },
    });
}

fn check_summary(re: &Recomputation, grid: &Grid, findings: &mut Vec<VerificationFinding>) {
    use summary_layout::*;
    let mut s = SheetCheck::new(SHEET_PROCESSING_SUMMARY, grid, findings);
    let r0 = |row_1based: u32| row_1based - 1;

    s.text("summary_label", r0(TITLE_ROW), 0, TITLE);
    s.text("summary_label", r0(HASH_ROW), 0, HASH_LABEL);
    s.text("input_hash", r0(HASH_ROW), 1, &re.input_sha256_hex);
    s.text("summary_label", r0(SHEET_ROW), 0, SHEET_LABEL);
    s.text("table_location", r0(SHEET_ROW), 1, &re.sheet_name);
    s.text("summary_label", r0(HEADER_ROW), 0, HEADER_LABEL);
    s.expect(
        "table_location",
        r0(HEADER_ROW),
        1,
        Expect::Exact(f64::from(re.header_row_0based) + 1.0),
    );
    for (i, (label, value)) in COUNTER_LABELS.iter().zip(re.counters).enumerate() {
        let row = r0(FIRST_COUNTER_ROW) + i as u32;
        s.text("summary_label", row, 0, label);
        s.expect("counter", row, 1, Expect::Exact(value as f64));
    }
    let groups = [re.subject_year.len(), re.school_year.len()];
    for (i, (label, value)) in GROUP_LABELS.iter().zip(groups).enumerate() {
        let row = r0(FIRST_GROUP_ROW) + i as u32;
        s.text("summary_label", row, 0, label);
        s.expect("counter", row, 1, Expect::Exact(value as f64));
    }
    s.text("summary_label", r0(ANCHOR_HEADING_ROW), 0, ANCHOR_HEADING);
    for (i, (year, a)) in re.anchors.iter().enumerate() {
        let row = r0(FIRST_ANCHOR_ROW) + i as u32;
        s.text("anchors", row, 0, &year.to_string());
        s.expect("anchors", row, 1, Expect::Anchors(*a));
    }
    s.finish();
}

fn check_trend(re: &Recomputation, grid: &Grid, findings: &mut Vec<VerificationFinding>) {
    let schools: Vec<&str> = re
        .school_year
        .keys()
        .map(|(s, _)| s.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let years: Vec<i32> = re.anchors.keys().copied().collect();
    let mut s = SheetCheck::new(SHEET_TREND_ANALYSIS, grid, findings);

    s.text("header", 0, 0, "School");
    for (j, y) in years.iter().enumerate() {
        s.expect("header", 0, j as u16 + 1, Expect::Exact(f64::from(*y)));
    }
    for (i, school) in schools.iter().enumerate() {
        let row = i as u32 + 1;
        s.text("trend_cell", row, 0, school);
        for (j, year) in years.iter().enumerate() {
            let col = j as u16 + 1;
            let key = (school.to_string(), *year);
            let Some(direct) = re.school_year.get(&key) else {
                continue;
            };
            let expected = direct.shown_ratio().map_or(Expect::Blank, Expect::Amount);
            s.expect("trend_cell", row, col, expected);

            let summed = re
                .school_year_from_subjects
                .get(&key)
                .copied()
                .unwrap_or_default();
            let tol = RELATIVE_EPS * direct.cost.abs().max(1.0);
            let ok = summed.students == direct.students && (summed.cost - direct.cost).abs() <= tol;
            s.record(
                "school_year_sum",
                row,
                col,
                format!("{} / {}", show_amount(direct.cost), direct.students),
                format!("{} / {}", show_amount(summed.cost), summed.students),
                ok,
            );
        }
    }

    let mut row = schools.len() as u32 + 2;
    s.text("methodology", row, 0, METHODOLOGY_HEADING);
    for line in METHODOLOGY_LINES {
        row += 1;
        s.text("methodology", row, 0, line);
    }
    for (year, a) in &re.anchors {
        row += 1;
        s.expect("anchors", row, 0, Expect::YearAnchors(*year, *a));
    }
    s.finish();
}

fn check_report(re: &Recomputation, grid: &Grid, findings: &mut Vec<VerificationFinding>) {
    let years: Vec<i32> = re
        .subject_year
        .keys()
        .map(|k| k.3)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    type Triple<'a> = (&'a str, &'a str, &'a str);
    let mut triples: BTreeMap<Triple, Vec<(i32, Sums)>> = BTreeMap::new();
    for ((school, no, subject, year), sums) in &re.subject_year {
        triples
            .entry((school.as_str(), no.as_str(), subject.as_str()))
            .or_default()
            .push((*year, *sums));
    }

    let mut s = SheetCheck::new(SHEET_REPORT, grid, findings);
    for (c, h) in REPORT_KEY_HEADERS.iter().enumerate() {
        s.text("header", 0, c as u16, h);
    }
    for (j, y) in years.iter().enumerate() {
        for (k, h) in report_year_headers(*y).iter().enumerate() {
            s.text("header", 0, (3 + 3 * j + k) as u16, h);
        }
    }
    for (i, ((school, no, subject), groups)) in triples.iter().enumerate() {
        let row = i as u32 + 1;
        s.text("report_cell", row, 0, school);
        s.text("report_cell", row, 1, no);
        s.text("report_cell", row, 2, subject);
        for (year, sums) in groups {
            let j = years.iter().position(|y| y == year).expect("year listed");
            let col = (3 + 3 * j) as u16;
            s.expect("report_cell", row, col, Expect::Amount(sums.cost));
            s.expect(
                "report_cell",
                row,
                col + 1,
                Expect::Exact(sums.students as f64),
            );
            let ratio = sums.shown_ratio().map_or(Expect::Blank, Expect::Amount);
            s.expect("report_cell", row, col + 2, ratio);
        }
    }
    s.finish();
}

fn check_fuzzy(re: &Recomputation, grid: &Grid, findings: &mut Vec<VerificationFinding>) {
    struct Expected<'k> {
        school: &'k str,
        year: i32,
        ratio: f64,
        weights: (f64, f64, f64),
        anchors: Anchors,
    }
    let mut records: Vec<Expected<'_>> = Vec::new();
    for ((school, year), sums) in &re.school_year {
        let (Some(x), Some(Some(anchors))) = (sums.eligible(), re.anchors.get(year)) else {
            continue;
        };
        records.push(Expected {
            school,
            year: *year,
            ratio: x,
            weights: weights(x, anchors),
            anchors: *anchors,
        });
    }
    records.sort_by(|a, b| (a.year, a.school).cmp(&(b.year, b.school)));

    let mut s = SheetCheck::new(SHEET_FUZZY_BANDS, grid, findings);
    for (c, h) in FUZZY_HEADERS.iter().enumerate() {
        s.text("header", 0, c as u16, h);
    }
    let mut counts: BTreeMap<i32, [u64; 3]> = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        let row = i as u32 + 1;
        s.text("fuzzy_row", row, 0, rec.school);
        s.expect("fuzzy_row", row, 1, Expect::Exact(f64::from(rec.year)));
        s.expect("fuzzy_ratio", row, 2, Expect::Amount(rec.ratio));
        s.expect("fuzzy_membership", row, 3, Expect::Weight(rec.weights.0));
        s.expect("fuzzy_membership", row, 4, Expect::Weight(rec.weights.1));
        s.expect("fuzzy_membership", row, 5, Expect::Weight(rec.weights.2));

        let acceptable = acceptable_labels(rec.weights);
        let shown = grid
            .get(row, 6)
            .and_then(Value::text)
            .and_then(BandLabel::parse);
        let label = shown
            .filter(|l| acceptable.contains(l))
            .unwrap_or(acceptable[0]);
        s.expect("fuzzy_label", row, 6, Expect::Label(acceptable));
        s.expect("fuzzy_score", row, 7, Expect::Exact(label.score()));
        s.expect("fuzzy_anchor", row, 8, Expect::Amount(rec.anchors.min));
        s.expect("fuzzy_anchor", row, 9, Expect::Amount(rec.anchors.median));
        s.expect("fuzzy_anchor", row, 10, Expect::Amount(rec.anchors.max));

        let slot = match label {
            BandLabel::Low => 0,
            BandLabel::Medium => 1,
            BandLabel::High => 2,
        };
        counts.entry(rec.year).or_default()[slot] += 1;

        if let (Some(l), Some(m), Some(h)) = (s.number(row, 3), s.number(row, 4), s.number(row, 5))
        {
            let derived = label_from_sheet((l, m, h));
            let actual = grid.get(row, 6);
            let ok = actual.and_then(Value::text) == Some(derived.as_str());
            s.record(
                "band_consistency",
                row,
                6,
                derived.as_str().into(),
                show(actual),
                ok,
            );
        }
    }

    let mut row = records.len() as u32 + 2;
    for (c, h) in BAND_COUNT_HEADERS.iter().enumerate() {
        s.text("band_counts", row, c as u16, h);
    }
    for (year, [low, medium, high]) in counts {
        row += 1;
        let values = [
            f64::from(year),
            low as f64,
            medium as f64,
            high as f64,
            (low + medium + high) as f64,
        ];
        for (c, v) in values.into_iter().enumerate() {
            s.expect("band_counts", row, c as u16, Expect::Exact(v));
        }
    }
    s.finish();
}

/// Sums the Report sheet's own cost and student cells per school-year and
/// compares the resulting ratio with the Trend Analysis cell. Each rounded
/// cost contributes up to half a cent of error.
fn check_report_vs_trend(report: &Grid, trend: &Grid, findings: &mut Vec<VerificationFinding>) {
    let mut years: BTreeMap<u16, i32> = BTreeMap::new();
    for (&(row, col), v) in &report.cells {
        if row != 0 || col < 3 || (col - 3) % 3 != 0 {
            continue;
        }
        if let Some(year) = v
            .text()
            .and_then(|t| t.strip_suffix(" Incl Oncosts"))
            .and_then(|y| y.parse().ok())
        {
            years.insert(col, year);
        }
    }
    // (school, year) -> (cost sum, student sum, contributing rows)
    let mut sums: BTreeMap<(String, i32), (f64, f64, u32)> = BTreeMap::new();
    let last_row = report.cells.keys().map(|k| k.0).max().unwrap_or(0);
    for row in 1..=last_row {
        let Some(school) = report.get(row, 0).and_then(Value::text) else {
            continue;
        };
        for (&col, &year) in &years {
            let cost = report.get(row, col).and_then(Value::number);
            let students = report.get(row, col + 1).and_then(Value::number);
            if let (Some(c), Some(n)) = (cost, students) {
                let e = sums
                    .entry((school.to_string(), year))
                    .or_insert((0.0, 0.0, 0));
                e.0 += c;
                e.1 += n;
                e.2 += 1;
            }
        }
    }

    let mut trend_rows: HashMap<&str, u32> = HashMap::new();
    let mut trend_cols: HashMap<i32, u16> = HashMap::new();
    for (&(row, col), v) in &trend.cells {
        match (row, col, v) {
            (0, c, Value::Number(y)) if c > 0 => {
                trend_cols.insert(*y as i32, c);
            }
            (r, 0, Value::Text(s)) if r > 0 => {
                trend_rows.entry(s.as_str()).or_insert(r);
            }
            _ => {}
        }
    }

    for ((school, year), (cost, students, n)) in sums {
        let (Some(&row), Some(&col)) = (trend_rows.get(school.as_str()), trend_cols.get(&year))
        else {
            findings.push(VerificationFinding {
                check_id: "report_vs_trend".into(),
                location: Location::sheet(SHEET_TREND_ANALYSIS),
                expected: format!("cell for {school} {year}"),
                actual: MISSING.into(),
                outcome: Outcome::Fail,
            });
            continue;
        };
        let actual = trend.get(row, col);
        let (expected, ok) = if students > 0.0 {
            let ratio = cost / students;
            let tol = AMOUNT_TOLERANCE
                + f64::from(n) * AMOUNT_TOLERANCE / students
                + RELATIVE_EPS * ratio.abs();
            let ok = actual
                .and_then(Value::number)
                .is_some_and(|a| (a - ratio).abs() <= tol);
            (show_amount(ratio), ok)
        } else if cost != 0.0 {
            (BLANK.to_string(), actual.is_none())
        } else {
            // Costs that round to zero may still hide an undefined ratio.
            let ok = match actual {
                None => true,
                Some(v) => v.number() == Some(0.0),
            };
            ("0.0".to_string(), ok)
        };
        findings.push(VerificationFinding {
            check_id: "report_vs_trend".into(),
            location: Location::cell(SHEET_TREND_ANALYSIS, row, col),
            expected,
            actual: show(actual),
            outcome: if ok { Outcome::Pass } else { Outcome::Fail },
        });
    }
}
