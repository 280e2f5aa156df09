//! The processed workbook: four fixed sheets in a fixed order.
//!
//! Sheets are first assembled as [`SheetPayload`]s (plain cell maps) and then
//! serialised by [`save_workbook`]. Document properties are constants and
//! every table is emitted in sorted key order, so identical inputs give
//! byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rust_xlsxwriter::{
    ConditionalFormat3ColorScale, ConditionalFormatType, DocProperties, ExcelDateTime, Format,
    Workbook,
};

use crate::aggregate::{
    compute_ratio, GroupTotals, QualityCounters, Ratio, RatioStatus, SchoolYearKey, SubjectYearKey,
};
use crate::banding::{Banding, YearAnchors};
use crate::error::{Error, Result};
use crate::provenance::RunRecord;

pub const SHEET_PROCESSING_SUMMARY: &str = "Processing Summary";
pub const SHEET_TREND_ANALYSIS: &str = "Trend Analysis";
pub const SHEET_REPORT: &str = "Report";
pub const SHEET_FUZZY_BANDS: &str = "Fuzzy Bands";

pub const CREATOR: &str = "cad-processor";
/// Created and modified timestamps, `(year, month, day)` at 00:00:00Z.
pub const DOCUMENT_DATE: (u16, u8, u8) = (2000, 1, 1);

pub const NO_ANCHORS_TEXT: &str = "No finite, positive values";

/// Processing Summary layout, 1-based rows as seen in a spreadsheet.
pub mod summary_layout {
    pub const TITLE_ROW: u32 = 1;
    pub const HASH_ROW: u32 = 3;
    pub const SHEET_ROW: u32 = 4;
    pub const HEADER_ROW: u32 = 5;
    pub const FIRST_COUNTER_ROW: u32 = 6;
    pub const FIRST_GROUP_ROW: u32 = 16;
    pub const ANCHOR_HEADING_ROW: u32 = 20;
    pub const FIRST_ANCHOR_ROW: u32 = 21;

    pub const TITLE: &str = "Processing Summary";
    pub const HASH_LABEL: &str = "Input file SHA-256";
    pub const SHEET_LABEL: &str = "Input sheet";
    pub const HEADER_LABEL: &str = "Header row (1-based)";
    pub const ANCHOR_HEADING: &str = "Anchors used (finite positive School-Year values)";

    /// Rows 6 to 15.
    pub const COUNTER_LABELS: [&str; 10] = [
        "Rows seen (including dropped rows)",
        "Rows dropped (summary rows: Total/Sum/Result)",
        "Rows dropped (missing School/Subject fields)",
        "Rows dropped (year not detected)",
        "Rows with negative student counts (dropped)",
        "Rows with missing cost values (treated as 0.0 for sums)",
        "Rows with missing student counts (treated as 0 for sums)",
        "Rows kept for aggregation",
        "Groups with undefined cost-per-student (cost>0 and students=0)",
        "Groups with no activity (cost=0 and students=0)",
    ];

    /// Rows 16 and 17.
    pub const GROUP_LABELS: [&str; 2] = ["Subject-Year groups", "School-Year groups"];
}

pub const FUZZY_HEADERS: [&str; 11] = [
    "School",
    "Year",
    "Cost per Student",
    "Mu_Low",
    "Mu_Medium",
    "Mu_High",
    "Band",
    "Band_Score_0_to_1",
    "Anchor_Min",
    "Anchor_Median",
    "Anchor_Max",
];

pub const BAND_COUNT_HEADERS: [&str; 5] = ["Year", "Low", "Medium", "High", "Total"];

pub const REPORT_KEY_HEADERS: [&str; 3] = ["School", "Subject No.", "Subject"];

pub const METHODOLOGY_HEADING: &str = "Methodology & Insights";
pub const METHODOLOGY_LINES: [&str; 4] = [
    "Cost per student = total Incl Oncosts / total Student Count for each School-Year group.",
    "Blank cell: cost > 0 with 0 students (undefined). 0.00: no activity (cost = 0 and students = 0).",
    "Each year column has a three-point colour scale: green at the year's minimum, yellow at its median, red at its maximum.",
    "Anchors used (finite positive School-Year values):",
];

const SCALE_MIN_COLOUR: u32 = 0x63BE7B;
const SCALE_MID_COLOUR: u32 = 0xFFEB84;
const SCALE_MAX_COLOUR: u32 = 0xF8696B;

/// Rounds for display in currency-like cells.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Shortest decimal text of a 2-decimal rounded value, keeping at least one
/// fractional digit (`9.0`, `14.25`).
pub fn format_amount(x: f64) -> String {
    format!("{:?}", round2(x))
}

pub fn anchors_text(anchors: Option<&YearAnchors>) -> String {
    match anchors {
        Some(a) => format!(
            "min {}, median {}, max {}",
            format_amount(a.a_min),
            format_amount(a.b_median),
            format_amount(a.c_max)
        ),
        None => NO_ANCHORS_TEXT.to_string(),
    }
}

pub fn report_year_headers(year: i32) -> [String; 3] {
    [
        format!("{year} Incl Oncosts"),
        format!("{year} Student Count"),
        format!("{year} Incl Oncosts Per Student"),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumberFormat {
    General,
    Integer,
    TwoDecimals,
    SixDecimals,
}

impl NumberFormat {
    fn code(self) -> &'static str {
        match self {
            NumberFormat::General => "General",
            NumberFormat::Integer => "0",
            NumberFormat::TwoDecimals => "0.00",
            NumberFormat::SixDecimals => "0.000000",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Number(f64, NumberFormat),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn int(n: impl Into<i64>) -> Self {
        Cell::Number(n.into() as f64, NumberFormat::Integer)
    }

    pub fn count(n: u64) -> Self {
        Cell::Number(n as f64, NumberFormat::Integer)
    }

    pub fn amount(x: f64) -> Self {
        Cell::Number(round2(x), NumberFormat::TwoDecimals)
    }

    pub fn weight(x: f64) -> Self {
        Cell::Number(x, NumberFormat::SixDecimals)
    }

    /// Ratio cell: blank for an undefined ratio.
    pub fn ratio(r: &Ratio) -> Option<Self> {
        match r.status {
            RatioStatus::Undefined => None,
            _ => r.value.map(Cell::amount),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(n, _) => Some(*n),
            Cell::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            Cell::Number(..) => None,
        }
    }
}

/// Three-point colour scale over one column, 0-based rows inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorScale {
    pub col: u16,
    pub first_row: u32,
    pub last_row: u32,
    pub min: f64,
    pub mid: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SheetPayload {
    pub name: String,
    /// Keyed by 0-based (row, col).
    pub cells: BTreeMap<(u32, u16), Cell>,
    pub color_scales: Vec<ColorScale>,
    pub column_widths: Vec<(u16, f64)>,
}

impl SheetPayload {
    fn new(name: &str) -> Self {
        SheetPayload {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn put(&mut self, row: u32, col: u16, cell: Cell) {
        self.cells.insert((row, col), cell);
    }

    fn put_opt(&mut self, row: u32, col: u16, cell: Option<Cell>) {
        if let Some(c) = cell {
            self.put(row, col, c);
        }
    }

    /// Cell at a 1-based row and 0-based column, the way the layout
    /// constants are written.
    pub fn at(&self, row_1based: u32, col: u16) -> Option<&Cell> {
        self.cells.get(&(row_1based - 1, col))
    }
}

pub fn write_processing_summary(
    run: &RunRecord,
    counters: &QualityCounters,
    anchors: &BTreeMap<i32, Option<YearAnchors>>,
) -> SheetPayload {
    use summary_layout::*;
    let mut s = SheetPayload::new(SHEET_PROCESSING_SUMMARY);
    let mut pair = |row_1based: u32, label: &str, value: Cell| {
        s.put(row_1based - 1, 0, Cell::text(label));
        s.put(row_1based - 1, 1, value);
    };
    let header_row = run.header_row_0based.map_or(0, |r| i64::from(r) + 1);
    pair(HASH_ROW, HASH_LABEL, Cell::text(&run.input_sha256_hex));
    pair(SHEET_ROW, SHEET_LABEL, Cell::text(&run.sheet_name));
    pair(HEADER_ROW, HEADER_LABEL, Cell::int(header_row));
    for (i, value) in counter_values(counters).into_iter().enumerate() {
        pair(
            FIRST_COUNTER_ROW + i as u32,
            COUNTER_LABELS[i],
            Cell::count(value),
        );
    }
    let groups = [counters.subject_year_groups, counters.school_year_groups];
    for (i, value) in groups.into_iter().enumerate() {
        pair(
            FIRST_GROUP_ROW + i as u32,
            GROUP_LABELS[i],
            Cell::count(value),
        );
    }
    for (i, (year, a)) in anchors.iter().enumerate() {
        pair(
            FIRST_ANCHOR_ROW + i as u32,
            &year.to_string(),
            Cell::text(anchors_text(a.as_ref())),
        );
    }
    s.put(TITLE_ROW - 1, 0, Cell::text(TITLE));
    s.put(ANCHOR_HEADING_ROW - 1, 0, Cell::text(ANCHOR_HEADING));
    s.column_widths = vec![(0, 62.0), (1, 68.0)];
    s
}

/// Values for rows 6 to 15, in [`summary_layout::COUNTER_LABELS`] order.
pub fn counter_values(c: &QualityCounters) -> [u64; 10] {
    [
        c.total_rows_seen,
        c.rows_dropped_summary_rows,
        c.rows_dropped_missing_keys,
        c.rows_dropped_missing_year,
        c.rows_with_negative_students,
        c.rows_with_missing_cost,
        c.rows_with_missing_students,
        c.rows_kept(),
        c.groups_undefined,
        c.groups_no_activity,
    ]
}

pub fn write_trend_analysis(
    ratios: &BTreeMap<SchoolYearKey, Ratio>,
    anchors: &BTreeMap<i32, Option<YearAnchors>>,
) -> SheetPayload {
    let mut s = SheetPayload::new(SHEET_TREND_ANALYSIS);
    let schools: BTreeSet<&str> = ratios.keys().map(|k| k.school.as_str()).collect();
    let years: BTreeSet<i32> = ratios.keys().map(|k| k.year).collect();
    let schools: Vec<&str> = schools.into_iter().collect();
    let years: Vec<i32> = years.into_iter().collect();

    s.put(0, 0, Cell::text("School"));
    for (j, year) in years.iter().enumerate() {
        s.put(0, j as u16 + 1, Cell::int(*year));
    }
    for (i, school) in schools.iter().enumerate() {
        let row = i as u32 + 1;
        s.put(row, 0, Cell::text(*school));
        for (j, year) in years.iter().enumerate() {
            let key = SchoolYearKey {
                school: school.to_string(),
                year: *year,
            };
            s.put_opt(row, j as u16 + 1, ratios.get(&key).and_then(Cell::ratio));
        }
    }
    if !schools.is_empty() {
        for (j, year) in years.iter().enumerate() {
            if let Some(Some(a)) = anchors.get(year) {
                s.color_scales.push(ColorScale {
                    col: j as u16 + 1,
                    first_row: 1,
                    last_row: schools.len() as u32,
                    min: a.a_min,
                    mid: a.b_median,
                    max: a.c_max,
                });
            }
        }
    }

    let mut row = schools.len() as u32 + 2;
    s.put(row, 0, Cell::text(METHODOLOGY_HEADING));
    for line in METHODOLOGY_LINES {
        row += 1;
        s.put(row, 0, Cell::text(line));
    }
    for (year, a) in anchors {
        row += 1;
        s.put(
            row,
            0,
            Cell::text(format!("{year}: {}", anchors_text(a.as_ref()))),
        );
    }
    s.column_widths = vec![(0, 28.0)];
    s
}

pub fn write_report(subject_year: &BTreeMap<SubjectYearKey, GroupTotals>) -> SheetPayload {
    let mut s = SheetPayload::new(SHEET_REPORT);
    let years: Vec<i32> = subject_year
        .keys()
        .map(|k| k.year)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for (c, h) in REPORT_KEY_HEADERS.iter().enumerate() {
        s.put(0, c as u16, Cell::text(*h));
    }
    for (j, year) in years.iter().enumerate() {
        for (k, h) in report_year_headers(*year).into_iter().enumerate() {
            s.put(0, (3 + 3 * j + k) as u16, Cell::text(h));
        }
    }

    let mut row = 0u32;
    let mut current: Option<(&str, &str, &str)> = None;
    for (key, totals) in subject_year {
        let triple = (
            key.school.as_str(),
            key.subject_no.as_str(),
            key.subject.as_str(),
        );
        if current != Some(triple) {
            current = Some(triple);
            row += 1;
            s.put(row, 0, Cell::text(triple.0));
            s.put(row, 1, Cell::text(triple.1));
            s.put(row, 2, Cell::text(triple.2));
        }
        let j = years
            .binary_search(&key.year)
            .expect("year collected above");
        let col = (3 + 3 * j) as u16;
        s.put(row, col, Cell::amount(totals.total_oncosts));
        s.put(row, col + 1, Cell::count(totals.total_students));
        s.put_opt(row, col + 2, Cell::ratio(&compute_ratio(*totals)));
    }
    s.column_widths = vec![(0, 24.0), (2, 32.0)];
    s
}

pub fn write_fuzzy_bands(banding: &Banding) -> SheetPayload {
    let mut s = SheetPayload::new(SHEET_FUZZY_BANDS);
    for (c, h) in FUZZY_HEADERS.iter().enumerate() {
        s.put(0, c as u16, Cell::text(*h));
    }
    for (i, rec) in banding.records.iter().enumerate() {
        let row = i as u32 + 1;
        let cells = [
            Cell::text(&rec.key.school),
            Cell::int(rec.key.year),
            Cell::amount(rec.ratio),
            Cell::weight(rec.membership.mu_low),
            Cell::weight(rec.membership.mu_medium),
            Cell::weight(rec.membership.mu_high),
            Cell::text(rec.band.label.as_str()),
            Cell::Number(rec.band.score, NumberFormat::General),
            Cell::amount(rec.anchors.a_min),
            Cell::amount(rec.anchors.b_median),
            Cell::amount(rec.anchors.c_max),
        ];
        for (c, cell) in cells.into_iter().enumerate() {
            s.put(row, c as u16, cell);
        }
    }
    let mut row = banding.records.len() as u32 + 2;
    for (c, h) in BAND_COUNT_HEADERS.iter().enumerate() {
        s.put(row, c as u16, Cell::text(*h));
    }
    for (year, counts) in &banding.counts {
        row += 1;
        let cells = [
            Cell::int(*year),
            Cell::count(counts.low),
            Cell::count(counts.medium),
            Cell::count(counts.high),
            Cell::count(counts.total()),
        ];
        for (c, cell) in cells.into_iter().enumerate() {
            s.put(row, c as u16, cell);
        }
    }
    s.column_widths = vec![(0, 24.0), (2, 16.0), (7, 20.0)];
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkbookPlan {
    pub include_processing_summary: bool,
    pub sheets: Vec<SheetPayload>,
    pub creator: &'static str,
    pub created_at: (u16, u8, u8),
    pub modified_at: (u16, u8, u8),
}

impl WorkbookPlan {
    pub fn new(
        summary: Option<SheetPayload>,
        trend: SheetPayload,
        report: SheetPayload,
        fuzzy: SheetPayload,
    ) -> Self {
        let include_processing_summary = summary.is_some();
        let sheets = summary.into_iter().chain([trend, report, fuzzy]).collect();
        WorkbookPlan {
            include_processing_summary,
            sheets,
            creator: CREATOR,
            created_at: DOCUMENT_DATE,
            modified_at: DOCUMENT_DATE,
        }
    }

    pub fn sheet(&self, name: &str) -> Option<&SheetPayload> {
        self.sheets.iter().find(|s| s.name == name)
    }

    pub fn sheet_names(&self) -> Vec<&str> {
        self.sheets.iter().map(|s| s.name.as_str()).collect()
    }
}

pub fn render_workbook(plan: &WorkbookPlan) -> Result<Vec<u8>> {
    let mut workbook = Workbook::new();
    // The serialiser writes one timestamp for both created and modified.
    let (y, m, d) = plan.created_at;
    debug_assert_eq!(plan.created_at, plan.modified_at);
    let properties = DocProperties::new()
        .set_author(plan.creator)
        .set_creation_datetime(&ExcelDateTime::from_ymd(y, m, d)?);
    workbook.set_properties(&properties);

    let formats: BTreeMap<&str, Format> = [
        NumberFormat::Integer,
        NumberFormat::TwoDecimals,
        NumberFormat::SixDecimals,
    ]
    .into_iter()
    .map(|f| (f.code(), Format::new().set_num_format(f.code())))
    .collect();
    let bold = Format::new().set_bold();

    for payload in &plan.sheets {
        let ws = workbook.add_worksheet();
        ws.set_name(&payload.name)?;
        for &(col, width) in &payload.column_widths {
            ws.set_column_width(col, width)?;
        }
        for (&(row, col), cell) in &payload.cells {
            match cell {
                Cell::Text(t) if row == 0 => {
                    ws.write_string_with_format(row, col, t, &bold)?;
                }
                Cell::Text(t) => {
                    ws.write_string(row, col, t)?;
                }
                Cell::Number(n, NumberFormat::General) => {
                    ws.write_number(row, col, *n)?;
                }
                Cell::Number(n, f) => {
                    ws.write_number_with_format(row, col, *n, &formats[f.code()])?;
                }
            }
        }
        for scale in &payload.color_scales {
            let cf = ConditionalFormat3ColorScale::new()
                .set_minimum(ConditionalFormatType::Number, scale.min)
                .set_midpoint(ConditionalFormatType::Number, scale.mid)
                .set_maximum(ConditionalFormatType::Number, scale.max)
                .set_minimum_color(SCALE_MIN_COLOUR)
                .set_midpoint_color(SCALE_MID_COLOUR)
                .set_maximum_color(SCALE_MAX_COLOUR);
            ws.add_conditional_format(scale.first_row, scale.col, scale.last_row, scale.col, &cf)?;
        }
    }
    Ok(workbook.save_to_buffer()?)
}

/// Writes to `<output>.tmp` and renames into place.
pub fn save_workbook(plan: &WorkbookPlan, output_path: impl AsRef<Path>) -> Result<()> {
    let output_path = output_path.as_ref();
    let bytes = render_workbook(plan)?;
    if let Some(dir) = output_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = output_path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, output_path).map_err(|e| Error::io(output_path, e))
}
