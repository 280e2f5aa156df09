//! Row classification and value conversion.
//!
//! Checks run in a fixed order and the first failing check decides the drop
//! reason: summary marker, missing key, missing year, negative student count.

use crate::ingest::{CellValue, LogicalField, RawRow};

pub const YEAR_MIN: i32 = 1900;
pub const YEAR_MAX: i32 = 2099;

const SUMMARY_MARKERS: [&str; 3] = ["total", "sum", "result"];

/// A validated extract row ready for aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanRow {
    pub school: String,
    pub subject_no: String,
    pub subject: String,
    pub year: i32,
    pub cost: f64,
    pub students: u64,
    pub cost_missing: bool,
    pub students_missing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    SummaryRow,
    MissingKeys,
    MissingYear,
    /// The cost conversion already ran for these rows, so a missing cost is
    /// still counted.
    NegativeStudents {
        cost_missing: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Kept(CleanRow),
    Dropped(DropReason),
}

/// First run of exactly four ASCII digits whose value is in 1900..=2099.
pub fn extract_year(teaching_session: Option<&str>) -> Option<i32> {
    let text = teaching_session?;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i - start == 4 {
            let year: i32 = text[start..i].parse().ok()?;
            if (YEAR_MIN..=YEAR_MAX).contains(&year) {
                return Some(year);
            }
        }
    }
    None
}

pub fn is_summary_marker(text: &str) -> bool {
    let t = text.trim();
    SUMMARY_MARKERS.iter().any(|m| t.eq_ignore_ascii_case(m))
}

fn parse_number(cell: Option<&CellValue>) -> Option<f64> {
    let n = match cell? {
        CellValue::Number(n) => *n,
        CellValue::Text(s) => s.trim().parse::<f64>().ok()?,
    };
    n.is_finite().then_some(n)
}

/// Returns `(value, missing)`; anything that is not a finite number is
/// missing and reads as `0.0`.
pub fn to_float(cell: Option<&CellValue>) -> (f64, bool) {
    match parse_number(cell) {
        Some(n) => (n, false),
        None => (0.0, true),
    }
}

/// Returns `(value, missing)`. Whole-valued reals are accepted; fractional
/// or non-numeric values are missing and read as `0`. Negative values pass
/// through.
pub fn to_int(cell: Option<&CellValue>) -> (i64, bool) {
    if let Some(CellValue::Text(s)) = cell {
        if let Ok(i) = s.trim().parse::<i64>() {
            return (i, false);
        }
    }
    match parse_number(cell) {
        Some(n) if n.fract() == 0.0 && n.abs() < 9.0e15 => (n as i64, false),
        _ => (0, true),
    }
}

fn key_text(row: &RawRow, field: LogicalField) -> Option<String> {
    let text = row.get(field)?.to_text();
    let trimmed = text.trim();
    (!trimmed.is_empty()).then(|| trimmed.to_string())
}

pub fn classify_row(raw: &RawRow) -> RowOutcome {
    let marker = |field| {
        raw.get(field)
            .is_some_and(|v| is_summary_marker(&v.to_text()))
    };
    if marker(LogicalField::School) || marker(LogicalField::Subject) {
        return RowOutcome::Dropped(DropReason::SummaryRow);
    }

    let (Some(school), Some(subject_no), Some(subject)) = (
        key_text(raw, LogicalField::School),
        key_text(raw, LogicalField::SubjectNo),
        key_text(raw, LogicalField::Subject),
    ) else {
        return RowOutcome::Dropped(DropReason::MissingKeys);
    };

    let session = raw
        .get(LogicalField::TeachingSession)
        .map(CellValue::to_text);
    let Some(year) = extract_year(session.as_deref()) else {
        return RowOutcome::Dropped(DropReason::MissingYear);
    };

    let (cost, cost_missing) = to_float(raw.get(LogicalField::InclOncosts));
    let (students, students_missing) = to_int(raw.get(LogicalField::StudentCount));
    if students < 0 {
        return RowOutcome::Dropped(DropReason::NegativeStudents { cost_missing });
    }

    RowOutcome::Kept(CleanRow {
        school,
        subject_no,
        subject,
        year,
        cost,
        students: students as u64,
        cost_missing,
        students_missing,
    })
}
