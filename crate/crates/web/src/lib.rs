//! Browser bindings for exploring the fuzzy banding.
//!
//! Three operations are exported to JavaScript:
//!
//! * [`memberships`]: weights, label and score for one ratio under given anchors;
//! * [`membership_curves`]: sampled Low/Medium/High curves for plotting;
//! * [`band_ratios`]: per-year anchors, banded records and counts for a pasted
//!   table of `school, year, cost, students` lines.
//!
//! Results cross the boundary as JSON strings so the same functions are
//! testable natively.

use std::collections::BTreeMap;

use cad_processor::aggregate::{compute_ratio, GroupTotals, RatioStatus, SchoolYearKey};
use cad_processor::banding::{assign_band, band_year, compute_anchors, membership, YearAnchors};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize, PartialEq)]
pub struct MembershipReport {
    pub mu_low: f64,
    pub mu_medium: f64,
    pub mu_high: f64,
    pub band: &'static str,
    pub score: f64,
}

fn anchors(a: f64, b: f64, c: f64) -> Result<YearAnchors, String> {
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err("anchors must be finite numbers".into());
    }
    if !(a <= b && b <= c) {
        return Err(format!(
            "anchors must satisfy min <= median <= max, got {a}, {b}, {c}"
        ));
    }
    Ok(YearAnchors {
        year: 0,
        a_min: a,
        b_median: b,
        c_max: c,
    })
}

pub fn membership_report(x: f64, a: f64, b: f64, c: f64) -> Result<MembershipReport, String> {
    if !x.is_finite() {
        return Err("ratio must be a finite number".into());
    }
    let m = membership(x, &anchors(a, b, c)?);
    let band = assign_band(&m);
    Ok(MembershipReport {
        mu_low: m.mu_low,
        mu_medium: m.mu_medium,
        mu_high: m.mu_high,
        band: band.label.as_str(),
        score: band.score,
    })
}

/// JSON object with `mu_low`, `mu_medium`, `mu_high`, `band` and `score`.
#[wasm_bindgen]
pub fn memberships(x: f64, a: f64, b: f64, c: f64) -> Result<String, String> {
    let report = membership_report(x, a, b, c)?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// `n` samples over `[lo, hi]`, flattened as `x, low, medium, high` per
/// sample.
#[wasm_bindgen]
pub fn membership_curves(
    a: f64,
    b: f64,
    c: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    let anchors = anchors(a, b, c)?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err("plot range must be finite with lo < hi".into());
    }
    let n = n.max(2);
    let mut out = Vec::with_capacity(n * 4);
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let m = membership(x, &anchors);
        out.extend([x, m.mu_low, m.mu_medium, m.mu_high]);
    }
    Ok(out)
}

#[derive(Debug, Serialize, PartialEq)]
pub struct YearSummary {
    pub year: i32,
    /// `[min, median, max]`, or `null` for a year without eligible ratios.
    pub anchors: Option<[f64; 3]>,
    pub low: u64,
    pub medium: u64,
    pub high: u64,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct RecordRow {
    pub school: String,
    pub year: i32,
    pub ratio: f64,
    pub mu: [f64; 3],
    pub band: &'static str,
    pub score: f64,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Skipped {
    pub school: String,
    pub year: i32,
    /// `"no activity"` or `"undefined"`.
    pub status: &'static str,
}

#[derive(Debug, Serialize, PartialEq, Default)]
pub struct BandingReport {
    pub years: Vec<YearSummary>,
    pub records: Vec<RecordRow>,
    pub skipped: Vec<Skipped>,
    /// One message per unparseable input line.
    pub errors: Vec<String>,
}

fn parse_line(line: &str) -> Result<(String, i32, f64, u64), String> {
    let parts: Vec<&str> = line.split([',', '\t', ';']).map(str::trim).collect();
    let [school, year, cost, students] = parts[..] else {
        return Err(format!("expected 4 fields, found {}", parts.len()));
    };
    if school.is_empty() {
        return Err("school is blank".into());
    }
    let year = year.parse().map_err(|_| format!("bad year {year:?}"))?;
    let cost: f64 = cost.parse().map_err(|_| format!("bad cost {cost:?}"))?;
    if !cost.is_finite() {
        return Err(format!("bad cost {cost:?}"));
    }
    let students = students
        .parse()
        .map_err(|_| format!("bad student count {students:?}"))?;
    Ok((school.to_string(), year, cost, students))
}

/// Lines of `school, year, cost, students` (comma, tab or semicolon
/// separated) are summed per school-year, then anchored and banded. Blank
/// lines and lines starting with `#` are ignored.
pub fn banding_report(text: &str) -> BandingReport {
    let mut report = BandingReport::default();
    let mut totals: BTreeMap<SchoolYearKey, GroupTotals> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_line(line) {
            Ok((school, year, cost, students)) => {
                let t = totals.entry(SchoolYearKey { school, year }).or_default();
                t.total_oncosts += cost;
                t.total_students += students;
            }
            Err(e) => report.errors.push(format!("line {}: {e}", i + 1)),
        }
    }

    let ratios: BTreeMap<_, _> = totals
        .iter()
        .map(|(k, t)| (k.clone(), compute_ratio(*t)))
        .collect();
    for (key, ratio) in &ratios {
        let status = match ratio.status {
            RatioStatus::NoActivity => "no activity",
            RatioStatus::Undefined => "undefined",
            RatioStatus::Ok => continue,
        };
        report.skipped.push(Skipped {
            school: key.school.clone(),
            year: key.year,
            status,
        });
    }
    let anchors = compute_anchors(&ratios);
    let banding = band_year(&ratios, &anchors);
    for (year, a) in &anchors {
        let counts = banding.counts.get(year).copied().unwrap_or_default();
        report.years.push(YearSummary {
            year: *year,
            anchors: a.map(|a| [a.a_min, a.b_median, a.c_max]),
            low: counts.low,
            medium: counts.medium,
            high: counts.high,
        });
    }
    report.records = banding
        .records
        .iter()
        .map(|r| RecordRow {
            school: r.key.school.clone(),
            year: r.key.year,
            ratio: r.ratio,
            mu: [
                r.membership.mu_low,
                r.membership.mu_medium,
                r.membership.mu_high,
            ],
            band: r.band.label.as_str(),
            score: r.band.score,
        })
        .collect();
    report
}

/// JSON form of [`banding_report`].
#[wasm_bindgen]
pub fn band_ratios(text: &str) -> String {
    serde_json::to_string(&banding_report(text)).expect("report serialises")
}
