mod common;

use cad_processor::verify::{
    report_findings, verify, verify_against, Outcome, ProcessedWorkbook, Recomputation,
    ReportFormat, Value,
};
use common::{random_extract, row, Project};

const GOLDEN_TSV: &str = include_str!("golden/verify_small.tsv");

fn golden_rows() -> Vec<common::Row> {
    vec![
        row("Arts", "100", "Drawing", "Autumn 2023", 90.0, 10),
        row("Arts", "101", "Painting", "2023 S2", 50.0, 0),
        row("Business", "150", "Accounting", "2023", 140.0, 10),
        row("Health", "500", "Anatomy", "2023", 280.0, 10),
        row("Law", "200", "Torts", "Spring 2022", 0.0, 0),
        row("Law", "200", "Torts", "Spring 2023", 120.0, 5),
        row("Law", "200", "Torts", "Spring 2023", 100.0, 5),
        row("Total", "", "", "", 780.0, 40),
    ]
}

fn processed(rows: &[common::Row]) -> Project {
    let p = Project::with_input(rows);
    assert_eq!(p.run(&[]), 0, "{}", p.trace_log());
    p
}

#[test]
fn pristine_workbooks_pass_for_generated_fixtures() {
    for seed in 0..12u64 {
        let (rows, _) = random_extract(seed, 40 + 25 * seed as usize);
        let p = processed(&rows);
        let report = verify(p.input(), p.output()).unwrap();
        let failures: Vec<_> = report.failed().collect();
        assert!(failures.is_empty(), "seed {seed}: {failures:#?}");
        assert!(report.checks() > 50);
    }
}

#[test]
fn without_summary_sheet_only_the_hash_check_fails() {
    let p = processed(&golden_rows());
    assert_eq!(p.run(&["--no-processing-summary"]), 0);
    let report = verify(p.input(), p.output()).unwrap();
    let failed: Vec<_> = report.failed().map(|f| f.check_id.as_str()).collect();
    assert_eq!(failed, ["input_hash"]);
}

fn mutated(value: &Value) -> Value {
    match value {
        Value::Number(x) => Value::Number(x + 1.0),
        Value::Text(s) => Value::Text(format!("{s}x")),
    }
}

#[test]
fn every_single_cell_mutation_is_detected() {
    let (mut rows, _) = random_extract(99, 120);
    rows.extend(golden_rows());
    let p = processed(&rows);
    let re = Recomputation::from_input(p.input()).unwrap();
    let wb = ProcessedWorkbook::open(p.output()).unwrap();
    assert!(verify_against(&re, &wb).passed());

    let mut mutations = 0;
    for (sheet, grid) in &wb.sheets {
        for (&(r, c), value) in &grid.cells {
            for replacement in [Some(mutated(value)), None] {
                let mut copy = wb.clone();
                copy.sheet_mut(sheet)
                    .unwrap()
                    .set(r, c, replacement.clone());
                let report = verify_against(&re, &copy);
                assert!(
                    report.failures() >= 1,
                    "{sheet} ({r},{c}) {value:?} -> {replacement:?} went unnoticed"
                );
                mutations += 1;
            }
        }
    }
    assert!(mutations > 500, "{mutations}");
}

#[test]
fn one_edited_ratio_fails_only_checks_on_that_cell() {
    let p = processed(&golden_rows());
    let re = Recomputation::from_input(p.input()).unwrap();
    let mut wb = ProcessedWorkbook::open(p.output()).unwrap();
    // Trend Analysis row 1 is Arts, column C is 2023: (90 + 50) / 10.
    let grid = wb.sheet_mut("Trend Analysis").unwrap();
    assert_eq!(grid.get(1, 2), Some(&Value::Number(14.0)));
    grid.set(1, 2, Some(Value::Number(14.5)));
    let report = verify_against(&re, &wb);
    let failed: Vec<String> = report
        .failed()
        .map(|f| format!("{} {}", f.check_id, f.location))
        .collect();
    assert_eq!(
        failed,
        [
            "report_vs_trend Trend Analysis!C2",
            "trend_cell Trend Analysis!C2"
        ]
    );
}

#[test]
fn inserted_value_in_undefined_cell_fails() {
    let p = processed(&golden_rows());
    let re = Recomputation::from_input(p.input()).unwrap();
    let mut wb = ProcessedWorkbook::open(p.output()).unwrap();
    // Report row 1 is Arts/100/Drawing; row 2 Arts/101/Painting has an
    // undefined 2023 ratio in column I.
    let grid = wb.sheet_mut("Report").unwrap();
    assert_eq!(grid.get(2, 7), Some(&Value::Number(0.0)));
    assert_eq!(grid.get(2, 8), None);
    grid.set(2, 8, Some(Value::Number(0.0)));
    let report = verify_against(&re, &wb);
    assert_eq!(report.failures(), 1);
    assert_eq!(
        report.failed().next().unwrap().location.to_string(),
        "Report!I3"
    );
}

#[test]
fn appended_input_row_makes_stale_workbook_fail_hash() {
    let p = processed(&golden_rows());
    let mut rows = golden_rows();
    rows.push(row("Arts", "100", "Drawing", "Autumn 2023", 10.0, 1));
    common::write_extract(&p.input(), &rows);
    let report = verify(p.input(), p.output()).unwrap();
    let hash = report
        .findings
        .iter()
        .find(|f| f.check_id == "input_hash")
        .unwrap();
    assert_eq!(hash.outcome, Outcome::Fail);
    assert!(report.failures() > 1);
}

#[test]
fn unreadable_processed_workbook_is_an_error() {
    let p = processed(&golden_rows());
    std::fs::write(p.output(), b"garbage").unwrap();
    assert!(verify(p.input(), p.output()).is_err());
}

#[test]
fn tsv_report_matches_golden_file() {
    let p = processed(&golden_rows());
    let re = Recomputation::from_input(p.input()).unwrap();
    let report = verify(p.input(), p.output()).unwrap();
    let tsv = report_findings(&report.findings, ReportFormat::Tsv)
        .replace(&re.input_sha256_hex, "<input-sha256>");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/verify_small.tsv");
        std::fs::write(path, &tsv).unwrap();
    }
    assert_eq!(tsv, GOLDEN_TSV);

    let text = report_findings(&report.findings, ReportFormat::Text);
    assert_eq!(text, GOLDEN_TSV.lines().last().unwrap().to_string() + "\n");
}
