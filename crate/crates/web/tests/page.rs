//! The static page and the exported functions must agree on names and on
//! the JSON fields the page reads.

use cad_processor_web::{band_ratios, membership_curves, memberships};

const PAGE: &str = include_str!("../www/index.html");

#[test]
fn page_imports_every_export() {
    let import = PAGE
        .lines()
        .find(|l| l.starts_with("import init"))
        .expect("module import line");
    for name in [
        "memberships",
        "membership_curves",
        "band_ratios",
        "cad_processor_web.js",
    ] {
        assert!(import.contains(name), "{name} missing from {import}");
    }
}

#[test]
fn json_fields_read_by_the_page_exist() {
    let probe: serde_json::Value =
        serde_json::from_str(&memberships(7500.0, 5000.0, 10000.0, 15000.0).unwrap()).unwrap();
    for field in ["mu_low", "mu_medium", "mu_high", "band", "score"] {
        assert!(
            PAGE.contains(&format!("probe.{field}")),
            "page does not read {field}"
        );
        assert!(probe.get(field).is_some(), "export lacks {field}");
    }
    assert_eq!(probe["band"], "Medium");

    let report: serde_json::Value =
        serde_json::from_str(&band_ratios("A, 2024, 10, 1\nB, 2024, 0, 0\nx")).unwrap();
    for field in ["errors", "years", "records", "skipped"] {
        assert!(
            PAGE.contains(&format!("report.{field}")),
            "page does not read {field}"
        );
        assert!(report.get(field).is_some(), "export lacks {field}");
    }
    let record = &report["records"][0];
    for field in ["school", "year", "ratio", "mu", "band"] {
        assert!(
            PAGE.contains(&format!("r.{field}")),
            "page does not read record {field}"
        );
        assert!(record.get(field).is_some(), "record lacks {field}");
    }
    let year = &report["years"][0];
    for field in ["year", "anchors", "low", "medium", "high"] {
        assert!(
            PAGE.contains(&format!("y.{field}")),
            "page does not read year {field}"
        );
        assert!(year.get(field).is_some(), "year lacks {field}");
    }
}

#[test]
fn curve_layout_matches_page_stride() {
    let v = membership_curves(1.0, 2.0, 3.0, 0.0, 4.0, 9).unwrap();
    assert_eq!(v.len(), 9 * 4);
    assert!(PAGE.contains("i += 4"));
}
