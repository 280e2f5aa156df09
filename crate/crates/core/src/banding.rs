//! Per-year anchors and fuzzy Low/Medium/High banding.
//!
//! Each year's eligible school-year ratios give three anchors: minimum `a`,
//! median `b` and maximum `c`. A ratio `x` then receives three membership
//! weights in `[0, 1]`:
//!
//! * Low, a left shoulder: 1 up to `a`, falling linearly to 0 at `b`.
//! * Medium, a triangle: 0 at `a`, peaking at 1 on `b`, back to 0 at `c`.
//! * High, a right shoulder: 0 up to `b`, rising linearly to 1 at `c`.
//!
//! Collapsed anchors (`a == b` and/or `b == c`) turn the affected linear
//! segments into steps. Low tests `x <= a` before `x >= b`, High tests
//! `x >= c` before `x <= b`, and Medium is exactly 1 at `x == b`, so no
//! division by zero can occur. The label is the heaviest weight with ties
//! going to Medium, then Low, then High.

use std::collections::BTreeMap;
use std::fmt;

use crate::aggregate::{Ratio, SchoolYearKey};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearAnchors {
    pub year: i32,
    pub a_min: f64,
    pub b_median: f64,
    pub c_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub mu_low: f64,
    pub mu_medium: f64,
    pub mu_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BandLabel {
    Low,
    Medium,
    High,
}

impl BandLabel {
    pub fn score(self) -> f64 {
        match self {
            BandLabel::Low => 0.0,
            BandLabel::Medium => 0.5,
            BandLabel::High => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BandLabel::Low => "Low",
            BandLabel::Medium => "Medium",
            BandLabel::High => "High",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Low" => Some(BandLabel::Low),
            "Medium" => Some(BandLabel::Medium),
            "High" => Some(BandLabel::High),
            _ => None,
        }
    }
}

impl fmt::Display for BandLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub label: BandLabel,
    pub score: f64,
}

/// Median after an ascending sort; even counts average the middle pair.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

/// Anchors for every year that appears in `ratios`; `None` marks a year
/// with no finite, positive ratio.
pub fn compute_anchors(
    ratios: &BTreeMap<SchoolYearKey, Ratio>,
) -> BTreeMap<i32, Option<YearAnchors>> {
    let mut eligible: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for (key, ratio) in ratios {
        let bucket = eligible.entry(key.year).or_default();
        if let Some(v) = ratio.eligible_value() {
            bucket.push(v);
        }
    }
    eligible
        .into_iter()
        .map(|(year, values)| (year, anchors_from_values(year, &values)))
        .collect()
}

pub fn anchors_from_values(year: i32, values: &[f64]) -> Option<YearAnchors> {
    let b_median = median(values).ok()?;
    let a_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(YearAnchors {
        year,
        a_min,
        b_median,
        c_max,
    })
}

pub fn mu_low(x: f64, a: f64, b: f64) -> f64 {
    if x <= a {
        1.0
    } else if x >= b {
        0.0
    } else {
        (b - x) / (b - a)
    }
}

pub fn mu_medium(x: f64, a: f64, b: f64, c: f64) -> f64 {
    if x == b {
        1.0
    } else if x <= a || x >= c {
        0.0
    } else if x < b {
        (x - a) / (b - a)
    } else {
        (c - x) / (c - b)
    }
}

pub fn mu_high(x: f64, b: f64, c: f64) -> f64 {
    if x >= c {
        1.0
    } else if x <= b {
        0.0
    } else {
        (x - b) / (c - b)
    }
}

pub fn membership(x: f64, anchors: &YearAnchors) -> Membership {
    let YearAnchors {
        a_min: a,
        b_median: b,
        c_max: c,
        ..
    } = *anchors;
    Membership {
        mu_low: mu_low(x, a, b),
        mu_medium: mu_medium(x, a, b, c),
        mu_high: mu_high(x, b, c),
    }
}

/// Heaviest weight wins; exact ties resolve Medium, then Low, then High.
pub fn assign_band(m: &Membership) -> Band {
    let priority = [
        (BandLabel::Medium, m.mu_medium),
        (BandLabel::Low, m.mu_low),
        (BandLabel::High, m.mu_high),
    ];
    let mut best = priority[0];
    for candidate in &priority[1..] {
        if candidate.1 > best.1 {
            best = *candidate;
        }
    }
    Band {
        label: best.0,
        score: best.0.score(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandedRecord {
    pub key: SchoolYearKey,
    pub ratio: f64,
    pub membership: Membership,
    pub band: Band,
    pub anchors: YearAnchors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BandCounts {
    pub low: u64,
    pub medium: u64,
    pub high: u64,
}

impl BandCounts {
    pub fn total(&self) -> u64 {
        self.low + self.medium + self.high
    }

    fn add(&mut self, label: BandLabel) {
        match label {
            BandLabel::Low => self.low += 1,
            BandLabel::Medium => self.medium += 1,
            BandLabel::High => self.high += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Banding {
    /// Sorted by (year, school).
    pub records: Vec<BandedRecord>,
    /// Only years with anchors appear.
    pub counts: BTreeMap<i32, BandCounts>,
}

pub fn band_year(
    ratios: &BTreeMap<SchoolYearKey, Ratio>,
    anchors: &BTreeMap<i32, Option<YearAnchors>>,
) -> Banding {
    let mut out = Banding::default();
    for (key, ratio) in ratios {
        let Some(x) = ratio.eligible_value() else {
            continue;
        };
        let Some(Some(year_anchors)) = anchors.get(&key.year) else {
            continue;
        };
        let m = membership(x, year_anchors);
        let band = assign_band(&m);
        out.counts.entry(key.year).or_default().add(band.label);
        out.records.push(BandedRecord {
            key: key.clone(),
            ratio: x,
            membership: m,
            band,
            anchors: *year_anchors,
        });
    }
    out.records
        .sort_by(|l, r| (l.key.year, &l.key.school).cmp(&(r.key.year, &r.key.school)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::RatioStatus;
    use proptest::prelude::*;

    fn anchors(a: f64, b: f64, c: f64) -> YearAnchors {
        YearAnchors {
            year: 2024,
            a_min: a,
            b_median: b,
            c_max: c,
        }
    }

    fn m(l: f64, md: f64, h: f64) -> Membership {
        Membership {
            mu_low: l,
            mu_medium: md,
            mu_high: h,
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[10.0, 12.0, 18.0, 30.0]).unwrap(), 15.0);
        assert_eq!(median(&[7.0]).unwrap(), 7.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert!(matches!(median(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn worked_example() {
        let w = membership(12000.0, &anchors(10000.0, 15000.0, 30000.0));
        assert_eq!(w, m(0.6, 0.4, 0.0));
        assert_eq!(
            assign_band(&w),
            Band {
                label: BandLabel::Low,
                score: 0.0
            }
        );
    }

    #[test]
    fn glossary_vectors() {
        let year = anchors(5000.0, 10000.0, 15000.0);
        let expected = [
            (5000.0, m(1.0, 0.0, 0.0), BandLabel::Low),
            (7500.0, m(0.5, 0.5, 0.0), BandLabel::Medium),
            (10000.0, m(0.0, 1.0, 0.0), BandLabel::Medium),
            (12500.0, m(0.0, 0.5, 0.5), BandLabel::Medium),
            (15000.0, m(0.0, 0.0, 1.0), BandLabel::High),
        ];
        for (x, weights, label) in expected {
            let got = membership(x, &year);
            assert_eq!(got, weights, "x = {x}");
            assert_eq!(assign_band(&got).label, label, "x = {x}");
        }
    }

    #[test]
    fn shoulder_examples() {
        assert_eq!(mu_low(10000.0, 10000.0, 15000.0), 1.0);
        assert_eq!(mu_low(10.0, 10.0, 10.0), 1.0);
        assert_eq!(mu_high(12000.0, 15000.0, 30000.0), 0.0);
        assert_eq!(mu_high(15000.0, 10000.0, 15000.0), 1.0);
        assert_eq!(mu_high(12500.0, 10000.0, 15000.0), 0.5);
        assert_eq!(mu_medium(10000.0, 5000.0, 10000.0, 15000.0), 1.0);
    }

    #[test]
    fn degenerate_anchors() {
        assert_eq!(mu_medium(7.0, 7.0, 7.0, 7.0), 1.0);
        assert_eq!(mu_medium(6.0, 7.0, 7.0, 7.0), 0.0);
        assert_eq!(mu_medium(8.0, 7.0, 7.0, 7.0), 0.0);
        let w = membership(7.0, &anchors(7.0, 7.0, 7.0));
        assert_eq!(w, m(1.0, 1.0, 1.0));
        assert_eq!(assign_band(&w).label, BandLabel::Medium);

        // a == b < c: rising segment collapses to a step at b.
        assert_eq!(membership(5.0, &anchors(5.0, 5.0, 9.0)), m(1.0, 1.0, 0.0));
        assert_eq!(membership(7.0, &anchors(5.0, 5.0, 9.0)), m(0.0, 0.5, 0.5));
        // a < b == c: falling segment collapses to a step at b.
        assert_eq!(membership(9.0, &anchors(5.0, 9.0, 9.0)), m(0.0, 1.0, 1.0));
        assert_eq!(membership(7.0, &anchors(5.0, 9.0, 9.0)), m(0.5, 0.5, 0.0));
    }

    #[test]
    fn tie_priority() {
        assert_eq!(assign_band(&m(0.6, 0.4, 0.0)).label, BandLabel::Low);
        assert_eq!(assign_band(&m(0.5, 0.5, 0.0)).label, BandLabel::Medium);
        assert_eq!(assign_band(&m(0.5, 0.0, 0.5)).label, BandLabel::Low);
        assert_eq!(assign_band(&m(0.0, 0.5, 0.5)).label, BandLabel::Medium);
        assert_eq!(assign_band(&m(0.0, 0.0, 0.0)).label, BandLabel::Medium);
        assert_eq!(
            assign_band(&m(0.0, 0.2, 0.8)),
            Band {
                label: BandLabel::High,
                score: 1.0
            }
        );
    }

    fn ratios(entries: &[(&str, i32, Option<f64>)]) -> BTreeMap<SchoolYearKey, Ratio> {
        entries
            .iter()
            .map(|&(school, year, value)| {
                let status = match value {
                    None => RatioStatus::Undefined,
                    Some(0.0) => RatioStatus::NoActivity,
                    Some(_) => RatioStatus::Ok,
                };
                (
                    SchoolYearKey {
                        school: school.into(),
                        year,
                    },
                    Ratio { status, value },
                )
            })
            .collect()
    }

    #[test]
    fn anchors_per_year() {
        let r = ratios(&[
            ("A", 2022, Some(0.0)),
            ("B", 2022, None),
            ("A", 2023, Some(28.0)),
            ("B", 2023, Some(9.0)),
            ("C", 2023, Some(14.0)),
            ("D", 2023, Some(12.0)),
            ("E", 2023, Some(25.0)),
            ("F", 2023, None),
        ]);
        let a = compute_anchors(&r);
        assert_eq!(a[&2022], None);
        let y = a[&2023].unwrap();
        assert_eq!((y.a_min, y.b_median, y.c_max), (9.0, 14.0, 28.0));

        let banded = band_year(&r, &a);
        assert_eq!(banded.records.len(), 5);
        assert!(!banded.counts.contains_key(&2022));
        assert_eq!(
            banded.counts[&2023],
            BandCounts {
                low: 1,
                medium: 2,
                high: 2
            }
        );
        let schools: Vec<_> = banded
            .records
            .iter()
            .map(|r| r.key.school.as_str())
            .collect();
        assert_eq!(schools, ["A", "B", "C", "D", "E"]);
    }

    #[test]
    fn glossary_year_bands_in_order() {
        let r = ratios(&[
            ("A", 2023, Some(5000.0)),
            ("B", 2023, Some(7500.0)),
            ("C", 2023, Some(10000.0)),
            ("D", 2023, Some(12500.0)),
            ("E", 2023, Some(15000.0)),
        ]);
        let a = compute_anchors(&r);
        let y = a[&2023].unwrap();
        assert_eq!((y.a_min, y.b_median, y.c_max), (5000.0, 10000.0, 15000.0));
        let labels: Vec<_> = band_year(&r, &a)
            .records
            .iter()
            .map(|r| r.band.label)
            .collect();
        use BandLabel::*;
        assert_eq!(labels, [Low, Medium, Medium, Medium, High]);
    }

    #[test]
    fn single_value_year_is_medium() {
        let r = ratios(&[("A", 2024, Some(42.0))]);
        let a = compute_anchors(&r);
        let rec = &band_year(&r, &a).records[0];
        assert_eq!(rec.membership, m(1.0, 1.0, 1.0));
        assert_eq!(rec.band.label, BandLabel::Medium);
    }

    fn strict_anchors() -> impl Strategy<Value = (f64, f64, f64)> {
        (1e-3f64..1e6, 1e-3f64..1e6, 1e-3f64..1e6)
            .prop_map(|(a, d1, d2)| (a, a + d1, a + d1 + d2))
            .prop_filter("strict", |(a, b, c)| a < b && b < c)
    }

    proptest! {
        #[test]
        fn weights_in_unit_interval((a, b, c) in strict_anchors(), x in -1e7f64..1e7) {
            let w = membership(x, &anchors(a, b, c));
            for v in [w.mu_low, w.mu_medium, w.mu_high] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn complementary_segments((a, b, c) in strict_anchors(), t in 0.0f64..1.0) {
            let x = a + t * (b - a);
            if a < x && x < b {
                let w = membership(x, &anchors(a, b, c));
                prop_assert!((w.mu_low + w.mu_medium - 1.0).abs() <= 1e-12);
            }
            let x = b + t * (c - b);
            if b < x && x < c {
                let w = membership(x, &anchors(a, b, c));
                prop_assert!((w.mu_medium + w.mu_high - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn shoulders_are_monotone((a, b, c) in strict_anchors(), x1 in -1e7f64..1e7, x2 in -1e7f64..1e7) {
            let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            prop_assert!(mu_low(lo, a, b) >= mu_low(hi, a, b));
            prop_assert!(mu_high(lo, b, c) <= mu_high(hi, b, c));
        }

        #[test]
        fn pointwise_anchor_values((a, b, c) in strict_anchors()) {
            prop_assert_eq!(mu_low(a, a, b), 1.0);
            prop_assert_eq!(mu_low(b, a, b), 0.0);
            prop_assert_eq!(mu_medium(b, a, b, c), 1.0);
            prop_assert_eq!(mu_medium(a, a, b, c), 0.0);
            prop_assert_eq!(mu_medium(c, a, b, c), 0.0);
            prop_assert_eq!(mu_high(b, b, c), 0.0);
            prop_assert_eq!(mu_high(c, b, c), 1.0);
        }
    }
}
