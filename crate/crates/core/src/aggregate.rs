//! Subject-year and school-year totals, cost-per-student and the run's
//! data-quality counters.

use std::collections::BTreeMap;

use crate::rules::{CleanRow, DropReason, RowOutcome};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubjectYearKey {
    pub school: String,
    pub subject_no: String,
    pub subject: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SchoolYearKey {
    pub school: String,
    pub year: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupTotals {
    pub total_oncosts: f64,
    pub total_students: u64,
}

impl GroupTotals {
    fn add(&mut self, cost: f64, students: u64) {
        self.total_oncosts += cost;
        self.total_students += students;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RatioStatus {
    Ok,
    NoActivity,
    /// Zero students but non-zero cost.
    Undefined,
}

/// A group's cost-per-student with its status. `value` is `None` exactly
/// when the status is [`RatioStatus::Undefined`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub status: RatioStatus,
    pub value: Option<f64>,
}

impl Ratio {
    /// Finite and strictly positive ratios feed the per-year anchors.
    pub fn eligible_value(&self) -> Option<f64> {
        match (self.status, self.value) {
            (RatioStatus::Ok, Some(v)) if v.is_finite() && v > 0.0 => Some(v),
            _ => None,
        }
    }
}

pub fn compute_ratio(totals: GroupTotals) -> Ratio {
    if totals.total_students > 0 {
        Ratio {
            status: RatioStatus::Ok,
            value: Some(totals.total_oncosts / totals.total_students as f64),
        }
    } else if totals.total_oncosts == 0.0 {
        Ratio {
            status: RatioStatus::NoActivity,
            value: Some(0.0),
        }
    } else {
        Ratio {
            status: RatioStatus::Undefined,
            value: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QualityCounters {
    pub total_rows_seen: u64,
    pub rows_dropped_summary_rows: u64,
    pub rows_dropped_missing_keys: u64,
    pub rows_dropped_missing_year: u64,
    pub rows_with_missing_cost: u64,
    pub rows_with_missing_students: u64,
    pub rows_with_negative_students: u64,
    pub subject_year_groups: u64,
    pub school_year_groups: u64,
    /// Counted over subject-year groups.
    pub groups_undefined: u64,
    /// Counted over subject-year groups.
    pub groups_no_activity: u64,
}

impl QualityCounters {
    pub fn rows_dropped(&self) -> u64 {
        self.rows_dropped_summary_rows
            + self.rows_dropped_missing_keys
            + self.rows_dropped_missing_year
            + self.rows_with_negative_students
    }

    pub fn rows_kept(&self) -> u64 {
        self.total_rows_seen - self.rows_dropped()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregation {
    pub subject_year: BTreeMap<SubjectYearKey, GroupTotals>,
    pub school_year: BTreeMap<SchoolYearKey, GroupTotals>,
    pub counters: QualityCounters,
}

impl Aggregation {
    pub fn subject_year_ratios(&self) -> BTreeMap<SubjectYearKey, Ratio> {
        self.subject_year
            .iter()
            .map(|(k, t)| (k.clone(), compute_ratio(*t)))
            .collect()
    }

    pub fn school_year_ratios(&self) -> BTreeMap<SchoolYearKey, Ratio> {
        self.school_year
            .iter()
            .map(|(k, t)| (k.clone(), compute_ratio(*t)))
            .collect()
    }
}

/// Streaming fold state. Rows are added in source order; call
/// [`Folder::finish`] once the stream ends to record group counts.
#[derive(Debug, Default)]
pub struct Folder {
    agg: Aggregation,
}

impl Folder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, outcome: &RowOutcome) {
        let c = &mut self.agg.counters;
        c.total_rows_seen += 1;
        match outcome {
            RowOutcome::Dropped(DropReason::SummaryRow) => c.rows_dropped_summary_rows += 1,
            RowOutcome::Dropped(DropReason::MissingKeys) => c.rows_dropped_missing_keys += 1,
            RowOutcome::Dropped(DropReason::MissingYear) => c.rows_dropped_missing_year += 1,
            RowOutcome::Dropped(DropReason::NegativeStudents { cost_missing }) => {
                c.rows_with_missing_cost += u64::from(*cost_missing);
                c.rows_with_negative_students += 1;
            }
            RowOutcome::Kept(row) => {
                c.rows_with_missing_cost += u64::from(row.cost_missing);
                c.rows_with_missing_students += u64::from(row.students_missing);
                self.add_kept(row);
            }
        }
    }

    fn add_kept(&mut self, row: &CleanRow) {
        let sy = SubjectYearKey {
            school: row.school.clone(),
            subject_no: row.subject_no.clone(),
            subject: row.subject.clone(),
            year: row.year,
        };
        self.agg
            .subject_year
            .entry(sy)
            .or_default()
            .add(row.cost, row.students);
        let sch = SchoolYearKey {
            school: row.school.clone(),
            year: row.year,
        };
        self.agg
            .school_year
            .entry(sch)
            .or_default()
            .add(row.cost, row.students);
    }

    pub fn finish(mut self) -> Aggregation {
        let c = &mut self.agg.counters;
        c.subject_year_groups = self.agg.subject_year.len() as u64;
        c.school_year_groups = self.agg.school_year.len() as u64;
        for totals in self.agg.subject_year.values() {
            match compute_ratio(*totals).status {
                RatioStatus::Ok => {}
                RatioStatus::NoActivity => c.groups_no_activity += 1,
                RatioStatus::Undefined => c.groups_undefined += 1,
            }
        }
        self.agg
    }
}

pub fn fold<'a>(rows: impl IntoIterator<Item = &'a RowOutcome>) -> Aggregation {
    let mut folder = Folder::new();
    for row in rows {
        folder.push(row);
    }
    folder.finish()
}
