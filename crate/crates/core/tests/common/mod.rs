//! Fixture workbooks for the integration tests.
//!
//! Generators keep their own tally of what they planted so tests can compare
//! processor counters against the generator rather than against the
//! processor itself.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_xlsxwriter::{DocProperties, ExcelDateTime, Workbook};

pub const HEADERS: [&str; 6] = [
    "School",
    "Subject No.",
    "Subject",
    "Teaching Session",
    "Incl Oncosts",
    "Student Count",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
}

pub fn t(s: &str) -> Option<Cell> {
    Some(Cell::Text(s.to_string()))
}

pub fn n(x: f64) -> Option<Cell> {
    Some(Cell::Num(x))
}

pub type Row = [Option<Cell>; 6];

pub fn row(school: &str, no: &str, subject: &str, session: &str, cost: f64, students: i64) -> Row {
    [
        t(school),
        t(no),
        t(subject),
        t(session),
        n(cost),
        n(students as f64),
    ]
}

#[derive(Debug, Clone, Default)]
pub struct Sheet {
    pub name: String,
    pub cells: Vec<(u32, u16, Cell)>,
}

impl Sheet {
    pub fn new(name: &str) -> Self {
        Sheet {
            name: name.into(),
            cells: Vec::new(),
        }
    }

    pub fn put(&mut self, row: u32, col: u16, cell: Cell) -> &mut Self {
        self.cells.push((row, col, cell));
        self
    }

    /// Header at `header_row`, columns A to F, data rows directly below.
    pub fn extract(name: &str, header_row: u32, rows: &[Row]) -> Self {
        let mut s = Sheet::new(name);
        for (c, h) in HEADERS.iter().enumerate() {
            s.put(header_row, c as u16, Cell::Text(h.to_string()));
        }
        for (i, r) in rows.iter().enumerate() {
            for (c, cell) in r.iter().enumerate() {
                if let Some(cell) = cell {
                    s.put(header_row + 1 + i as u32, c as u16, cell.clone());
                }
            }
        }
        s
    }
}

/// Writes the sheets with fixed document properties so fixture bytes, and
/// therefore their hashes, are stable.
pub fn write_workbook(path: &Path, sheets: &[Sheet]) {
    let mut wb = Workbook::new();
    let props = DocProperties::new()
        .set_author("fixtures")
        .set_creation_datetime(&ExcelDateTime::from_ymd(2020, 6, 1).unwrap());
    wb.set_properties(&props);
    for sheet in sheets {
        let ws = wb.add_worksheet();
        ws.set_name(&sheet.name).unwrap();
        for (r, c, cell) in &sheet.cells {
            match cell {
                Cell::Text(s) => ws.write_string(*r, *c, s).unwrap(),
                Cell::Num(x) => ws.write_number(*r, *c, *x).unwrap(),
            };
        }
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).unwrap();
    }
    wb.save(path).unwrap();
}

pub fn write_extract(path: &Path, rows: &[Row]) {
    write_workbook(path, &[Sheet::extract("data", 0, rows)]);
}

/// A project directory with `inputs/<name>` in place.
pub struct Project {
    pub dir: tempfile::TempDir,
}

impl Project {
    pub fn with_input(rows: &[Row]) -> Self {
        let p = Project::empty();
        write_extract(&p.input(), rows);
        p
    }

    pub fn with_sheets(sheets: &[Sheet]) -> Self {
        let p = Project::empty();
        write_workbook(&p.input(), sheets);
        p
    }

    pub fn empty() -> Self {
        Project {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn base(&self) -> &Path {
        self.dir.path()
    }

    pub fn input(&self) -> PathBuf {
        self.base().join("inputs").join("CAD_Contract.xlsx")
    }

    pub fn output(&self) -> PathBuf {
        self.base()
            .join("outputs")
            .join("Processed_CAD_Contract.xlsx")
    }

    pub fn execution_log(&self) -> String {
        std::fs::read_to_string(self.base().join("cad_processor_execution.log")).unwrap_or_default()
    }

    pub fn trace_log(&self) -> String {
        std::fs::read_to_string(self.base().join("cad_processor.log")).unwrap_or_default()
    }

    /// Runs the processor with `--base-dir` plus `extra` flags.
    pub fn run(&self, extra: &[&str]) -> i32 {
        let mut args = vec![
            "cad-processor".to_string(),
            "--base-dir".to_string(),
            self.base().display().to_string(),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        cad_processor::cli::main_with_args(args)
    }
}

/// What a generator planted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Planted {
    pub rows: u64,
    pub summary: u64,
    pub missing_keys: u64,
    pub missing_year: u64,
    pub negative: u64,
    pub missing_cost: u64,
    pub missing_students: u64,
}

impl Planted {
    pub fn kept(&self) -> u64 {
        self.rows - self.summary - self.missing_keys - self.missing_year - self.negative
    }
}

const SCHOOLS: [&str; 6] = [
    "Arts",
    "Business",
    "Engineering",
    "Health",
    "Law",
    "Science",
];
const SUBJECTS: [(&str, &str); 5] = [
    ("100", "Foundations"),
    ("210", "Methods"),
    ("220", "Practice"),
    ("305", "Studio"),
    ("410", "Capstone"),
];
const SESSIONS: [&str; 4] = ["Autumn {}", "Spring {}", "{} Summer Term", "S1-{}"];

fn session<R: Rng>(rng: &mut R, years: &[i32]) -> String {
    let year = years[rng.random_range(0..years.len())];
    SESSIONS[rng.random_range(0..SESSIONS.len())].replace("{}", &year.to_string())
}

fn kept_row<R: Rng>(rng: &mut R, years: &[i32]) -> Row {
    let school = SCHOOLS[rng.random_range(0..SCHOOLS.len())];
    let (no, subject) = SUBJECTS[rng.random_range(0..SUBJECTS.len())];
    let cents: i64 = rng.random_range(0..2_000_000);
    let students: i64 = if rng.random_bool(0.1) {
        0
    } else {
        rng.random_range(1..60)
    };
    let cost = if rng.random_bool(0.05) {
        0.0
    } else {
        cents as f64 / 100.0
    };
    let mut r = row(school, no, subject, &session(rng, years), cost, students);
    if rng.random_bool(0.3) {
        // Subject numbers stored as numbers must key the same as text.
        r[1] = n(no.parse().unwrap());
    }
    r
}

/// Mostly clean rows with every anomaly kind mixed in at random.
pub fn random_extract(seed: u64, rows: usize) -> (Vec<Row>, Planted) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let years = [2022, 2023, 2024];
    let mut planted = Planted::default();
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        planted.rows += 1;
        let mut r = kept_row(&mut rng, &years);
        match rng.random_range(0..100) {
            0..=2 => {
                planted.summary += 1;
                let marker = ["Total", " sum ", "RESULT"][rng.random_range(0..3)];
                r[if rng.random_bool(0.5) { 0 } else { 2 }] = t(marker);
            }
            3..=4 => {
                planted.missing_keys += 1;
                r[rng.random_range(0..3)] = if rng.random_bool(0.5) { None } else { t("  ") };
            }
            5 => {
                planted.missing_year += 1;
                r[3] = t(["Session 12345", "Semester A", "1899 intake"][rng.random_range(0..3)]);
            }
            6 => {
                planted.negative += 1;
                r[5] = n(-(rng.random_range(1..5) as f64));
            }
            7..=9 => {
                planted.missing_cost += 1;
                r[4] = if rng.random_bool(0.5) { None } else { t("n/a") };
            }
            10..=11 => {
                planted.missing_students += 1;
                r[5] = if rng.random_bool(0.5) { None } else { n(2.5) };
            }
            _ => {}
        }
        out.push(r);
    }
    (out, planted)
}

/// Exactly the counts quoted for the reference extract, shuffled.
pub fn counter_fixture(seed: u64) -> (Vec<Row>, Planted) {
    const TOTAL: usize = 12_340;
    #[derive(Clone, Copy)]
    enum Kind {
        Summary,
        MissingKeys,
        MissingYear,
        Negative,
        MissingCost,
        MissingStudents,
        Clean,
    }
    let mut kinds = Vec::with_capacity(TOTAL);
    kinds.extend(std::iter::repeat_n(Kind::Summary, 80));
    kinds.extend(std::iter::repeat_n(Kind::MissingKeys, 12));
    kinds.extend(std::iter::repeat_n(Kind::MissingYear, 5));
    kinds.extend(std::iter::repeat_n(Kind::Negative, 1));
    kinds.extend(std::iter::repeat_n(Kind::MissingCost, 37));
    kinds.extend(std::iter::repeat_n(Kind::MissingStudents, 22));
    kinds.resize(TOTAL, Kind::Clean);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kinds.shuffle(&mut rng);

    let years = [2023, 2024, 2025];
    let mut planted = Planted::default();
    let rows = kinds
        .into_iter()
        .map(|kind| {
            planted.rows += 1;
            let mut r = kept_row(&mut rng, &years);
            match kind {
                Kind::Summary => {
                    planted.summary += 1;
                    r[0] = t("Total");
                }
                Kind::MissingKeys => {
                    planted.missing_keys += 1;
                    r[1] = None;
                }
                Kind::MissingYear => {
                    planted.missing_year += 1;
                    r[3] = t("Session 12345");
                }
                Kind::Negative => {
                    planted.negative += 1;
                    r[5] = n(-1.0);
                }
                Kind::MissingCost => {
                    planted.missing_cost += 1;
                    r[4] = None;
                }
                Kind::MissingStudents => {
                    planted.missing_students += 1;
                    r[5] = None;
                }
                Kind::Clean => {}
            }
            r
        })
        .collect();
    (rows, planted)
}
