//! Locating the extract table inside a workbook and streaming its rows.
//!
//! The header search walks sheets in workbook order and, within each sheet,
//! the first [`DEFAULT_SCAN_ROWS`] rows restricted to the first
//! [`DEFAULT_SCAN_COLS`] columns. The first row whose cells cover every
//! [`LogicalField`] wins. Rows below it are then streamed one at a time from
//! the sheet XML, so only the current row is held in memory.

use std::fmt;

pub const DEFAULT_SCAN_ROWS: u32 = 30;
pub const DEFAULT_SCAN_COLS: u32 = 60;

/// The six extract columns the processor needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LogicalField {
    School,
    SubjectNo,
    Subject,
    TeachingSession,
    InclOncosts,
    StudentCount,
}

impl LogicalField {
    pub const ALL: [LogicalField; 6] = [
        LogicalField::School,
        LogicalField::SubjectNo,
        LogicalField::Subject,
        LogicalField::TeachingSession,
        LogicalField::InclOncosts,
        LogicalField::StudentCount,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Header text as it appears in the extract.
    pub fn canonical_name(self) -> &'static str {
        match self {
            LogicalField::School => "School",
            LogicalField::SubjectNo => "Subject No.",
            LogicalField::Subject => "Subject",
            LogicalField::TeachingSession => "Teaching Session",
            LogicalField::InclOncosts => "Incl Oncosts",
            LogicalField::StudentCount => "Student Count",
        }
    }
}

impl fmt::Display for LogicalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// Accepted header names. Entries are compared after [`normalize_header`],
/// so case, surrounding/internal whitespace and a trailing period never
/// matter. Add further variants here.
pub const HEADER_ALIASES: &[(&str, LogicalField)] = &[
    ("School", LogicalField::School),
    ("Subject No.", LogicalField::SubjectNo),
    ("Subject", LogicalField::Subject),
    ("Teaching Session", LogicalField::TeachingSession),
    ("Incl Oncosts", LogicalField::InclOncosts),
    ("Student Count", LogicalField::StudentCount),
];

/// Case-folds, trims, collapses internal whitespace runs to one space and
/// drops one trailing period.
pub fn normalize_header(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    if out.ends_with('.') {
        out.pop();
        let trimmed = out.trim_end().len();
        out.truncate(trimmed);
    }
    out
}

pub fn canonicalize_header(cell_text: &str) -> Option<LogicalField> {
    let key = normalize_header(cell_text);
    if key.is_empty() {
        return None;
    }
    HEADER_ALIASES
        .iter()
        .find(|(alias, _)| normalize_header(alias) == key)
        .map(|&(_, field)| field)
}

/// A worksheet cell value as the rules see it.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Text(String),
    Number(f64),
}

impl CellValue {
    /// Text rendering used for keys and header matching. Integral numbers
    /// render without a decimal point.
    pub fn to_text(&self) -> String {
        match self {
            CellValue::Text(s) => s.clone(),
            CellValue::Number(n) => format_number(*n),
        }
    }
}

pub(crate) fn format_number(n: f64) -> String {
    if n.is_finite() && n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

/// Where the extract table lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocatedTable {
    pub sheet_name: String,
    pub header_row_0based: u32,
    /// Worksheet column per [`LogicalField`], indexed by [`LogicalField::index`].
    pub col_index: [u32; 6],
}

impl LocatedTable {
    pub fn column(&self, field: LogicalField) -> u32 {
        self.col_index[field.index()]
    }
}

/// One worksheet row below the header, reduced to the six mapped columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawRow {
    pub cells: [Option<CellValue>; 6],
    pub source_row_0based: u32,
}

impl RawRow {
    pub fn empty(source_row_0based: u32) -> Self {
        RawRow {
            cells: Default::default(),
            source_row_0based,
        }
    }

    pub fn get(&self, field: LogicalField) -> Option<&CellValue> {
        self.cells[field.index()].as_ref()
    }

    pub fn set(&mut self, field: LogicalField, value: Option<CellValue>) {
        self.cells[field.index()] = value;
    }

    pub fn with(mut self, field: LogicalField, value: impl Into<CellValue>) -> Self {
        self.set(field, Some(value.into()));
        self
    }
}

impl From<&str> for CellValue {
    fn from(s: &str) -> Self {
        CellValue::Text(s.to_string())
    }
}

impl From<String> for CellValue {
    fn from(s: String) -> Self {
        CellValue::Text(s)
    }
}

impl From<f64> for CellValue {
    fn from(n: f64) -> Self {
        CellValue::Number(n)
    }
}

impl From<i64> for CellValue {
    fn from(n: i64) -> Self {
        CellValue::Number(n as f64)
    }
}

/// Per-row accumulator used while scanning for the header.
#[cfg(feature = "io")]
#[derive(Default)]
struct HeaderCandidate {
    cols: [Option<u32>; 6],
}

#[cfg(feature = "io")]
impl HeaderCandidate {
    fn offer(&mut self, col: u32, text: &str) {
        if let Some(field) = canonicalize_header(text) {
            let slot = &mut self.cols[field.index()];
            if slot.is_none_or(|existing| col < existing) {
                *slot = Some(col);
            }
        }
    }

    fn complete(&self) -> Option<[u32; 6]> {
        let mut out = [0u32; 6];
        for (dst, src) in out.iter_mut().zip(self.cols) {
            *dst = src?;
        }
        Some(out)
    }
}

#[cfg(feature = "io")]
pub use reader::{open_workbook, RowStream, XlsxWorkbook};

#[cfg(feature = "io")]
mod reader {
    use std::fs::File;
    use std::io::{BufReader, Read, Seek};
    use std::path::{Path, PathBuf};

    use calamine::{DataRef, Reader, Xlsx, XlsxCellReader};

    use super::{CellValue, HeaderCandidate, LocatedTable, LogicalField, RawRow};
    use crate::error::{Error, Result};

    /// An `.xlsx` workbook opened for header search and row streaming.
    pub struct XlsxWorkbook<RS> {
        inner: Xlsx<RS>,
        path: PathBuf,
    }

    pub fn open_workbook(path: impl AsRef<Path>) -> Result<XlsxWorkbook<BufReader<File>>> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        XlsxWorkbook::from_reader(BufReader::new(file), path)
    }

    pub(crate) fn convert(value: &DataRef<'_>) -> Option<CellValue> {
        match value {
            DataRef::Empty => None,
            DataRef::Int(i) => Some(CellValue::Number(*i as f64)),
            DataRef::Float(f) => Some(CellValue::Number(*f)),
            DataRef::String(s) => Some(CellValue::Text(s.clone())),
            DataRef::SharedString(s) => Some(CellValue::Text((*s).to_string())),
            DataRef::Bool(b) => Some(CellValue::Text(if *b { "TRUE" } else { "FALSE" }.into())),
            DataRef::DateTime(dt) => Some(CellValue::Number(dt.as_f64())),
            DataRef::DateTimeIso(s) | DataRef::DurationIso(s) => Some(CellValue::Text(s.clone())),
            DataRef::Error(e) => Some(CellValue::Text(e.to_string())),
        }
    }

    impl<RS: Read + Seek> XlsxWorkbook<RS> {
        pub fn from_reader(reader: RS, path: impl Into<PathBuf>) -> Result<Self> {
            let path = path.into();
            let inner = Xlsx::new(reader).map_err(|source| Error::WorkbookRead {
                path: path.clone(),
                source,
            })?;
            Ok(XlsxWorkbook { inner, path })
        }

        pub fn sheet_names(&self) -> Vec<String> {
            self.inner.sheet_names()
        }

        /// First sheet, then first row within `scan_rows`, whose first
        /// `scan_cols` cells name all six logical fields.
        pub fn locate_table(&mut self, scan_rows: u32, scan_cols: u32) -> Result<LocatedTable> {
            for sheet in self.sheet_names() {
                if let Some((row, cols)) = self.scan_sheet(&sheet, scan_rows, scan_cols)? {
                    return Ok(LocatedTable {
                        sheet_name: sheet,
                        header_row_0based: row,
                        col_index: cols,
                    });
                }
            }
            Err(Error::TableNotFound {
                scan_rows,
                scan_cols,
            })
        }

        fn scan_sheet(
            &mut self,
            sheet: &str,
            scan_rows: u32,
            scan_cols: u32,
        ) -> Result<Option<(u32, [u32; 6])>> {
            let mut candidates: Vec<HeaderCandidate> = Vec::new();
            candidates.resize_with(scan_rows as usize, Default::default);
            let path = self.path.clone();
            let wrap = |source| Error::WorkbookRead {
                path: path.clone(),
                source,
            };
            let mut cells = self.inner.worksheet_cells_reader(sheet).map_err(wrap)?;
            while let Some(cell) = cells.next_cell().map_err(wrap)? {
                let (row, col) = cell.get_position();
                if row >= scan_rows {
                    break;
                }
                if col >= scan_cols {
                    continue;
                }
                if let Some(value) = convert(cell.get_value()) {
                    candidates[row as usize].offer(col, &value.to_text());
                }
            }
            Ok(candidates
                .iter()
                .enumerate()
                .find_map(|(row, c)| c.complete().map(|cols| (row as u32, cols))))
        }

        /// Streams every row strictly below the header. Rows with no values
        /// that sit between populated rows are yielded as empty rows; the
        /// stream ends at the last row holding a value in any column.
        pub fn stream_rows(&mut self, located: &LocatedTable) -> Result<RowStream<'_, RS>> {
            let path = &self.path;
            let reader = self
                .inner
                .worksheet_cells_reader(&located.sheet_name)
                .map_err(|source| Error::WorkbookRead {
                    path: path.clone(),
                    source,
                })?;
            Ok(RowStream {
                cells: reader,
                col_index: located.col_index,
                next_row: located.header_row_0based + 1,
                pending: None,
                building: None,
                finished: false,
                path: self.path.clone(),
            })
        }
    }

    struct StreamCell {
        row: u32,
        field: Option<LogicalField>,
        value: Option<CellValue>,
    }

    /// Row iterator returned by [`XlsxWorkbook::stream_rows`].
    pub struct RowStream<'a, RS: Read + Seek> {
        cells: XlsxCellReader<'a, RS>,
        col_index: [u32; 6],
        next_row: u32,
        pending: Option<StreamCell>,
        building: Option<RawRow>,
        finished: bool,
        path: PathBuf,
    }

    impl<RS: Read + Seek> RowStream<'_, RS> {
        /// Next cell holding a value; valueless (styled) cells do not make a
        /// row present.
        fn read_cell(&mut self) -> Result<Option<StreamCell>> {
            loop {
                let cell = self
                    .cells
                    .next_cell()
                    .map_err(|source| Error::WorkbookRead {
                        path: self.path.clone(),
                        source,
                    })?;
                let Some(cell) = cell else {
                    return Ok(None);
                };
                if matches!(cell.get_value(), DataRef::Empty) {
                    continue;
                }
                let (row, col) = cell.get_position();
                let field = LogicalField::ALL
                    .into_iter()
                    .find(|f| self.col_index[f.index()] == col);
                let value = field.and_then(|_| convert(cell.get_value()));
                return Ok(Some(StreamCell { row, field, value }));
            }
        }
    }

    impl<RS: Read + Seek> Iterator for RowStream<'_, RS> {
        type Item = Result<RawRow>;

        fn next(&mut self) -> Option<Self::Item> {
            if self.finished {
                return None;
            }
            loop {
                let cell = match self.pending.take() {
                    Some(c) => c,
                    None => match self.read_cell() {
                        Ok(Some(c)) => c,
                        Ok(None) => {
                            self.finished = true;
                            return self.building.take().map(Ok);
                        }
                        Err(e) => {
                            self.finished = true;
                            return Some(Err(e));
                        }
                    },
                };
                if let Some(row) = self.building.as_mut() {
                    if cell.row == row.source_row_0based {
                        if let Some(field) = cell.field {
                            row.set(field, cell.value);
                        }
                        continue;
                    }
                    if cell.row < row.source_row_0based {
                        continue;
                    }
                    self.pending = Some(cell);
                    return self.building.take().map(Ok);
                }
                if cell.row < self.next_row {
                    // header or above, or out-of-order XML
                    continue;
                }
                if cell.row > self.next_row {
                    let gap = RawRow::empty(self.next_row);
                    self.next_row += 1;
                    self.pending = Some(cell);
                    return Some(Ok(gap));
                }
                let mut row = RawRow::empty(cell.row);
                if let Some(field) = cell.field {
                    row.set(field, cell.value);
                }
                self.next_row = cell.row + 1;
                self.building = Some(row);
            }
        }
    }
}
