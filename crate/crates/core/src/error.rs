use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no sheet contains a header row with all required fields within {scan_rows} rows and {scan_cols} columns")]
    TableNotFound { scan_rows: u32, scan_cols: u32 },

    #[error("median of an empty list")]
    EmptyInput,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[cfg(feature = "io")]
    #[error("reading workbook {path}: {source}")]
    WorkbookRead {
        path: PathBuf,
        #[source]
        source: calamine::XlsxError,
    },

    #[cfg(feature = "io")]
    #[error("writing workbook: {0}")]
    WorkbookWrite(#[from] rust_xlsxwriter::XlsxError),
}

impl Error {
    #[cfg(feature = "io")]
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
