//! Input hashing and the two run logs.
//!
//! `cad_processor_execution.log` gets one tab-separated line per run:
//! status, input name, output name, input SHA-256. `cad_processor.log`
//! collects trace lines. Both are append-only.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const EXECUTION_LOG_NAME: &str = "cad_processor_execution.log";
pub const TRACE_LOG_NAME: &str = "cad_processor.log";
pub const HASH_CHUNK_SIZE: usize = 65536;
pub const STATUS_OK: &str = "OK";
pub const STATUS_ERROR: &str = "ERROR";
/// Placeholder for fields a failed run could not produce.
pub const UNAVAILABLE: &str = "-";

/// SHA-256 of the file bytes, read in fixed-size chunks, as lowercase hex.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; HASH_CHUNK_SIZE];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write as _;
    bytes
        .iter()
        .fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub status: String,
    pub input_name: String,
    pub output_name: String,
    pub input_sha256_hex: String,
    pub sheet_name: String,
    pub header_row_0based: Option<u32>,
}

impl RunRecord {
    pub fn ok(
        input_name: impl Into<String>,
        output_name: impl Into<String>,
        input_sha256_hex: impl Into<String>,
        sheet_name: impl Into<String>,
        header_row_0based: u32,
    ) -> Self {
        RunRecord {
            status: STATUS_OK.into(),
            input_name: input_name.into(),
            output_name: output_name.into(),
            input_sha256_hex: input_sha256_hex.into(),
            sheet_name: sheet_name.into(),
            header_row_0based: Some(header_row_0based),
        }
    }

    /// A failed run; empty fields are logged as `-`.
    pub fn error(input_name: &str, output_name: &str, input_sha256_hex: Option<&str>) -> Self {
        let or_dash = |s: &str| {
            if s.is_empty() {
                UNAVAILABLE.to_string()
            } else {
                s.to_string()
            }
        };
        RunRecord {
            status: STATUS_ERROR.into(),
            input_name: or_dash(input_name),
            output_name: or_dash(output_name),
            input_sha256_hex: input_sha256_hex
                .map_or_else(|| UNAVAILABLE.to_string(), str::to_string),
            sheet_name: UNAVAILABLE.into(),
            header_row_0based: None,
        }
    }

    pub fn execution_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\n",
            self.status, self.input_name, self.output_name, self.input_sha256_hex
        )
    }
}

fn append(path: &Path, text: &str) -> Result<()> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn append_execution_log(record: &RunRecord, log_path: impl AsRef<Path>) -> Result<()> {
    append(log_path.as_ref(), &record.execution_line())
}

/// Append-only trace log. `verbose` echoes lines to stderr; the file always
/// receives them.
#[derive(Debug)]
pub struct TraceLog {
    path: PathBuf,
    verbose: bool,
}

impl TraceLog {
    pub fn new(path: impl Into<PathBuf>, verbose: bool) -> Self {
        TraceLog {
            path: path.into(),
            verbose,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn trace(&self, message: &str) -> Result<()> {
        self.write("INFO", message)
    }

    pub fn error(&self, message: &str) -> Result<()> {
        self.write("ERROR", message)
    }

    fn write(&self, level: &str, message: &str) -> Result<()> {
        if self.verbose {
            eprintln!("{level} {message}");
        }
        append(&self.path, &format!("{level} {message}\n"))
    }
}

pub fn trace(message: &str, log_path: impl AsRef<Path>) -> Result<()> {
    TraceLog::new(log_path.as_ref(), false).trace(message)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digests() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty");
        std::fs::write(&empty, b"").unwrap();
        assert_eq!(
            sha256_file(&empty).unwrap(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        let abc = dir.path().join("abc");
        std::fs::write(&abc, b"abc").unwrap();
        assert_eq!(
            sha256_file(&abc).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn multi_chunk_file_and_single_byte_change() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big");
        let mut bytes: Vec<u8> = (0..(HASH_CHUNK_SIZE * 2 + 17))
            .map(|i| (i % 251) as u8)
            .collect();
        std::fs::write(&path, &bytes).unwrap();
        let first = sha256_file(&path).unwrap();
        assert_eq!(first, hex(&Sha256::digest(&bytes)));
        assert!(is_sha256_hex(&first));
        bytes[HASH_CHUNK_SIZE] ^= 1;
        std::fs::write(&path, &bytes).unwrap();
        assert_ne!(sha256_file(&path).unwrap(), first);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            sha256_file("/nonexistent/x.xlsx"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn execution_log_appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join(EXECUTION_LOG_NAME);
        let hash = "a".repeat(64);
        let ok = RunRecord::ok("in.xlsx", "out.xlsx", hash.clone(), "data", 0);
        append_execution_log(&ok, &log).unwrap();
        let err = RunRecord::error("in.xlsx", "out.xlsx", None);
        append_execution_log(&err, &log).unwrap();
        let text = std::fs::read_to_string(&log).unwrap();
        assert_eq!(
            text,
            format!("OK\tin.xlsx\tout.xlsx\t{hash}\nERROR\tin.xlsx\tout.xlsx\t-\n")
        );
    }

    #[test]
    fn trace_appends() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join(TRACE_LOG_NAME);
        trace("first", &log).unwrap();
        TraceLog::new(&log, false).trace("second").unwrap();
        assert_eq!(
            std::fs::read_to_string(&log).unwrap(),
            "INFO first\nINFO second\n"
        );
    }
}
