//! Deterministic processing of casual-academic (CAD) cost extract workbooks.
//!
//! The pipeline locates the extract table in an `.xlsx` workbook, streams and
//! classifies its rows, aggregates inclusive on-costs and student counts into
//! subject-year and school-year groups, derives cost-per-student ratios, and
//! assigns per-year fuzzy Low/Medium/High bands anchored at the minimum,
//! median and maximum of each year's eligible ratios. The processed workbook
//! carries a SHA-256 of the input bytes so a run can be re-checked later with
//! [`verify`].
//!
//! The pure stages ([`rules`], [`aggregate`], [`banding`]) build without the
//! default `io` feature, which is how the browser demo consumes this crate.

#![forbid(unsafe_code)]

pub mod aggregate;
pub mod banding;
pub mod error;
pub mod ingest;
pub mod rules;

#[cfg(feature = "io")]
pub mod cli;
#[cfg(feature = "io")]
pub mod emit;
#[cfg(feature = "io")]
pub mod provenance;
#[cfg(feature = "io")]
pub mod verify;

pub use error::{Error, Result};
