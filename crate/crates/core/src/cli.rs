//! Command line, path resolution and the end-to-end run.
//!
//! ```text
//! cad-processor [--base-dir DIR] [--input-filename NAME] [--output-filename NAME]
//!               [--verbose] [--no-processing-summary]
//! cad-processor verify --input PATH --processed PATH [--format text|tsv]
//! ```
//!
//! Inputs resolve under `<base>/inputs/`, outputs under `<base>/outputs/`,
//! and both logs live directly in `<base>`. Without `--base-dir` the base is
//! the current working directory.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::aggregate::Folder;
use crate::banding::{band_year, compute_anchors};
use crate::emit::{
    save_workbook, write_fuzzy_bands, write_processing_summary, write_report, write_trend_analysis,
    WorkbookPlan,
};
use crate::error::{Error, Result};
use crate::ingest::{open_workbook, DEFAULT_SCAN_COLS, DEFAULT_SCAN_ROWS};
use crate::provenance::{
    append_execution_log, sha256_file, RunRecord, TraceLog, EXECUTION_LOG_NAME, TRACE_LOG_NAME,
};
use crate::rules::classify_row;
use crate::verify::{report_findings, verify, ReportFormat};

pub const DEFAULT_INPUT_FILENAME: &str = "CAD_Contract.xlsx";
pub const DEFAULT_OUTPUT_FILENAME: &str = "Processed_CAD_Contract.xlsx";
pub const INPUTS_DIR: &str = "inputs";
pub const OUTPUTS_DIR: &str = "outputs";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cad-processor",
    version,
    about = "Process a CAD cost extract workbook into a cost-per-student report with fuzzy bands",
    args_conflicts_with_subcommands = true
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    #[command(flatten)]
    process: ProcessArgs,
}

#[derive(Debug, Args)]
struct ProcessArgs {
    /// Project root holding inputs/ and outputs/ (default: current directory)
    #[arg(long, value_name = "DIR")]
    base_dir: Option<PathBuf>,
    /// Input workbook name, resolved under inputs/
    #[arg(long, value_name = "NAME", default_value = DEFAULT_INPUT_FILENAME)]
    input_filename: String,
    /// Output workbook name, resolved under outputs/
    #[arg(long, value_name = "NAME", default_value = DEFAULT_OUTPUT_FILENAME)]
    output_filename: String,
    /// Echo trace lines to stderr
    #[arg(long)]
    verbose: bool,
    /// Omit the Processing Summary sheet
    #[arg(long)]
    no_processing_summary: bool,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Re-aggregate an input snapshot and check a processed workbook against it
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, PartialEq, Eq, Args)]
pub struct VerifyArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub processed: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Tsv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub base_dir: Option<PathBuf>,
    pub input_filename: String,
    pub output_filename: String,
    pub verbose: bool,
    pub include_processing_summary: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            base_dir: None,
            input_filename: DEFAULT_INPUT_FILENAME.into(),
            output_filename: DEFAULT_OUTPUT_FILENAME.into(),
            verbose: false,
            include_processing_summary: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Process(Config),
    Verify(VerifyArgs),
}

/// `argv` includes the program name. Errors carry clap's usage text and
/// exit code (2 for usage errors).
pub fn parse_args<I, T>(argv: I) -> std::result::Result<Command, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    Ok(match cli.command {
        Some(Sub::Verify(v)) => Command::Verify(v),
        None => {
            let p = cli.process;
            Command::Process(Config {
                base_dir: p.base_dir,
                input_filename: p.input_filename,
                output_filename: p.output_filename,
                verbose: p.verbose,
                include_processing_summary: !p.no_processing_summary,
            })
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedPaths {
    pub input_path: PathBuf,
    pub output_path: PathBuf,
    pub log_dir: PathBuf,
}

impl ResolvedPaths {
    /// Pure path arithmetic; nothing is checked or created.
    pub fn for_config(config: &Config) -> Self {
        let base = config
            .base_dir
            .clone()
            .unwrap_or_else(|| std::env::current_dir().unwrap_or_else(|_| PathBuf::from(".")));
        ResolvedPaths {
            input_path: base.join(INPUTS_DIR).join(&config.input_filename),
            output_path: base.join(OUTPUTS_DIR).join(&config.output_filename),
            log_dir: base,
        }
    }

    pub fn execution_log(&self) -> PathBuf {
        self.log_dir.join(EXECUTION_LOG_NAME)
    }

    pub fn trace_log(&self) -> PathBuf {
        self.log_dir.join(TRACE_LOG_NAME)
    }
}

/// Resolves paths, creates the outputs directory and checks the input
/// exists.
pub fn resolve_paths(config: &Config) -> Result<ResolvedPaths> {
    let paths = ResolvedPaths::for_config(config);
    if let Some(out_dir) = paths.output_path.parent() {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    }
    if !paths.input_path.is_file() {
        return Err(Error::io(
            &paths.input_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input workbook not found"),
        ));
    }
    Ok(paths)
}

/// Failure of a run, with the input hash when it was computed before the
/// failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub input_sha256_hex: Option<String>,
}

impl<E: Into<Error>> From<E> for RunFailure {
    fn from(e: E) -> Self {
        RunFailure {
            error: e.into(),
            input_sha256_hex: None,
        }
    }
}

/// hash, locate, stream and classify, fold, ratios, anchors, band, emit.
/// Trace lines are written as each stage completes.
pub fn process(
    input_path: &Path,
    output_path: &Path,
    config: &Config,
    trace: &TraceLog,
) -> std::result::Result<RunRecord, RunFailure> {
    let hash = sha256_file(input_path)?;
    trace.trace(&format!("Input SHA-256: {hash}"))?;
    let with_hash = |error: Error| RunFailure {
        error,
        input_sha256_hex: Some(hash.clone()),
    };

    let mut workbook = open_workbook(input_path).map_err(with_hash)?;
    let located = workbook
        .locate_table(DEFAULT_SCAN_ROWS, DEFAULT_SCAN_COLS)
        .map_err(with_hash)?;
    trace
        .trace(&format!(
            "Detected input table: sheet={} header_row={} (0-based)",
            located.sheet_name, located.header_row_0based
        ))
        .map_err(with_hash)?;

    let mut folder = Folder::new();
    for row in workbook.stream_rows(&located).map_err(with_hash)? {
        let row = row.map_err(with_hash)?;
        folder.push(&classify_row(&row));
    }
    let agg = folder.finish();
    let c = &agg.counters;
    trace
        .trace(&format!(
            "Rows seen: {} (kept {}); subject-year groups: {}; school-year groups: {}",
            c.total_rows_seen,
            c.rows_kept(),
            c.subject_year_groups,
            c.school_year_groups
        ))
        .map_err(with_hash)?;

    let ratios = agg.school_year_ratios();
    let anchors = compute_anchors(&ratios);
    let anchored = anchors.values().filter(|a| a.is_some()).count();
    trace
        .trace(&format!(
            "Anchors computed: {anchored} of {} years",
            anchors.len()
        ))
        .map_err(with_hash)?;

    let banding = band_year(&ratios, &anchors);
    trace
        .trace(&format!("Fuzzy band records: {}", banding.records.len()))
        .map_err(with_hash)?;

    let record = RunRecord::ok(
        &config.input_filename,
        &config.output_filename,
        hash.clone(),
        &located.sheet_name,
        located.header_row_0based,
    );
    let summary = config
        .include_processing_summary
        .then(|| write_processing_summary(&record, &agg.counters, &anchors));
    let plan = WorkbookPlan::new(
        summary,
        write_trend_analysis(&ratios, &anchors),
        write_report(&agg.subject_year),
        write_fuzzy_bands(&banding),
    );
    save_workbook(&plan, output_path).map_err(with_hash)?;
    trace
        .trace(&format!("Output written: {}", output_path.display()))
        .map_err(with_hash)?;
    Ok(record)
}

/// Runs one processing invocation and returns the exit status. The
/// execution log receives exactly one line either way.
pub fn run(config: &Config) -> i32 {
    let paths = ResolvedPaths::for_config(config);
    let trace = TraceLog::new(paths.trace_log(), config.verbose);
    let outcome = (|| {
        std::fs::create_dir_all(&paths.log_dir).map_err(|e| Error::io(&paths.log_dir, e))?;
        trace.trace("Run started")?;
        trace.trace(&format!(
            "Resolved input path: {}",
            paths.input_path.display()
        ))?;
        resolve_paths(config)?;
        process(&paths.input_path, &paths.output_path, config, &trace)
    })();

    match outcome {
        Ok(record) => {
            let logged = append_execution_log(&record, paths.execution_log())
                .and_then(|()| trace.trace("Run completed: OK"));
            match logged {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_RUNTIME_ERROR
                }
            }
        }
        Err(failure) => {
            eprintln!("error: {}", failure.error);
            let _ = trace.error(&failure.error.to_string());
            let record = RunRecord::error(
                &config.input_filename,
                &config.output_filename,
                failure.input_sha256_hex.as_deref(),
            );
            if let Err(e) = append_execution_log(&record, paths.execution_log()) {
                eprintln!("error: {e}");
            }
            EXIT_RUNTIME_ERROR
        }
    }
}

pub fn run_verify(args: &VerifyArgs) -> i32 {
    let format = match args.format {
        FormatArg::Text => ReportFormat::Text,
        FormatArg::Tsv => ReportFormat::Tsv,
    };
    match verify(&args.input, &args.processed) {
        Ok(report) => {
            print!("{}", report_findings(&report.findings, format));
            if report.failures() == 0 {
                EXIT_OK
            } else {
                EXIT_RUNTIME_ERROR
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME_ERROR
        }
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_args(argv) {
        Ok(Command::Process(config)) => run(&config),
        Ok(Command::Verify(args)) => run_verify(&args),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}
