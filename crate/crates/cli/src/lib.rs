//! The `dualexp` command-line tool as a library, so the binary stays a thin
//! shell and tests can drive it in-process.

use std::ffi::OsString;
use std::io::Write;

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_args, FusionModeArg, PipelineConfig};
pub use error::CliError;
pub use run::{run_batch, run_single, BatchOutcome, BatchSummary, RunReport};

fn emit(out: &mut impl Write, value: &impl serde::Serialize) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out).map_err(serde_json::Error::io)?;
    Ok(())
}

fn execute(argv: Vec<OsString>, out: &mut impl Write) -> Result<i32, CliError> {
    let config = parse_args(argv)?;
    if config.input.is_dir() {
        let outcome = run_batch(&config)?;
        for report in &outcome.reports {
            emit(out, report)?;
        }
        emit(out, &serde_json::json!({ "summary": outcome.summary }))?;
        Ok(outcome.exit_code())
    } else {
        emit(out, &run_single(&config)?)?;
        Ok(0)
    }
}

/// Runs the tool and returns its exit code. Reports go to `out` as one JSON
/// object per line; diagnostics go to `err`.
pub fn main_with<I, T>(argv: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    match execute(argv, out) {
        Ok(code) => code,
        Err(CliError::Info(text)) => {
            let _ = write!(out, "{text}");
            0
        }
        Err(e) => {
            let text = e.to_string();
            let _ = write!(err, "error: {}", text.trim_start_matches("error: "));
            if !text.ends_with('\n') {
                let _ = writeln!(err);
            }
            e.exit_code()
        }
    }
}
