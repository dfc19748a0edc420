//! Scenario documents, empirical corpora, and output artifacts.
//!
//! Every file written here goes to a sibling temporary file first and is
//! renamed into place, so a failed run never leaves a partial artifact.

mod scenario;
mod svg;
mod table;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use scenario::{
    load_scenario, parse_scenario, save_scenario, CandidateSpec, GridSpec, ModelSpec, MuSpec, PolicySpec,
    PopulationSpec, PredictorSpec, AxisSpec, AtomSpec, BehavioralSpec, ComponentSpec, Scenario, ScenarioSpec, SweepSpec, TrueScoreSpec, SCENARIO_VERSION,
};
pub use svg::{render_sweep_svg, sweep_svg};
pub use table::{
    load_empirical_csv, read_sweep_csv, selection_csv, selection_summary_json, sweep_csv, validation_csv,
    write_sweep_csv, CorpusMode, SweepRow, SweepTable, ValidationRow,
};

use crate::error::Error;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("{path}: row {row}: {message}")]
    Row { path: PathBuf, row: usize, message: String },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Model(#[from] Error),
}

impl IoError {
    /// True for problems with the input documents rather than the run itself.
    pub fn is_validation(&self) -> bool {
        !matches!(self, IoError::Io { .. })
    }

    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        IoError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Re-roots a core validation error under `prefix` in the document.
    pub(crate) fn within(prefix: &str, err: Error) -> Self {
        match err {
            Error::InvalidParameter { field, reason } => IoError::Invalid {
                field: if prefix.is_empty() { field } else { format!("{prefix}.{field}") },
                message: reason,
            },
            other => IoError::Model(other),
        }
    }
}

pub type IoResult<T> = std::result::Result<T, IoError>;

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> IoResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(IoError::io(path, e));
    }
    Ok(())
}

/// Formats `x` with 9 significant digits, in the style of C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
