//! Deterministic report output.

use serde::Serialize;
use std::fmt;
use std::path::{Path, PathBuf};

/// Floats in CSV reports: 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text; an empty row set gives the header line alone.
pub fn csv<I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Pretty JSON with a trailing newline. Struct fields keep declaration order,
/// maps are sorted, floats use the shortest round-trip representation.
pub fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values serialize");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IoFailure {
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for IoFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot write {}: {}", self.path.display(), self.message)
    }
}

impl std::error::Error for IoFailure {}

/// Writes `contents` to `path`, creating parent directories.
pub fn emit_report(path: &Path, contents: &str) -> Result<(), IoFailure> {
    let fail = |e: std::io::Error| IoFailure {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(fail)?;
        }
    }
    std::fs::write(path, contents).map_err(fail)
}
