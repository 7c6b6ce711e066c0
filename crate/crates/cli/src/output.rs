//! Table emission and output-path plumbing shared by every subcommand.
//!
//! CSV is the tabular workhorse: one fixed header row, `\n` line endings,
//! floats printed with Rust's shortest round-trip formatting so identical
//! runs produce identical bytes. Infinities print as `inf`/`-inf`, absent
//! optional cells as the empty string. JSON output serializes the same rows
//! structurally (note that serde_json renders non-finite floats as null).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Default output directory for relative `--out` paths.
pub const OUT_DIR_ENV: &str = "RELENT_OUT_DIR";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v == 0.0 {
        // Collapse negative zero.
        "0".to_string()
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Quotes a CSV cell only when it contains a delimiter, quote, or newline.
pub fn csv_cell(raw: &str) -> String {
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

pub fn csv_line(cells: &[String]) -> String {
    let mut line = cells
        .iter()
        .map(|c| csv_cell(c))
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

pub fn csv_document(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut doc = header.join(",");
    doc.push('\n');
    for row in rows {
        doc.push_str(&csv_line(row));
    }
    doc
}

pub fn json_document<T: Serialize>(rows: &[T]) -> String {
    let mut doc = serde_json::to_string_pretty(rows).expect("report serialization cannot fail");
    doc.push('\n');
    doc
}

/// Relative paths land under [`OUT_DIR_ENV`] when it is set.
pub fn resolve_out_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            return PathBuf::from(dir).join(path);
        }
    }
    path.to_path_buf()
}

/// Writes to the resolved path, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, content: &str) -> io::Result<()> {
    match out {
        None => io::stdout().write_all(content.as_bytes()),
        Some(path) => {
            let path = resolve_out_path(path);
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)?;
                }
            }
            fs::write(path, content)
        }
    }
}
