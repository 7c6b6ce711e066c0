//! `relent contours`: relative-entropy landscape over the 3-simplex.

use std::path::Path;

use relent_core::secondlaw::contour_grid;

use crate::output::{csv_document, emit, fmt_f64, json_document, Format};
use crate::{CmdResult, Failure};

pub const HEADER: [&str; 4] = ["p1", "p2", "p3", "rel_entropy"];

pub fn run(resolution: usize, out: Option<&Path>, format: Format) -> CmdResult {
    let rows = contour_grid(resolution)?;
    let content = match format {
        Format::Csv => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.p1),
                        fmt_f64(r.p2),
                        fmt_f64(r.p3),
                        fmt_f64(r.rel_entropy),
                    ]
                })
                .collect();
            csv_document(&HEADER, &cells)
        }
        Format::Json => json_document(&rows),
    };
    emit(out, &content).map_err(|e| Failure::config(format!("cannot write output: {e}")))
}
