//! `relent geometry`: entropy-current checks on flat spacetime grids.
//!
//! Preset mode builds a named field configuration on the base grid and on
//! `--refine` successively halved grids, reporting divergence and Killing
//! extrema plus the diamond-balance residual per level with the coarse/fine
//! residual ratio (≈ 4 for smooth fields under the second-order schemes).
//! Config mode evaluates one explicit grid from a JSON file.
//!
//! Equilibrium presets carry built-in verdicts: uniform and affine-β
//! configurations must conserve the entropy current, and uniform ones must
//! have vanishing Killing residual. Violations exit with code 2.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use relent_core::geometry::{
    diamond_balance, divergence, entropy_current, killing_residual, Diamond, FieldGrid,
    GridParams, PresetRegistry,
};

use crate::output::{csv_document, emit, fmt_f64, fmt_opt, json_document, Format};
use crate::{CmdResult, Failure};

/// Conservation bound for equilibrium presets.
pub const DIVERGENCE_TOL: f64 = 1e-10;
/// Equilibrium bound on the Killing residual for uniform presets.
pub const KILLING_TOL: f64 = 1e-12;
/// Balance residuals below this are round-off; no ratio is reported.
pub const RATIO_FLOOR: f64 = 1e-14;

pub const HEADER: [&str; 11] = [
    "level",
    "nt",
    "nx",
    "dt",
    "dx",
    "max_abs_divergence",
    "max_killing_residual",
    "volume_integral",
    "boundary_integral",
    "balance_residual",
    "ratio",
];

pub struct Args {
    pub preset: Option<String>,
    pub config: Option<PathBuf>,
    pub list: bool,
    pub refine: u32,
    pub base: GridParams,
    pub out: Option<PathBuf>,
    pub format: Format,
}

#[derive(Serialize)]
struct Row {
    level: u32,
    nt: usize,
    nx: usize,
    dt: f64,
    dx: f64,
    max_abs_divergence: f64,
    max_killing_residual: f64,
    volume_integral: Option<f64>,
    boundary_integral: Option<f64>,
    balance_residual: Option<f64>,
    /// Coarser residual over this one; empty at the base level or at the
    /// round-off floor.
    ratio: Option<f64>,
}

/// Largest diamond that keeps one interior point of margin, centered.
fn centered_diamond(grid: &FieldGrid) -> Option<Diamond> {
    let (ct, cx) = ((grid.nt() - 1) / 2, (grid.nx() - 1) / 2);
    let limit = [
        ct as isize - 1,
        grid.nt() as isize - 2 - ct as isize,
        cx as isize - 1,
        grid.nx() as isize - 2 - cx as isize,
    ]
    .into_iter()
    .min()
    .unwrap();
    (limit >= 1).then(|| Diamond {
        center_t: ct,
        center_x: cx,
        half_width: limit as usize,
        past_oriented: false,
    })
}

fn evaluate_level(grid: &FieldGrid, level: u32, diamond: Option<&Diamond>) -> Result<Row, Failure> {
    let s = entropy_current(grid)?;
    let div = divergence(grid, &s)?;
    let killing = killing_residual(grid)?;
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let balance = diamond
        .map(|d| diamond_balance(grid, d, &s))
        .transpose()?;
    Ok(Row {
        level,
        nt: grid.nt(),
        nx: grid.nx(),
        dt: grid.dt(),
        dx: grid.dx(),
        max_abs_divergence: max_abs(&div),
        max_killing_residual: max_abs(&killing),
        volume_integral: balance.as_ref().map(|b| b.volume_integral),
        boundary_integral: balance.as_ref().map(|b| b.boundary_integral),
        balance_residual: balance.as_ref().map(|b| b.residual),
        ratio: None,
    })
}

fn fill_ratios(rows: &mut [Row]) {
    for i in 1..rows.len() {
        if let (Some(coarse), Some(fine)) = (rows[i - 1].balance_residual, rows[i].balance_residual)
        {
            if fine > RATIO_FLOOR {
                rows[i].ratio = Some(coarse / fine);
            }
        }
    }
}

/// Verdict thresholds a preset is expected to satisfy at every level.
fn preset_expectations(kind: &str) -> (Option<f64>, Option<f64>) {
    match kind {
        "vacuum" | "rest_fluid" | "boosted_fluid" => (Some(DIVERGENCE_TOL), Some(KILLING_TOL)),
        "gradient_beta" => (Some(DIVERGENCE_TOL), None),
        _ => (None, None),
    }
}

pub fn run(args: Args) -> CmdResult {
    let registry = PresetRegistry::with_builtin();
    if args.list {
        let mut listing = String::new();
        for kind in registry.kinds() {
            listing.push_str(kind);
            listing.push('\n');
        }
        return emit(args.out.as_deref(), &listing)
            .map_err(|e| Failure::config(format!("cannot write output: {e}")));
    }

    let mut rows = Vec::new();
    let mut violations = Vec::new();
    match (&args.preset, &args.config) {
        (Some(kind), None) => {
            let (div_tol, killing_tol) = preset_expectations(kind);
            for level in 0..=args.refine {
                let scale = 1usize << level;
                let params = GridParams {
                    nt: (args.base.nt - 1) * scale + 1,
                    nx: (args.base.nx - 1) * scale + 1,
                    dt: args.base.dt / scale as f64,
                    dx: args.base.dx / scale as f64,
                };
                let grid = registry.build(kind, &params)?;
                let diamond = centered_diamond(&grid);
                let row = evaluate_level(&grid, level, diamond.as_ref())?;
                if let Some(tol) = div_tol {
                    if row.max_abs_divergence > tol {
                        violations.push(json!({
                            "level": level,
                            "check": "divergence",
                            "value": row.max_abs_divergence,
                            "tolerance": tol,
                        }));
                    }
                }
                if let Some(tol) = killing_tol {
                    if row.max_killing_residual > tol {
                        violations.push(json!({
                            "level": level,
                            "check": "killing_residual",
                            "value": row.max_killing_residual,
                            "tolerance": tol,
                        }));
                    }
                }
                rows.push(row);
            }
        }
        (None, Some(path)) => {
            if args.refine > 0 {
                return Err(Failure::config(
                    "refinement needs an analytic preset; explicit grids cannot be refined",
                ));
            }
            let grid: FieldGrid = crate::commands::load_config(path)?;
            let diamond = centered_diamond(&grid);
            rows.push(evaluate_level(&grid, 0, diamond.as_ref())?);
        }
        _ => {
            return Err(Failure::config(
                "exactly one of --preset or --config is required",
            ));
        }
    }
    fill_ratios(&mut rows);

    let content = match args.format {
        Format::Csv => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.level.to_string(),
                        r.nt.to_string(),
                        r.nx.to_string(),
                        fmt_f64(r.dt),
                        fmt_f64(r.dx),
                        fmt_f64(r.max_abs_divergence),
                        fmt_f64(r.max_killing_residual),
                        fmt_opt(r.volume_integral),
                        fmt_opt(r.boundary_integral),
                        fmt_opt(r.balance_residual),
                        fmt_opt(r.ratio),
                    ]
                })
                .collect();
            csv_document(&HEADER, &cells)
        }
        Format::Json => json_document(&rows),
    };
    emit(args.out.as_deref(), &content)
        .map_err(|e| Failure::config(format!("cannot write output: {e}")))?;

    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation {
            summary: format!("{} geometry checks failed", violations.len()),
            report: json!({ "command": "geometry", "failures": violations }),
        })
    }
}
