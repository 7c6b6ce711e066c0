//! `relent lightcone`: brickwork diamond runs over a qubit chain.
//!
//! One trace row per (λ, τ) pair, with the per-step locality comparison
//! merged in: `delta_rel_local − delta_rel_global` is the information that
//! escaped the active interval during the step (empty at τ = 0, where no
//! step has happened).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use relent_core::lightcone::{
    self, ChainSpec, DiamondSchedule, InitialState, SliceStep,
};

use crate::commands::load_config;
use crate::output::{csv_document, emit, fmt_f64, fmt_opt, json_document, Format};
use crate::{CmdResult, Failure};

/// Production beyond this is counted as a monotonicity violation.
pub const PRODUCTION_TOL: f64 = 1e-9;

pub const HEADER: [&str; 10] = [
    "lambda",
    "tau",
    "rel_global",
    "rel_local",
    "production",
    "entropy_global",
    "energy",
    "delta_rel_global",
    "delta_rel_local",
    "difference",
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Reserved for forward compatibility; the run itself is deterministic.
    #[allow(dead_code)]
    pub seed: u64,
    pub chain: ChainSpec,
    pub schedule: ScheduleSpec,
    pub rho0: InitialState,
    /// Bath couplings to sweep; falls back to `chain.lambda` when empty.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

/// Either a symmetric diamond anchored at one site, or explicit steps.
#[derive(Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Diamond(DiamondParams),
    Explicit(ExplicitSteps),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiamondParams {
    pub origin: usize,
    pub steps: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSteps {
    pub steps: Vec<SliceStep>,
}

impl ScheduleSpec {
    fn build(&self, chain: &ChainSpec) -> Result<DiamondSchedule, Failure> {
        match self {
            ScheduleSpec::Diamond(p) => Ok(DiamondSchedule::diamond(chain, p.origin, p.steps)?),
            ScheduleSpec::Explicit(p) => Ok(DiamondSchedule {
                steps: p.steps.clone(),
            }),
        }
    }
}

#[derive(Serialize)]
struct Row {
    lambda: f64,
    tau: usize,
    rel_global: f64,
    rel_local: f64,
    production: f64,
    entropy_global: f64,
    energy: f64,
    delta_rel_global: Option<f64>,
    delta_rel_local: Option<f64>,
    difference: Option<f64>,
}

pub fn run(config_path: &Path, out_flag: Option<&Path>) -> CmdResult {
    let cfg: Config = load_config(config_path)?;
    let lambdas = if cfg.lambdas.is_empty() {
        vec![cfg.chain.lambda]
    } else {
        cfg.lambdas.clone()
    };
    let tol = cfg.tolerance.unwrap_or(PRODUCTION_TOL);

    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for &lambda in &lambdas {
        let chain = ChainSpec {
            lambda,
            ..cfg.chain.clone()
        };
        let schedule = cfg.schedule.build(&chain)?;
        let rho0 = lightcone::initial_state(&chain, &cfg.rho0)?;
        let records = lightcone::run(&chain, &schedule, &rho0)?;
        let locality = lightcone::locality_report(&records);
        for (i, r) in records.iter().enumerate() {
            // locality rows start at τ = 1.
            let loc = (i > 0).then(|| &locality[i - 1]);
            rows.push(Row {
                lambda,
                tau: r.tau,
                rel_global: r.rel_global,
                rel_local: r.rel_local,
                production: r.production,
                entropy_global: r.entropy_global,
                energy: r.energy,
                delta_rel_global: loc.map(|l| l.delta_rel_global),
                delta_rel_local: loc.map(|l| l.delta_rel_local),
                difference: loc.map(|l| l.difference),
            });
            if r.production > tol {
                violations.push(json!({
                    "lambda": lambda,
                    "tau": r.tau,
                    "production": r.production,
                }));
            }
        }
    }

    let content = match cfg.format.unwrap_or_default() {
        Format::Csv => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        fmt_f64(r.lambda),
                        r.tau.to_string(),
                        fmt_f64(r.rel_global),
                        fmt_f64(r.rel_local),
                        fmt_f64(r.production),
                        fmt_f64(r.entropy_global),
                        fmt_f64(r.energy),
                        fmt_opt(r.delta_rel_global),
                        fmt_opt(r.delta_rel_local),
                        fmt_opt(r.difference),
                    ]
                })
                .collect();
            csv_document(&HEADER, &cells)
        }
        Format::Json => json_document(&rows),
    };
    let out = out_flag.or(cfg.out.as_deref());
    emit(out, &content).map_err(|e| Failure::config(format!("cannot write output: {e}")))?;

    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation {
            summary: format!("{} steps produced relative entropy", violations.len()),
            report: json!({ "command": "lightcone", "failures": violations }),
        })
    }
}
