//! `relent secondlaw`: entropy-balance ledgers for channel steps.
//!
//! The config names a reference ensemble, one channel (which must fix the
//! reference state), and a list of initial-state cases. Each case yields one
//! ledger row; the command exits 2 if any row's verdict fails.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use relent_core::channels::{BuildContext, ChannelRegistry, ChannelSpec};
use relent_core::ensembles::{EnsembleRegistry, EnsembleSpec, Reference};
use relent_core::secondlaw::{self, SecondLawLedger};
use relent_core::spectra::{random_gaussian_matrix, MatrixJson};
use relent_core::states::DensityMatrix;

use crate::commands::load_config;
use crate::output::{csv_document, emit, fmt_f64, fmt_opt, json_document, Format};
use crate::{CmdResult, Failure};

pub const HEADER: [&str; 17] = [
    "case",
    "ensemble_kind",
    "fixed_point_residual",
    "entropy_before",
    "entropy_after",
    "energy_before",
    "energy_after",
    "number_before",
    "number_after",
    "rel_before",
    "rel_after",
    "delta_rel",
    "production",
    "identity_residual",
    "support_violation",
    "verdict",
    "note",
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Verdict threshold; defaults to the library ledger tolerance.
    #[serde(default)]
    pub tolerance: Option<f64>,
    pub ensemble: EnsembleSpec,
    pub channel: ChannelSpec,
    pub cases: Vec<CaseSpec>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub name: String,
    pub state: StateSpec,
}

/// Initial state of a ledger case.
#[derive(Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum StateSpec {
    MaximallyMixed,
    Basis { index: usize },
    /// The reference state itself.
    Reference,
    /// Drawn from the config-seeded generator.
    Random,
    Matrix { matrix: MatrixJson },
}

impl StateSpec {
    fn build(&self, reference: &Reference, rng: &mut ChaCha8Rng) -> Result<DensityMatrix, Failure> {
        let dim = reference.sigma.dim();
        let rho = match self {
            StateSpec::MaximallyMixed => DensityMatrix::maximally_mixed(dim),
            StateSpec::Basis { index } => DensityMatrix::basis_state(dim, *index)?,
            StateSpec::Reference => reference.sigma.clone(),
            StateSpec::Random => {
                let g = random_gaussian_matrix(dim, rng);
                let m = &g * g.adjoint();
                let trace = m.trace().re;
                DensityMatrix::new(m.unscale(trace))?
            }
            StateSpec::Matrix { matrix } => DensityMatrix::new(matrix.to_matrix()?)?,
        };
        if rho.dim() != dim {
            return Err(Failure::config(format!(
                "case state has dimension {}, reference has {}",
                rho.dim(),
                dim
            )));
        }
        Ok(rho)
    }
}

fn ledger_row(l: &SecondLawLedger) -> Vec<String> {
    vec![
        l.case.clone(),
        l.ensemble_kind.clone(),
        fmt_f64(l.fixed_point_residual),
        fmt_f64(l.entropy_before),
        fmt_f64(l.entropy_after),
        fmt_opt(l.energy_before),
        fmt_opt(l.energy_after),
        fmt_opt(l.number_before),
        fmt_opt(l.number_after),
        fmt_f64(l.rel_before),
        fmt_f64(l.rel_after),
        fmt_f64(l.delta_rel),
        fmt_f64(l.production),
        fmt_f64(l.identity_residual),
        l.support_violation.to_string(),
        l.verdict.to_string(),
        l.note.clone(),
    ]
}

pub fn run(config_path: &Path, out_flag: Option<&Path>) -> CmdResult {
    let cfg: Config = load_config(config_path)?;
    if cfg.cases.is_empty() {
        return Err(Failure::config("config lists no cases"));
    }
    if let Some(tol) = cfg.tolerance {
        if !(tol >= 0.0) {
            return Err(Failure::config(format!(
                "tolerance must be nonnegative, got {tol}"
            )));
        }
    }

    let reference = EnsembleRegistry::with_builtin().reference(&cfg.ensemble)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ctx = BuildContext {
        hamiltonian: reference.hamiltonian.as_ref(),
        reference: Some(&reference.sigma),
    };
    let channel = ChannelRegistry::with_builtin().build(&cfg.channel, &ctx, &mut rng)?;

    let mut ledgers = Vec::with_capacity(cfg.cases.len());
    for case in &cfg.cases {
        let rho = case.state.build(&reference, &mut rng)?;
        let mut ledger = secondlaw::evaluate(case.name.clone(), &rho, &channel, &reference)?;
        if let Some(tol) = cfg.tolerance {
            ledger.verdict = ledger.delta_rel <= tol
                && (ledger.support_violation || ledger.identity_residual <= tol);
        }
        ledgers.push(ledger);
    }

    let content = match cfg.format.unwrap_or_default() {
        Format::Csv => {
            let rows: Vec<Vec<String>> = ledgers.iter().map(ledger_row).collect();
            csv_document(&HEADER, &rows)
        }
        Format::Json => json_document(&ledgers),
    };
    let out = out_flag.or(cfg.out.as_deref());
    emit(out, &content).map_err(|e| Failure::config(format!("cannot write output: {e}")))?;

    let failures: Vec<_> = ledgers
        .iter()
        .filter(|l| !l.verdict)
        .map(|l| {
            json!({
                "case": l.case,
                "delta_rel": l.delta_rel,
                "identity_residual": l.identity_residual,
            })
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation {
            summary: format!("{} of {} ledgers failed", failures.len(), ledgers.len()),
            report: json!({ "command": "secondlaw", "failures": failures }),
        })
    }
}
