//! Entropy-production accounting for a channel step against a reference
//! state.
//!
//! Given an initial state ρ, a channel N fixing a reference σ, and the
//! ensemble description of σ, [`evaluate`] produces a [`SecondLawLedger`]:
//! relative entropies before and after, the entropy production
//! `−Δ S(ρ‖σ)`, and the residual of the bookkeeping identity that rewrites
//! `S(ρ‖σ)` in terms of entropy and the ensemble's conserved quantities.
//!
//! For a canonical reference, `S(ρ‖σ) = −S(ρ) + β⟨H⟩ + lnZ`, so
//! `ΔS(ρ‖σ) = −ΔS + βΔ⟨H⟩`; the grand canonical version subtracts `αΔ⟨N⟩`,
//! and the general exponential one uses `Σ λᵢ Δ⟨Oᵢ⟩`. Microcanonical
//! references have no conserved quantity beyond normalization, so the
//! identity reduces to `ΔS(ρ‖σ) = −ΔS` on the shell.

use serde::{Deserialize, Serialize};

use crate::channels::QuantumChannel;
use crate::ensembles::Reference;
use crate::states::{relative_entropy, shannon_entropy, DensityMatrix};
use crate::{Error, Result};

/// Residual bound for the ledger identity and for calling a step a pass.
pub const LEDGER_TOL: f64 = 1e-8;

/// Bound on `‖N(σ) − σ‖₁` below which σ counts as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-8;

/// One audited channel step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecondLawLedger {
    /// Caller-chosen case name, echoed into reports.
    pub case: String,
    /// Ensemble kind of the reference state.
    pub ensemble_kind: String,
    /// `‖N(σ) − σ‖₁`, the precondition residual.
    pub fixed_point_residual: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
    /// `⟨H⟩` before/after when the ensemble has a Hamiltonian.
    pub energy_before: Option<f64>,
    pub energy_after: Option<f64>,
    /// `⟨N⟩` before/after when the ensemble has a number operator.
    pub number_before: Option<f64>,
    pub number_after: Option<f64>,
    /// `S(ρ‖σ)` before/after; `+∞` encodes a support violation.
    pub rel_before: f64,
    pub rel_after: f64,
    /// `S(N(ρ)‖σ) − S(ρ‖σ)`; the data-processing inequality demands ≤ 0.
    pub delta_rel: f64,
    /// Entropy production `−Δ S(ρ‖σ)`.
    pub production: f64,
    /// `|Δ S(ρ‖σ) − (−ΔS + βΔ⟨H⟩ − αΔ⟨N⟩ …)|` with absent terms dropped.
    pub identity_residual: f64,
    /// True when either relative entropy is infinite; the identity check is
    /// skipped in that case.
    pub support_violation: bool,
    /// Pass iff `delta_rel ≤ LEDGER_TOL` and, when finite, the identity holds
    /// to `LEDGER_TOL`.
    pub verdict: bool,
    pub note: String,
}

/// Result of comparing relative entropies across a step when infinities are
/// in play.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MonotonicityGap {
    /// Both sides finite, or only the initial side infinite: the drop
    /// `S(ρ‖σ) − S(N(ρ)‖σ)` (nonnegative when the second law holds;
    /// `+∞` when only the initial side is infinite).
    Gap(f64),
    /// Initial relative entropy infinite and final infinite as well: the
    /// difference `∞ − ∞` carries no information.
    Incomparable,
}

/// Drop in relative entropy across a step, respecting infinities.
pub fn monotonicity_gap(rel_before: f64, rel_after: f64) -> MonotonicityGap {
    if rel_before.is_infinite() && rel_after.is_infinite() {
        MonotonicityGap::Incomparable
    } else {
        MonotonicityGap::Gap(rel_before - rel_after)
    }
}

/// Audits one application of `channel` to `rho` against the reference
/// `reference`, which the channel must fix to within [`FIXED_POINT_TOL`].
///
/// Support violations (infinite relative entropy) are not errors; they are
/// recorded in the ledger with the identity check skipped.
pub fn evaluate(
    case: impl Into<String>,
    rho: &DensityMatrix,
    channel: &QuantumChannel,
    reference: &Reference,
) -> Result<SecondLawLedger> {
    let sigma = &reference.sigma;
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: rho.dim(),
        });
    }
    let fixed_point_residual = channel.fixed_point_residual(sigma)?;
    if fixed_point_residual >= FIXED_POINT_TOL {
        return Err(Error::DoesNotFixReference {
            residual: fixed_point_residual,
        });
    }

    let after = channel.apply(rho)?;
    let rel_before = relative_entropy(rho, sigma)?;
    let rel_after = relative_entropy(&after, sigma)?;
    let support_violation = rel_before.is_infinite() || rel_after.is_infinite();

    let entropy_before = rho.von_neumann_entropy();
    let entropy_after = after.von_neumann_entropy();

    let observable_expectation = |state: &DensityMatrix| -> Result<f64> {
        let mut total = 0.0;
        for (weight, op) in &reference.observables {
            total += weight * state.expectation(op)?;
        }
        Ok(total)
    };

    let energy_before = match &reference.hamiltonian {
        Some(h) => Some(rho.expectation(h)?),
        None => None,
    };
    let energy_after = match &reference.hamiltonian {
        Some(h) => Some(after.expectation(h)?),
        None => None,
    };
    let number_before = match &reference.number {
        Some(n) => Some(rho.expectation(n)?),
        None => None,
    };
    let number_after = match &reference.number {
        Some(n) => Some(after.expectation(n)?),
        None => None,
    };

    let (delta_rel, production, identity_residual) = if support_violation {
        let delta = match monotonicity_gap(rel_before, rel_after) {
            MonotonicityGap::Incomparable => 0.0,
            MonotonicityGap::Gap(gap) => -gap,
        };
        (delta, -delta, 0.0)
    } else {
        let delta_rel = rel_after - rel_before;
        let delta_s = entropy_after - entropy_before;
        // Conserved-quantity side of the identity, by ensemble kind.
        let charge_delta = match reference.kind.as_str() {
            "microcanonical" => 0.0,
            "canonical" => {
                let beta = reference.beta.unwrap_or(0.0);
                beta * (energy_after.unwrap_or(0.0) - energy_before.unwrap_or(0.0))
            }
            "grand_canonical" => {
                let beta = reference.beta.unwrap_or(0.0);
                let alpha = reference.alpha.unwrap_or(0.0);
                beta * (energy_after.unwrap_or(0.0) - energy_before.unwrap_or(0.0))
                    - alpha * (number_after.unwrap_or(0.0) - number_before.unwrap_or(0.0))
            }
            _ => {
                observable_expectation(&after)? - observable_expectation(rho)?
            }
        };
        let predicted = -delta_s + charge_delta;
        (delta_rel, -delta_rel, (delta_rel - predicted).abs())
    };

    let verdict = delta_rel <= LEDGER_TOL && identity_residual <= LEDGER_TOL;
    let note = if support_violation {
        "support violation: relative entropy infinite, identity skipped".to_string()
    } else {
        String::new()
    };

    Ok(SecondLawLedger {
        case: case.into(),
        ensemble_kind: reference.kind.clone(),
        fixed_point_residual,
        entropy_before,
        entropy_after,
        energy_before,
        energy_after,
        number_before,
        number_after,
        rel_before,
        rel_after,
        delta_rel,
        production,
        identity_residual,
        support_violation,
        verdict,
        note,
    })
}

/// One row of the probability-simplex scan: a distribution and its relative
/// entropy to the uniform reference.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ContourRow {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub rel_entropy: f64,
}

/// `S(p‖uniform)` on three outcomes: `ln 3 − S(p)`. Infinite nowhere since
/// the uniform reference has full support.
pub fn uniform_relative_entropy(p: &[f64; 3]) -> f64 {
    3f64.ln() - shannon_entropy(p)
}

/// Triangular grid over the 3-outcome probability simplex with `resolution`
/// points per edge: rows `(i/(R−1), j/(R−1), (R−1−i−j)/(R−1))` for
/// `i + j ≤ R−1`, yielding `R(R+1)/2` rows in lexicographic `(i, j)` order.
pub fn contour_grid(resolution: usize) -> Result<Vec<ContourRow>> {
    if resolution < 2 {
        return Err(Error::BadResolution {
            requested: resolution,
        });
    }
    let steps = resolution - 1;
    let denom = steps as f64;
    let mut rows = Vec::with_capacity(resolution * (resolution + 1) / 2);
    for i in 0..=steps {
        for j in 0..=steps - i {
            let k = steps - i - j;
            let p = [i as f64 / denom, j as f64 / denom, k as f64 / denom];
            rows.push(ContourRow {
                p1: p[0],
                p2: p[1],
                p3: p[2],
                rel_entropy: uniform_relative_entropy(&p),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::QuantumChannel;
    use crate::ensembles::{EnsembleRegistry, EnsembleSpec};
    use crate::spectra::{self, HermitianOperator};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let g = spectra::random_gaussian_matrix(dim, rng);
        let m = &g * g.adjoint();
        let trace = m.trace().re;
        DensityMatrix::new(m / num_complex::Complex64::new(trace, 0.0)).unwrap()
    }

    fn canonical_reference(h: HermitianOperator, beta: f64) -> Reference {
        EnsembleRegistry::with_builtin()
            .reference(&EnsembleSpec::canonical(h, beta))
            .unwrap()
    }

    #[test]
    fn rejects_channels_that_move_the_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let h = HermitianOperator::random(3, &mut rng);
        let reference = canonical_reference(h, 1.0);
        let rho = random_state(3, &mut rng);
        // Depolarizing fixes 1/3, not the Gibbs state.
        let channel = QuantumChannel::depolarizing(3, 0.5).unwrap();
        assert!(matches!(
            evaluate("bad", &rho, &channel, &reference),
            Err(Error::DoesNotFixReference { .. })
        ));
    }

    #[test]
    fn partial_replacement_step_passes_and_balances_the_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let h = HermitianOperator::random(4, &mut rng);
        let reference = canonical_reference(h, 0.7);
        let channel =
            QuantumChannel::partial_replacement(&reference.sigma, 0.35).unwrap();
        let rho = random_state(4, &mut rng);
        let ledger = evaluate("replacement", &rho, &channel, &reference).unwrap();
        assert!(ledger.verdict, "{ledger:?}");
        assert!(ledger.delta_rel <= 1e-12);
        assert!(ledger.production >= -1e-12);
        assert!(ledger.identity_residual <= 1e-10);
        assert!(!ledger.support_violation);
    }

    #[test]
    fn unitary_steps_are_reversible() {
        // Evolution under H commutes with the Gibbs reference: production
        // is zero to round-off, not merely nonnegative.
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let h = HermitianOperator::random(4, &mut rng);
        let reference = canonical_reference(h.clone(), 1.3);
        let channel = QuantumChannel::hamiltonian_evolution(&h, 0.6).unwrap();
        let rho = random_state(4, &mut rng);
        let ledger = evaluate("unitary", &rho, &channel, &reference).unwrap();
        assert!(ledger.verdict);
        assert!(
            ledger.delta_rel.abs() < 1e-9,
            "unitary step should not produce entropy, got {}",
            ledger.delta_rel
        );
    }

    #[test]
    fn production_vanishes_linearly_with_coupling() {
        // For the replacement family the map is linear in p, so production
        // at small p shrinks proportionally; check the trend over decades.
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let h = HermitianOperator::random(3, &mut rng);
        let reference = canonical_reference(h, 1.0);
        let rho = random_state(3, &mut rng);
        let mut last = f64::INFINITY;
        for &p in &[1e-1, 1e-2, 1e-3, 1e-4] {
            let channel =
                QuantumChannel::partial_replacement(&reference.sigma, p).unwrap();
            let ledger = evaluate("fade", &rho, &channel, &reference).unwrap();
            assert!(ledger.production >= 0.0);
            assert!(ledger.production < last);
            last = ledger.production;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn microcanonical_identity_reduces_to_entropy_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let h = HermitianOperator::diagonal(&[0.0, 1.0, 1.0, 1.0, 2.0]);
        let registry = EnsembleRegistry::with_builtin();
        let reference = registry
            .reference(&EnsembleSpec::microcanonical(
                h,
                crate::ensembles::ShellWindow {
                    center: 1.0,
                    half_width: 0.25,
                },
            ))
            .unwrap();
        assert_eq!(reference.shell_dim, Some(3));
        let channel =
            QuantumChannel::random_commuting_unitary_mixture(&reference.sigma, 3, &mut rng)
                .unwrap();
        // A state supported on the shell keeps the ledger finite.
        let mut weights = vec![0.0; 5];
        weights[1] = 0.6;
        weights[2] = 0.3;
        weights[3] = 0.1;
        let rho = DensityMatrix::diagonal(&weights).unwrap();
        let ledger = evaluate("shell", &rho, &channel, &reference).unwrap();
        assert!(ledger.verdict, "{ledger:?}");
        assert!(!ledger.support_violation);
        assert_relative_eq!(
            ledger.delta_rel,
            -(ledger.entropy_after - ledger.entropy_before),
            epsilon = 1e-10
        );
    }

    #[test]
    fn support_violation_is_recorded_not_fatal() {
        let h = HermitianOperator::diagonal(&[0.0, 1.0, 1.0, 1.0, 2.0]);
        let registry = EnsembleRegistry::with_builtin();
        let reference = registry
            .reference(&EnsembleSpec::microcanonical(
                h,
                crate::ensembles::ShellWindow {
                    center: 1.0,
                    half_width: 0.25,
                },
            ))
            .unwrap();
        // Ground state lives outside the shell: S(ρ‖σ) = ∞.
        let rho = DensityMatrix::basis_state(5, 0).unwrap();
        let channel = QuantumChannel::unitary(spectra::identity(5)).unwrap();
        let ledger = evaluate("off-shell", &rho, &channel, &reference).unwrap();
        assert!(ledger.support_violation);
        assert!(ledger.rel_before.is_infinite());
        assert!(ledger.rel_after.is_infinite());
        assert_eq!(
            monotonicity_gap(ledger.rel_before, ledger.rel_after),
            MonotonicityGap::Incomparable
        );
        assert!(ledger.verdict);
    }

    #[test]
    fn grand_canonical_ledger_uses_both_charges() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        // Two-mode occupation problem: H and N diagonal, so they commute.
        let h = HermitianOperator::diagonal(&[0.0, 1.0, 1.5, 2.5]);
        let n = HermitianOperator::diagonal(&[0.0, 1.0, 1.0, 2.0]);
        let registry = EnsembleRegistry::with_builtin();
        let reference = registry
            .reference(&EnsembleSpec::grand_canonical(h, n, 1.2, 0.4))
            .unwrap();
        let channel =
            QuantumChannel::partial_replacement(&reference.sigma, 0.4).unwrap();
        let rho = random_state(4, &mut rng);
        let ledger = evaluate("grand", &rho, &channel, &reference).unwrap();
        assert!(ledger.verdict, "{ledger:?}");
        assert!(ledger.number_before.is_some());
        assert!(ledger.identity_residual < 1e-10);
    }

    #[test]
    fn ledger_serializes_infinities_as_null() {
        let h = HermitianOperator::diagonal(&[0.0, 1.0]);
        let registry = EnsembleRegistry::with_builtin();
        let reference = registry
            .reference(&EnsembleSpec::canonical(h, 1.0))
            .unwrap();
        let rho = DensityMatrix::basis_state(2, 0).unwrap();
        let channel = QuantumChannel::unitary(spectra::identity(2)).unwrap();
        let ledger = evaluate("finite", &rho, &channel, &reference).unwrap();
        let json = serde_json::to_string(&ledger).unwrap();
        assert!(json.contains("\"case\":\"finite\""));
    }

    #[test]
    fn contour_grid_matches_hand_counts_and_vertices() {
        let rows = contour_grid(3).unwrap();
        assert_eq!(rows.len(), 6);
        // First row is the vertex concentrated on outcome 3.
        assert_eq!((rows[0].p1, rows[0].p2, rows[0].p3), (0.0, 0.0, 1.0));
        assert_relative_eq!(rows[0].rel_entropy, 3f64.ln(), epsilon = 1e-14);
        // Last row is the vertex on outcome 1.
        let last = rows.last().unwrap();
        assert_eq!((last.p1, last.p2, last.p3), (1.0, 0.0, 0.0));

        let rows4 = contour_grid(4).unwrap();
        assert_eq!(rows4.len(), 10);
        // Center of the simplex appears on the R = 4 grid and scores zero.
        let center = rows4
            .iter()
            .find(|r| (r.p1 - r.p2).abs() < 1e-15 && (r.p2 - r.p3).abs() < 1e-15)
            .expect("center point on grid");
        assert!(center.rel_entropy.abs() < 1e-15);
        assert!(contour_grid(1).is_err());
    }

    #[test]
    fn contour_kernel_agrees_with_quantum_relative_entropy() {
        // The scalar kernel is the diagonal restriction of S(ρ‖1/3).
        let uniform = DensityMatrix::maximally_mixed(3);
        for p in [[0.2, 0.3, 0.5], [0.7, 0.2, 0.1], [1.0 / 3.0; 3]] {
            let rho = DensityMatrix::diagonal(&p).unwrap();
            let quantum = relative_entropy(&rho, &uniform).unwrap();
            assert_relative_eq!(
                uniform_relative_entropy(&p),
                quantum,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn contour_kernel_is_permutation_symmetric() {
        let p = [0.6, 0.3, 0.1];
        let base = uniform_relative_entropy(&p);
        for q in [
            [0.6, 0.1, 0.3],
            [0.3, 0.6, 0.1],
            [0.1, 0.3, 0.6],
            [0.3, 0.1, 0.6],
            [0.1, 0.6, 0.3],
        ] {
            assert_relative_eq!(uniform_relative_entropy(&q), base, epsilon = 1e-14);
        }
    }

    #[test]
    fn monotonicity_gap_handles_half_infinite_cases() {
        assert_eq!(
            monotonicity_gap(f64::INFINITY, 1.0),
            MonotonicityGap::Gap(f64::INFINITY)
        );
        assert_eq!(monotonicity_gap(2.0, 0.5), MonotonicityGap::Gap(1.5));
    }
}
