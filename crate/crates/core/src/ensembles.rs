//! Reference states of maximum-entropy form and their partition functions.
//!
//! Four families are provided, each behind the [`EnsembleModel`] trait and
//! selectable by name from an [`EnsembleRegistry`]:
//!
//! * `microcanonical` — uniform mixture on an energy shell,
//! * `canonical` — `σ = e^{−βH}/Z`,
//! * `grand_canonical` — `σ = e^{−β(H−μN)}/Z`, requiring `[H, N] = 0`,
//! * `general_exponential` — `σ = e^{−Σ λᵢ Oᵢ}/Z` for an observable list.
//!
//! All partition functions are evaluated as shifted log-sum-exps so large
//! spectra never overflow.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::spectra::{CMatrix, Eigh, HermitianOperator};
use crate::states::DensityMatrix;
use crate::{Error, Result};

/// Frobenius-norm bound on `[H, N]` for the grand canonical ensemble.
pub const COMMUTATOR_TOL: f64 = 1e-10;

/// `ln Σ exp(xᵢ)` with the max shifted out.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Gibbs weights `exp(−β λᵢ − lnZ)` for an eigenvalue list; returns
/// `(weights, lnZ)`.
fn gibbs_weights(eigenvalues: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let exponents: Vec<f64> = eigenvalues.iter().map(|&e| -beta * e).collect();
    let ln_z = log_sum_exp(&exponents);
    let weights = exponents.iter().map(|&x| (x - ln_z).exp()).collect();
    (weights, ln_z)
}

/// Uniform mixture on the energy shell `[e_center − half_width, e_center +
/// half_width]` (inclusive). Returns the state and the shell dimension.
///
/// The window is a hard cutoff: an eigenvalue on the boundary is in, one just
/// outside is out. There is no default width; callers choose it.
pub fn microcanonical(
    h: &HermitianOperator,
    e_center: f64,
    half_width: f64,
) -> Result<(DensityMatrix, usize)> {
    if !(half_width >= 0.0) {
        return Err(Error::BadEnsembleSpec {
            reason: format!("shell half-width must be nonnegative, got {half_width}"),
        });
    }
    let lo = e_center - half_width;
    let hi = e_center + half_width;
    let Eigh { values, vectors } = h.eigh();
    let shell: Vec<usize> = (0..values.len())
        .filter(|&k| values[k] >= lo && values[k] <= hi)
        .collect();
    if shell.is_empty() {
        return Err(Error::EmptyEnergyShell { lo, hi });
    }
    let d = shell.len();
    let mut weights = vec![0.0; values.len()];
    for &k in &shell {
        weights[k] = 1.0 / d as f64;
    }
    let dim = h.dim();
    let sigma = DensityMatrix::from_eigensystem(weights, vectors, vec![dim])?;
    Ok((sigma, d))
}

/// Canonical state `e^{−βH}/Z`. Returns `(σ, lnZ, F)` with the free energy
/// `F = −lnZ/β`.
pub fn canonical(h: &HermitianOperator, beta: f64) -> Result<(DensityMatrix, f64, f64)> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta { beta });
    }
    let Eigh { values, vectors } = h.eigh();
    let (weights, ln_z) = gibbs_weights(&values, beta);
    let sigma = DensityMatrix::from_eigensystem(weights, vectors, vec![h.dim()])?;
    Ok((sigma, ln_z, -ln_z / beta))
}

/// Grand canonical state `e^{−β(H−μN)}/Z` for commuting `H` and `N`.
/// Returns `(σ, lnZ, Ω)` with the grand potential `Ω = −lnZ/β`.
pub fn grand_canonical(
    h: &HermitianOperator,
    n: &HermitianOperator,
    beta: f64,
    mu: f64,
) -> Result<(DensityMatrix, f64, f64)> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta { beta });
    }
    if h.dim() != n.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: n.dim(),
        });
    }
    let residual = crate::spectra::commutator_norm(h.entries(), n.entries());
    if residual > COMMUTATOR_TOL {
        return Err(Error::NonCommuting { residual });
    }
    let k = HermitianOperator::new(h.entries() - n.entries().scale(mu))
        .expect("H − μN of Hermitian inputs is Hermitian");
    let Eigh { values, vectors } = k.eigh();
    let (weights, ln_z) = gibbs_weights(&values, beta);
    let sigma = DensityMatrix::from_eigensystem(weights, vectors, vec![h.dim()])?;
    Ok((sigma, ln_z, -ln_z / beta))
}

/// General exponential state `e^{−Σ λᵢ Oᵢ}/Z`. Returns `(σ, lnZ)`.
///
/// The weights `λᵢ` may have either sign; the single-term case `(β, H)`
/// reproduces the canonical state.
pub fn general_exponential(
    terms: &[(f64, HermitianOperator)],
) -> Result<(DensityMatrix, f64)> {
    let Some(first) = terms.first() else {
        return Err(Error::BadEnsembleSpec {
            reason: "general exponential ensemble needs at least one observable".into(),
        });
    };
    let dim = first.1.dim();
    let mut exponent = CMatrix::zeros(dim, dim);
    for (weight, op) in terms {
        if op.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: op.dim(),
            });
        }
        exponent += op.entries().scale(*weight);
    }
    let g = HermitianOperator::new(exponent)
        .expect("real combination of Hermitian operators is Hermitian");
    let Eigh { values, vectors } = g.eigh();
    let (weights, ln_z) = gibbs_weights(&values, 1.0);
    let sigma = DensityMatrix::from_eigensystem(weights, vectors, vec![dim])?;
    Ok((sigma, ln_z))
}

/// Energy shell window, inclusive on both ends.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellWindow {
    pub center: f64,
    pub half_width: f64,
}

/// One `λᵢ Oᵢ` term of a general exponential ensemble.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedObservable {
    pub weight: f64,
    pub operator: HermitianOperator,
}

/// Declarative description of a reference ensemble, the unit that configs
/// carry. Field requirements depend on `kind`; the matching model validates
/// them when the reference state is built.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HermitianOperator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub number: Option<HermitianOperator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shell: Option<ShellWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<Vec<WeightedObservable>>,
}

impl EnsembleSpec {
    pub fn canonical(hamiltonian: HermitianOperator, beta: f64) -> Self {
        Self {
            kind: "canonical".into(),
            hamiltonian: Some(hamiltonian),
            number: None,
            beta: Some(beta),
            mu: None,
            shell: None,
            observables: None,
        }
    }

    pub fn microcanonical(hamiltonian: HermitianOperator, shell: ShellWindow) -> Self {
        Self {
            kind: "microcanonical".into(),
            hamiltonian: Some(hamiltonian),
            number: None,
            beta: None,
            mu: None,
            shell: Some(shell),
            observables: None,
        }
    }

    pub fn grand_canonical(
        hamiltonian: HermitianOperator,
        number: HermitianOperator,
        beta: f64,
        mu: f64,
    ) -> Self {
        Self {
            kind: "grand_canonical".into(),
            hamiltonian: Some(hamiltonian),
            number: Some(number),
            beta: Some(beta),
            mu: Some(mu),
            shell: None,
            observables: None,
        }
    }

    pub fn general_exponential(observables: Vec<WeightedObservable>) -> Self {
        Self {
            kind: "general_exponential".into(),
            hamiltonian: None,
            number: None,
            beta: None,
            mu: None,
            shell: None,
            observables: Some(observables),
        }
    }

    fn require_hamiltonian(&self) -> Result<&HermitianOperator> {
        self.hamiltonian.as_ref().ok_or(Error::BadEnsembleSpec {
            reason: format!("{} ensemble needs a hamiltonian", self.kind),
        })
    }

    fn require_beta(&self) -> Result<f64> {
        self.beta.ok_or(Error::BadEnsembleSpec {
            reason: format!("{} ensemble needs beta", self.kind),
        })
    }
}

/// Reference state plus the bookkeeping the entropy-balance ledgers need.
#[derive(Clone, Debug)]
pub struct Reference {
    pub kind: String,
    pub sigma: DensityMatrix,
    /// `ln Z`; absent for the microcanonical family.
    pub ln_z: Option<f64>,
    /// `F` or `Ω`, whichever the family defines.
    pub potential: Option<f64>,
    pub shell_dim: Option<usize>,
    pub beta: Option<f64>,
    /// `α = βμ`.
    pub alpha: Option<f64>,
    pub hamiltonian: Option<HermitianOperator>,
    pub number: Option<HermitianOperator>,
    /// `(λᵢ, Oᵢ)` pairs for the general exponential family.
    pub observables: Vec<(f64, HermitianOperator)>,
}

/// One ensemble family: builds its reference state from a spec.
pub trait EnsembleModel: Send + Sync {
    fn kind(&self) -> &'static str;
    fn reference(&self, spec: &EnsembleSpec) -> Result<Reference>;
}

struct Microcanonical;

impl EnsembleModel for Microcanonical {
    fn kind(&self) -> &'static str {
        "microcanonical"
    }

    fn reference(&self, spec: &EnsembleSpec) -> Result<Reference> {
        let h = spec.require_hamiltonian()?;
        let shell = spec.shell.ok_or(Error::BadEnsembleSpec {
            reason: "microcanonical ensemble needs a shell window".into(),
        })?;
        let (sigma, d) = microcanonical(h, shell.center, shell.half_width)?;
        Ok(Reference {
            kind: self.kind().into(),
            sigma,
            ln_z: None,
            potential: None,
            shell_dim: Some(d),
            beta: None,
            alpha: None,
            hamiltonian: Some(h.clone()),
            number: None,
            observables: Vec::new(),
        })
    }
}

struct Canonical;

impl EnsembleModel for Canonical {
    fn kind(&self) -> &'static str {
        "canonical"
    }

    fn reference(&self, spec: &EnsembleSpec) -> Result<Reference> {
        let h = spec.require_hamiltonian()?;
        let beta = spec.require_beta()?;
        let (sigma, ln_z, f) = canonical(h, beta)?;
        Ok(Reference {
            kind: self.kind().into(),
            sigma,
            ln_z: Some(ln_z),
            potential: Some(f),
            shell_dim: None,
            beta: Some(beta),
            alpha: None,
            hamiltonian: Some(h.clone()),
            number: None,
            observables: Vec::new(),
        })
    }
}

struct GrandCanonical;

impl EnsembleModel for GrandCanonical {
    fn kind(&self) -> &'static str {
        "grand_canonical"
    }

    fn reference(&self, spec: &EnsembleSpec) -> Result<Reference> {
        let h = spec.require_hamiltonian()?;
        let beta = spec.require_beta()?;
        let n = spec.number.as_ref().ok_or(Error::BadEnsembleSpec {
            reason: "grand_canonical ensemble needs a number operator".into(),
        })?;
        let mu = spec.mu.ok_or(Error::BadEnsembleSpec {
            reason: "grand_canonical ensemble needs mu".into(),
        })?;
        let (sigma, ln_z, omega) = grand_canonical(h, n, beta, mu)?;
        Ok(Reference {
            kind: self.kind().into(),
            sigma,
            ln_z: Some(ln_z),
            potential: Some(omega),
            shell_dim: None,
            beta: Some(beta),
            alpha: Some(beta * mu),
            hamiltonian: Some(h.clone()),
            number: Some(n.clone()),
            observables: Vec::new(),
        })
    }
}

struct GeneralExponential;

impl EnsembleModel for GeneralExponential {
    fn kind(&self) -> &'static str {
        "general_exponential"
    }

    fn reference(&self, spec: &EnsembleSpec) -> Result<Reference> {
        let observables = spec.observables.as_ref().ok_or(Error::BadEnsembleSpec {
            reason: "general_exponential ensemble needs an observable list".into(),
        })?;
        let terms: Vec<(f64, HermitianOperator)> = observables
            .iter()
            .map(|w| (w.weight, w.operator.clone()))
            .collect();
        let (sigma, ln_z) = general_exponential(&terms)?;
        Ok(Reference {
            kind: self.kind().into(),
            sigma,
            ln_z: Some(ln_z),
            potential: None,
            shell_dim: None,
            beta: None,
            alpha: None,
            hamiltonian: None,
            number: None,
            observables: terms,
        })
    }
}

/// Name-keyed collection of ensemble families. Iteration order is the sorted
/// kind name, so listings are deterministic.
pub struct EnsembleRegistry {
    models: BTreeMap<&'static str, Box<dyn EnsembleModel>>,
}

impl EnsembleRegistry {
    /// Registry holding the four built-in families.
    pub fn with_builtin() -> Self {
        let mut registry = Self {
            models: BTreeMap::new(),
        };
        registry.register(Box::new(Microcanonical));
        registry.register(Box::new(Canonical));
        registry.register(Box::new(GrandCanonical));
        registry.register(Box::new(GeneralExponential));
        registry
    }

    /// Adds a model, replacing any previous one of the same kind.
    pub fn register(&mut self, model: Box<dyn EnsembleModel>) {
        self.models.insert(model.kind(), model);
    }

    pub fn get(&self, kind: &str) -> Result<&dyn EnsembleModel> {
        self.models
            .get(kind)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownKind {
                kind: kind.into(),
                known: self.kinds().iter().map(|s| s.to_string()).collect(),
            })
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        self.models.keys().copied().collect()
    }

    /// Builds the reference state described by `spec`.
    pub fn reference(&self, spec: &EnsembleSpec) -> Result<Reference> {
        self.get(&spec.kind)?.reference(spec)
    }
}

impl Default for EnsembleRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_h(gap: f64) -> HermitianOperator {
        HermitianOperator::diagonal(&[0.0, gap])
    }

    #[test]
    fn canonical_qubit_matches_scalar_formulas() {
        // Independent scalar route: p₀ = 1/(1+e^{−β}), lnZ = ln(1+e^{−β}).
        let beta: f64 = 1.0;
        let p0 = 1.0 / (1.0 + (-beta).exp());
        let p1 = (-beta).exp() / (1.0 + (-beta).exp());
        let ln_z_scalar = (1.0 + (-beta).exp()).ln();

        let (sigma, ln_z, f) = canonical(&qubit_h(1.0), beta).unwrap();
        assert_relative_eq!(ln_z, ln_z_scalar, epsilon = 1e-14);
        assert_relative_eq!(f, -ln_z_scalar / beta, epsilon = 1e-14);
        let eigs = sigma.eigenvalues();
        assert_relative_eq!(eigs[0], p1, epsilon = 1e-14);
        assert_relative_eq!(eigs[1], p0, epsilon = 1e-14);
        assert_relative_eq!(sigma.entries()[(0, 0)].re, 0.7310585786300049, epsilon = 1e-12);
    }

    #[test]
    fn canonical_free_energy_identity() {
        // F = E − S/β with E and S computed through independent routes.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for dim in [2usize, 4, 7] {
            let h = HermitianOperator::random(dim, &mut rng);
            let beta = 0.7;
            let (sigma, _ln_z, f) = canonical(&h, beta).unwrap();
            let energy = sigma.expectation(&h).unwrap();
            let entropy = sigma.von_neumann_entropy();
            assert_relative_eq!(f, energy - entropy / beta, epsilon = 1e-10);
        }
    }

    #[test]
    fn canonical_energy_matches_log_z_derivative() {
        // E(σ) = −∂ lnZ/∂β, probed by central differences at Δβ = 1e−4.
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let h = HermitianOperator::random(5, &mut rng);
        let beta = 1.3;
        let delta = 1e-4;
        let (sigma, _, _) = canonical(&h, beta).unwrap();
        let (_, ln_z_plus, _) = canonical(&h, beta + delta).unwrap();
        let (_, ln_z_minus, _) = canonical(&h, beta - delta).unwrap();
        let fd_energy = -(ln_z_plus - ln_z_minus) / (2.0 * delta);
        let energy = sigma.expectation(&h).unwrap();
        assert!((energy - fd_energy).abs() < 1e-5, "{energy} vs {fd_energy}");
    }

    #[test]
    fn canonical_is_stable_for_large_spectra() {
        // Energies up to 1000 at β = 2 would overflow a naive exp sum.
        let energies: Vec<f64> = (0..6).map(|k| 200.0 * k as f64).collect();
        let h = HermitianOperator::diagonal(&energies);
        let (sigma, ln_z, _) = canonical(&h, 2.0).unwrap();
        assert!(ln_z.is_finite());
        // Ground state dominates completely.
        assert_relative_eq!(sigma.eigenvalues()[5], 1.0, epsilon = 1e-12);
        assert_relative_eq!(ln_z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn canonical_rejects_nonpositive_beta() {
        assert!(matches!(
            canonical(&qubit_h(1.0), 0.0),
            Err(Error::NonPositiveBeta { .. })
        ));
        assert!(matches!(
            canonical(&qubit_h(1.0), -1.0),
            Err(Error::NonPositiveBeta { .. })
        ));
    }

    #[test]
    fn microcanonical_is_uniform_on_the_shell() {
        let h = HermitianOperator::diagonal(&[0.0, 1.0, 1.1, 2.5]);
        let (sigma, d) = microcanonical(&h, 1.0, 0.2).unwrap();
        assert_eq!(d, 2);
        // Entropy of a uniform shell state is ln D.
        assert_relative_eq!(sigma.von_neumann_entropy(), 2.0f64.ln(), epsilon = 1e-12);
        // Diagonal weights: 1/2 on the two shell levels.
        assert_relative_eq!(sigma.entries()[(1, 1)].re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(sigma.entries()[(2, 2)].re, 0.5, epsilon = 1e-14);
        assert!(sigma.entries()[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn microcanonical_window_is_inclusive_and_hard() {
        let h = HermitianOperator::diagonal(&[0.0, 1.0, 2.0]);
        // Eigenvalue exactly on the upper edge is included.
        let (_, d) = microcanonical(&h, 0.5, 0.5).unwrap();
        assert_eq!(d, 2);
        // Just inside of nothing: empty shell errors.
        assert!(matches!(
            microcanonical(&h, 0.4, 0.05),
            Err(Error::EmptyEnergyShell { .. })
        ));
    }

    #[test]
    fn grand_canonical_two_mode_matches_scalar_sum() {
        // Two fermionic modes with energies e₁, e₂: levels (0, e₁, e₂, e₁+e₂)
        // and occupations (0, 1, 1, 2). Scalar route sums the four weights.
        let (e1, e2, beta, mu) = (0.4, 1.1, 1.7, 0.3);
        let h = HermitianOperator::diagonal(&[0.0, e1, e2, e1 + e2]);
        let n = HermitianOperator::diagonal(&[0.0, 1.0, 1.0, 2.0]);
        let z_scalar: f64 = [(0.0, 0.0), (e1, 1.0), (e2, 1.0), (e1 + e2, 2.0)]
            .iter()
            .map(|(e, occ)| (-beta * (e - mu * occ)).exp())
            .sum();
        let (sigma, ln_z, omega) = grand_canonical(&h, &n, beta, mu).unwrap();
        assert_relative_eq!(ln_z, z_scalar.ln(), epsilon = 1e-12);
        // Ω = E − S/β − μ⟨N⟩ through independent routes.
        let energy = sigma.expectation(&h).unwrap();
        let particles = sigma.expectation(&n).unwrap();
        let entropy = sigma.von_neumann_entropy();
        assert_relative_eq!(
            omega,
            energy - entropy / beta - mu * particles,
            epsilon = 1e-10
        );
    }

    #[test]
    fn grand_canonical_rejects_noncommuting_inputs() {
        let h = HermitianOperator::new(CMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                num_complex::Complex64::new(i as f64, 0.0)
            } else {
                num_complex::Complex64::new(0.3, 0.0)
            }
        }))
        .unwrap();
        let n = HermitianOperator::diagonal(&[0.0, 1.0]);
        assert!(matches!(
            grand_canonical(&h, &n, 1.0, 0.5),
            Err(Error::NonCommuting { .. })
        ));
    }

    #[test]
    fn general_exponential_single_term_reproduces_canonical() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = HermitianOperator::random(4, &mut rng);
        let beta = 0.9;
        let (sigma_c, ln_z_c, _) = canonical(&h, beta).unwrap();
        let (sigma_g, ln_z_g) = general_exponential(&[(beta, h)]).unwrap();
        assert_relative_eq!(ln_z_g, ln_z_c, epsilon = 1e-12);
        let diff = crate::spectra::max_abs(&(sigma_g.entries() - sigma_c.entries()));
        assert!(diff < 1e-12, "{diff:.3e}");
    }

    #[test]
    fn general_exponential_entropy_identity() {
        // S(σ) = lnZ + Σ λᵢ Tr(σ Oᵢ).
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let o1 = HermitianOperator::random(5, &mut rng);
        let o2 = HermitianOperator::random(5, &mut rng);
        let terms = vec![(0.8, o1), (-0.25, o2)];
        let (sigma, ln_z) = general_exponential(&terms).unwrap();
        let weighted: f64 = terms
            .iter()
            .map(|(w, o)| w * sigma.expectation(o).unwrap())
            .sum();
        assert_relative_eq!(
            sigma.von_neumann_entropy(),
            ln_z + weighted,
            epsilon = 1e-10
        );
    }

    #[test]
    fn canonical_maximises_entropy_at_fixed_energy() {
        // 20 seeded diagonal perturbations orthogonal to {1, E} keep the
        // energy fixed; none may beat the Gibbs entropy.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let levels = vec![0.0, 0.6, 1.4, 2.1];
        let h = HermitianOperator::diagonal(&levels);
        let beta = 1.2;
        let (sigma, ln_z, _) = canonical(&h, beta).unwrap();
        // Gibbs weights in level order, by the scalar formula.
        let p: Vec<f64> = levels.iter().map(|&e| (-beta * e - ln_z).exp()).collect();
        for _ in 0..20 {
            let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() - 0.5).collect();
            let delta = project_out(&raw, &[vec![1.0; 4], levels.clone()]);
            let scale = max_feasible_step(&p, &delta) * rng.gen::<f64>();
            let perturbed: Vec<f64> = p
                .iter()
                .zip(&delta)
                .map(|(a, d)| a + scale * d)
                .collect();
            let rho = DensityMatrix::diagonal(&perturbed).unwrap();
            let energy_drift = (rho
                .expectation(&HermitianOperator::diagonal(&levels))
                .unwrap()
                - sigma.expectation(&h).unwrap())
            .abs();
            assert!(energy_drift < 1e-6, "energy moved by {energy_drift:.3e}");
            assert!(
                rho.von_neumann_entropy() <= sigma.von_neumann_entropy() + 1e-8,
                "perturbed entropy exceeded the Gibbs entropy"
            );
        }
    }

    #[test]
    fn microcanonical_maximises_entropy_on_the_shell() {
        let h = HermitianOperator::diagonal(&[0.0, 1.0, 1.05, 1.1, 3.0]);
        let (sigma, d) = microcanonical(&h, 1.0, 0.2).unwrap();
        assert_eq!(d, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            // Arbitrary mixture supported on the shell levels 1..=3.
            let mut w = [0.0; 5];
            let mut total = 0.0;
            for k in 1..4 {
                w[k] = rng.gen::<f64>();
                total += w[k];
            }
            for v in &mut w {
                *v /= total;
            }
            let rho = DensityMatrix::diagonal(&w).unwrap();
            assert!(rho.von_neumann_entropy() <= sigma.von_neumann_entropy() + 1e-8);
        }
    }

    #[test]
    fn registry_dispatches_by_kind_and_rejects_unknown() {
        let registry = EnsembleRegistry::with_builtin();
        assert_eq!(
            registry.kinds(),
            vec![
                "canonical",
                "general_exponential",
                "grand_canonical",
                "microcanonical"
            ]
        );
        let spec = EnsembleSpec::canonical(qubit_h(1.0), 1.0);
        let reference = registry.reference(&spec).unwrap();
        assert_eq!(reference.kind, "canonical");
        assert!(reference.ln_z.is_some());
        assert!(matches!(
            registry.get("boltzmann"),
            Err(Error::UnknownKind { .. })
        ));
    }

    #[test]
    fn spec_json_rejects_unknown_fields() {
        let text = r#"{"kind": "canonical", "beta": 1.0, "temperature": 1.0}"#;
        assert!(serde_json::from_str::<EnsembleSpec>(text).is_err());
    }

    /// Gram-Schmidt projection of `v` off the span of `basis` vectors.
    fn project_out(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        for b in basis {
            let mut w = b.clone();
            for o in &ortho {
                let c = dot(&w, o) / dot(o, o);
                for (wi, oi) in w.iter_mut().zip(o) {
                    *wi -= c * oi;
                }
            }
            if dot(&w, &w) > 1e-20 {
                ortho.push(w);
            }
        }
        let mut out = v.to_vec();
        for o in &ortho {
            let c = dot(&out, o) / dot(o, o);
            for (vi, oi) in out.iter_mut().zip(o) {
                *vi -= c * oi;
            }
        }
        out
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Largest step `t` keeping `p + t δ` entrywise nonnegative, halved for
    /// margin.
    fn max_feasible_step(p: &[f64], delta: &[f64]) -> f64 {
        let mut t = f64::INFINITY;
        for (a, d) in p.iter().zip(delta) {
            if *d < 0.0 {
                t = t.min(-a / d);
            }
        }
        if t.is_finite() {
            0.5 * t
        } else {
            1.0
        }
    }
}
