//! Quantum channels in Kraus form and the checks that make "CPTP" concrete.
//!
//! A [`QuantumChannel`] is a nonempty Kraus list `{A_α}` acting as
//! `ρ ↦ Σ_α A_α ρ A_α†`. Trace preservation (`Σ A†A = 1`) and complete
//! positivity (Choi spectrum) are validated at construction; [`verify`]
//! re-derives the full report on demand.
//!
//! Named constructors cover the channels the rest of the crate needs; the
//! [`ChannelRegistry`] exposes the same constructors by kind name so configs
//! can select them at runtime.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::spectra::{
    self, eigh, identity, kron, matrix_fn_complex, max_abs, trace_norm_hermitian, CMatrix,
    HermitianOperator, MatrixJson,
};
use crate::states::DensityMatrix;
use crate::{Error, Result};

/// Construction-time bound on `max |Σ A†A − 1|` and on the negative part of
/// the Choi spectrum.
pub const CPTP_TOL: f64 = 1e-10;

/// Thresholds used by [`QuantumChannel::verify`] when deciding `pass`.
pub const VERIFY_TOL: f64 = 1e-8;

/// Unitarity bound for [`QuantumChannel::unitary`].
pub const UNITARITY_TOL: f64 = 1e-10;

/// Completely positive trace-preserving map in Kraus form. Channels in this
/// crate are square: `dim_in = dim_out = dim`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ChannelJson", into = "ChannelJson")]
pub struct QuantumChannel {
    dim: usize,
    label: String,
    kraus: Vec<CMatrix>,
}

/// Outcome of re-deriving the CPTP properties of a channel.
#[derive(Clone, Copy, Debug)]
pub struct VerifyReport {
    /// `max |Σ A†A − 1|` entrywise.
    pub trace_residual: f64,
    /// Minimum eigenvalue of the Choi matrix (0 exactly when the Kraus count
    /// is below `dim²` and the Gram spectrum stays positive).
    pub choi_min_eigenvalue: f64,
    /// `‖N(1/d) − 1/d‖₁`; informational, unital channels are not required.
    pub unital_residual: f64,
    /// `‖N(σ) − σ‖₁` for the supplied reference state, if any.
    pub fixed_point_residual: Option<f64>,
    /// True when trace, positivity and (if present) fixed-point residuals all
    /// meet [`VERIFY_TOL`].
    pub pass: bool,
}

impl QuantumChannel {
    /// Validates a Kraus list: nonempty, square, consistent dimension, trace
    /// preserving within [`CPTP_TOL`], Choi spectrum above `−CPTP_TOL`.
    pub fn new(label: impl Into<String>, kraus: Vec<CMatrix>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::BadChannelList {
                reason: "Kraus list is empty".into(),
            });
        }
        let dim = kraus[0].nrows();
        for a in &kraus {
            if a.nrows() != a.ncols() {
                return Err(Error::NotSquare {
                    rows: a.nrows(),
                    cols: a.ncols(),
                });
            }
            if a.nrows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.nrows(),
                });
            }
        }
        let channel = Self {
            dim,
            label: label.into(),
            kraus,
        };
        let trace_residual = channel.trace_residual();
        if trace_residual > CPTP_TOL {
            return Err(Error::NotTracePreserving {
                residual: trace_residual,
            });
        }
        let choi_min = channel.choi_min_eigenvalue();
        if choi_min < -CPTP_TOL {
            return Err(Error::NotCompletelyPositive {
                min_eigenvalue: choi_min,
            });
        }
        Ok(channel)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// `max |Σ A†A − 1|`.
    pub fn trace_residual(&self) -> f64 {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for a in &self.kraus {
            acc += a.adjoint() * a;
        }
        max_abs(&(acc - identity(self.dim)))
    }

    /// Minimum Choi eigenvalue, computed from the Kraus Gram matrix
    /// `G_ab = Tr(A_a† A_b)`: the nonzero Choi spectrum equals the Gram
    /// spectrum, and `dim² − rank` exact zeros fill the rest. This keeps the
    /// check O(k²·dim²) instead of O(dim⁶).
    pub fn choi_min_eigenvalue(&self) -> f64 {
        let k = self.kraus.len();
        let gram = CMatrix::from_fn(k, k, |a, b| {
            (self.kraus[a].adjoint() * &self.kraus[b]).trace()
        });
        let min_gram = eigh(&gram)
            .values
            .first()
            .copied()
            .unwrap_or(0.0);
        if k < self.dim * self.dim {
            min_gram.min(0.0)
        } else {
            min_gram
        }
    }

    /// Explicit Choi matrix `Σ_α vec(A_α) vec(A_α)†` with row-major
    /// vectorisation. Dimension `dim²`; intended for small channels and for
    /// cross-checking [`QuantumChannel::choi_min_eigenvalue`].
    pub fn choi_matrix(&self) -> CMatrix {
        let d = self.dim;
        let mut c = CMatrix::zeros(d * d, d * d);
        for a in &self.kraus {
            let v: Vec<Complex64> = (0..d * d).map(|m| a[(m / d, m % d)]).collect();
            for (i, vi) in v.iter().enumerate() {
                for (j, vj) in v.iter().enumerate() {
                    c[(i, j)] += vi * vj.conj();
                }
            }
        }
        c
    }

    /// Applies the channel, revalidating the output state (which also applies
    /// the eigenvalue clamping policy).
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        let out = self.apply_matrix(rho.entries());
        DensityMatrix::with_factors(out, rho.factor_dims().to_vec())
    }

    /// Raw Kraus sum on an arbitrary matrix, no validation of the output.
    pub fn apply_matrix(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for a in &self.kraus {
            out += a * m * a.adjoint();
        }
        out
    }

    /// `‖N(σ) − σ‖₁`.
    pub fn fixed_point_residual(&self, sigma: &DensityMatrix) -> Result<f64> {
        if sigma.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: sigma.dim(),
            });
        }
        Ok(trace_norm_hermitian(
            &(self.apply_matrix(sigma.entries()) - sigma.entries()),
        ))
    }

    /// Re-derives the CPTP report, optionally checking a claimed fixed point.
    pub fn verify(&self, fixed_point: Option<&DensityMatrix>) -> Result<VerifyReport> {
        let trace_residual = self.trace_residual();
        let choi_min_eigenvalue = self.choi_min_eigenvalue();
        let uniform = DensityMatrix::maximally_mixed(self.dim);
        let unital_residual = trace_norm_hermitian(
            &(self.apply_matrix(uniform.entries()) - uniform.entries()),
        );
        let fixed_point_residual = match fixed_point {
            Some(sigma) => Some(self.fixed_point_residual(sigma)?),
            None => None,
        };
        let pass = trace_residual <= VERIFY_TOL
            && choi_min_eigenvalue >= -VERIFY_TOL
            && fixed_point_residual.map_or(true, |r| r <= VERIFY_TOL);
        Ok(VerifyReport {
            trace_residual,
            choi_min_eigenvalue,
            unital_residual,
            fixed_point_residual,
            pass,
        })
    }

    /// Single-Kraus channel from a unitary.
    pub fn unitary(u: CMatrix) -> Result<Self> {
        let residual = max_abs(&(u.adjoint() * &u - identity(u.nrows())));
        if u.nrows() != u.ncols() || residual > UNITARITY_TOL {
            return Err(Error::NotUnitary { residual });
        }
        Self::new("unitary", vec![u])
    }

    /// `ρ ↦ e^{−iHt} ρ e^{iHt}`.
    pub fn hamiltonian_evolution(h: &HermitianOperator, t: f64) -> Result<Self> {
        let u = matrix_fn_complex(h, |x| (Complex64::new(0.0, -x * t)).exp())?;
        let mut channel = Self::unitary(u)?;
        channel.label = format!("evolution(t={t})");
        Ok(channel)
    }

    /// Pinching onto the spectral projectors of `H`: kills coherences between
    /// distinct eigenvalue clusters, acts as identity inside each degenerate
    /// cluster. Fixes every function of `H`, Gibbs states included.
    pub fn dephasing(h: &HermitianOperator) -> Result<Self> {
        let decomposition = h.eigh();
        let values = &decomposition.values;
        let spread = values.last().unwrap_or(&0.0) - values.first().unwrap_or(&0.0);
        let cluster_gap = 1e-10 * spread.max(1.0);
        let d = h.dim();
        let mut kraus = Vec::new();
        let mut start = 0;
        for k in 0..values.len() {
            let boundary = k + 1 == values.len() || values[k + 1] - values[k] > cluster_gap;
            if boundary {
                let mut projector = CMatrix::zeros(d, d);
                for c in start..=k {
                    let v = decomposition.vectors.column(c);
                    projector += v * v.adjoint();
                }
                kraus.push(projector);
                start = k + 1;
            }
        }
        Self::new("dephasing", kraus)
    }

    /// `ρ ↦ (1−p) ρ + p · 1/d`.
    pub fn depolarizing(dim: usize, p: f64) -> Result<Self> {
        let mut channel = Self::replacement_kraus(
            &DensityMatrix::maximally_mixed(dim),
            p,
        )?;
        channel.label = format!("depolarizing(p={p})");
        Ok(channel)
    }

    /// `ρ ↦ (1−p) ρ + p σ`. Kraus set `{√(1−p)·1} ∪ {√(p sᵢ) |vᵢ⟩⟨vⱼ|}` over
    /// the eigensystem of σ; zero-weight operators (sᵢ = 0) are omitted since
    /// they contribute nothing to the map or the trace condition.
    pub fn partial_replacement(sigma: &DensityMatrix, p: f64) -> Result<Self> {
        let mut channel = Self::replacement_kraus(sigma, p)?;
        channel.label = format!("partial_replacement(p={p})");
        Ok(channel)
    }

    fn replacement_kraus(sigma: &DensityMatrix, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BadProbability { value: p });
        }
        let d = sigma.dim();
        let mut kraus = Vec::new();
        if p < 1.0 {
            kraus.push(identity(d).scale((1.0 - p).sqrt()));
        }
        if p > 0.0 {
            let vectors = sigma.eigenvectors();
            for (i, &s) in sigma.eigenvalues().iter().enumerate() {
                if s <= 0.0 {
                    continue;
                }
                let vi = vectors.column(i);
                for j in 0..d {
                    let vj = vectors.column(j);
                    kraus.push((vi * vj.adjoint()).scale((p * s).sqrt()));
                }
            }
        }
        Self::new("replacement", kraus)
    }

    /// Thermal contact for one qubit with level splitting `gap` at inverse
    /// temperature `beta`: generalized amplitude damping with strength
    /// `lambda`. Fixes the Gibbs state `diag(q, 1−q)` with
    /// `q = 1/(1+e^{−β·gap})`; `lambda = 0` is the identity, `lambda = 1`
    /// replaces the state in one application.
    pub fn thermal_qubit(beta: f64, gap: f64, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::BadProbability { value: lambda });
        }
        if !beta.is_finite() || !gap.is_finite() {
            return Err(Error::BadChannelSpec {
                reason: format!("beta ({beta}) and gap ({gap}) must be finite"),
            });
        }
        let q = 1.0 / (1.0 + (-beta * gap).exp());
        let damp = (1.0 - lambda).sqrt();
        let jump = lambda.sqrt();
        let z = Complex64::new(0.0, 0.0);
        let down = |x: f64| Complex64::new(x, 0.0);
        let a1 = CMatrix::from_row_slice(2, 2, &[down(1.0), z, z, down(damp)])
            .scale(q.sqrt());
        let a2 = CMatrix::from_row_slice(2, 2, &[z, down(jump), z, z]).scale(q.sqrt());
        let a3 = CMatrix::from_row_slice(2, 2, &[down(damp), z, z, down(1.0)])
            .scale((1.0 - q).sqrt());
        let a4 = CMatrix::from_row_slice(2, 2, &[z, z, down(jump), z])
            .scale((1.0 - q).sqrt());
        Self::new(
            format!("thermal_qubit(beta={beta}, gap={gap}, lambda={lambda})"),
            vec![a1, a2, a3, a4],
        )
    }

    /// Measure a qubit in the computational basis and record the outcome in
    /// the `|0⟩/|1⟩` populations of a fresh `|0⟩`: Kraus `{|0⟩⟨0|, |0⟩⟨1|}`.
    /// Trace preserving but not unital; it maps everything to `|0⟩⟨0|` and
    /// can lower entropy (ln 2 → 0 on the maximally mixed qubit).
    pub fn measurement_reset() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let m1 = CMatrix::from_row_slice(2, 2, &[one, z, z, z]);
        let m2 = CMatrix::from_row_slice(2, 2, &[z, one, z, z]);
        Self::new("measurement_reset", vec![m1, m2]).expect("reset channel is CPTP")
    }

    /// Lifts the channel to one tensor factor of a larger space, identity on
    /// the rest.
    pub fn embed(&self, site: usize, factor_dims: &[usize]) -> Result<Self> {
        if site >= factor_dims.len() {
            return Err(Error::BadFactorSelection {
                reason: format!(
                    "site {site} out of range for {} factors",
                    factor_dims.len()
                ),
            });
        }
        if factor_dims[site] != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: factor_dims[site],
            });
        }
        let left: usize = factor_dims[..site].iter().product();
        let right: usize = factor_dims[site + 1..].iter().product();
        let kraus = self
            .kraus
            .iter()
            .map(|a| kron(&kron(&identity(left), a), &identity(right)))
            .collect();
        Self::new(format!("{}@site{}", self.label, site), kraus)
    }

    /// Sequential composition; `parts[0]` acts first. The Kraus set is the
    /// full product set, so counts multiply.
    pub fn compose(parts: &[QuantumChannel]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::BadChannelList {
                reason: "compose needs at least one channel".into(),
            });
        };
        let dim = first.dim;
        let mut kraus: Vec<CMatrix> = first.kraus.clone();
        for part in &parts[1..] {
            if part.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: part.dim,
                });
            }
            let mut next = Vec::with_capacity(kraus.len() * part.kraus.len());
            for b in &part.kraus {
                for a in &kraus {
                    next.push(b * a);
                }
            }
            kraus = next;
        }
        let label = parts
            .iter()
            .map(|p| p.label.as_str())
            .collect::<Vec<_>>()
            .join(" then ");
        Self::new(label, kraus)
    }

    /// Convex mixture `Σ w_m N_m`; weights must be nonnegative and sum to one
    /// within 1e−10.
    pub fn mix(weights: &[f64], parts: &[QuantumChannel]) -> Result<Self> {
        if weights.len() != parts.len() || parts.is_empty() {
            return Err(Error::BadWeights {
                reason: format!(
                    "{} weights for {} channels",
                    weights.len(),
                    parts.len()
                ),
            });
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::BadWeights {
                reason: "negative weight".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::BadWeights {
                reason: format!("weights sum to {total}, expected 1"),
            });
        }
        let dim = parts[0].dim;
        let mut kraus = Vec::new();
        for (w, part) in weights.iter().zip(parts) {
            if part.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: part.dim,
                });
            }
            if *w == 0.0 {
                continue;
            }
            for a in &part.kraus {
                kraus.push(a.scale(w.sqrt()));
            }
        }
        Self::new("mixture", kraus)
    }

    /// Random channel by the environment construction: a Haar unitary on
    /// system ⊗ ancilla, ancilla prepared in `|0⟩` and traced out. Kraus
    /// count equals `ancilla_dim`.
    pub fn random_stinespring(
        dim: usize,
        ancilla_dim: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> Result<Self> {
        if dim == 0 || ancilla_dim == 0 {
            return Err(Error::BadChannelSpec {
                reason: "dimensions must be positive".into(),
            });
        }
        let u = spectra::random_unitary(dim * ancilla_dim, rng);
        let kraus: Vec<CMatrix> = (0..ancilla_dim)
            .map(|k| {
                CMatrix::from_fn(dim, dim, |r, c| u[(r * ancilla_dim + k, c * ancilla_dim)])
            })
            .collect();
        Self::new(format!("stinespring(dim={dim}, ancilla={ancilla_dim})"), kraus)
    }

    /// Random unital channel: a convex mixture of `count` Haar unitaries with
    /// random weights.
    pub fn random_unital_mixture(
        dim: usize,
        count: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::BadChannelSpec {
                reason: "mixture needs at least one unitary".into(),
            });
        }
        let raw: Vec<f64> = (0..count).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let parts: Vec<QuantumChannel> = (0..count)
            .map(|_| Self::unitary(spectra::random_unitary(dim, rng)))
            .collect::<Result<_>>()?;
        let mut channel = Self::mix(&weights, &parts)?;
        channel.label = format!("unital_mixture(count={count})");
        Ok(channel)
    }

    /// Random unitaries commuting with `sigma` (block Haar inside each
    /// eigenvalue cluster), mixed with random weights. Such a channel fixes
    /// `sigma` exactly; on a shell state the blocks are the shell and its
    /// complement, so these are shell-preserving rotations.
    pub fn random_commuting_unitary_mixture(
        sigma: &DensityMatrix,
        count: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::BadChannelSpec {
                reason: "mixture needs at least one unitary".into(),
            });
        }
        let d = sigma.dim();
        let values = sigma.eigenvalues();
        let spread = values.last().unwrap_or(&0.0) - values.first().unwrap_or(&0.0);
        let cluster_gap = 1e-10 * spread.max(1.0);
        // Cluster boundaries over the ascending spectrum.
        let mut blocks: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for k in 0..d {
            if k + 1 == d || values[k + 1] - values[k] > cluster_gap {
                blocks.push((start, k + 1));
                start = k + 1;
            }
        }
        let basis = sigma.eigenvectors();
        let parts: Vec<QuantumChannel> = (0..count)
            .map(|_| {
                let mut block_u = CMatrix::zeros(d, d);
                for &(lo, hi) in &blocks {
                    let u = spectra::random_unitary(hi - lo, rng);
                    for r in 0..hi - lo {
                        for c in 0..hi - lo {
                            block_u[(lo + r, lo + c)] = u[(r, c)];
                        }
                    }
                }
                Self::unitary(basis * block_u * basis.adjoint())
            })
            .collect::<Result<_>>()?;
        let raw: Vec<f64> = (0..count).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mut channel = Self::mix(&weights, &parts)?;
        channel.label = format!("commuting_unitary_mixture(count={count})");
        Ok(channel)
    }
}

/// Serialized channel: `{dims: [in, out], label, kraus: [matrix]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelJson {
    pub dims: [usize; 2],
    pub label: String,
    pub kraus: Vec<MatrixJson>,
}

impl TryFrom<ChannelJson> for QuantumChannel {
    type Error = Error;
    fn try_from(json: ChannelJson) -> Result<Self> {
        if json.dims[0] != json.dims[1] {
            return Err(Error::BadChannelList {
                reason: format!(
                    "only square channels are supported, got dims {:?}",
                    json.dims
                ),
            });
        }
        let kraus = json
            .kraus
            .iter()
            .map(|m| m.to_matrix())
            .collect::<Result<Vec<_>>>()?;
        for a in &kraus {
            if a.nrows() != json.dims[0] {
                return Err(Error::DimensionMismatch {
                    expected: json.dims[0],
                    found: a.nrows(),
                });
            }
        }
        QuantumChannel::new(json.label, kraus)
    }
}

impl From<QuantumChannel> for ChannelJson {
    fn from(ch: QuantumChannel) -> ChannelJson {
        ChannelJson {
            dims: [ch.dim, ch.dim],
            label: ch.label.clone(),
            kraus: ch.kraus.iter().map(MatrixJson::from_matrix).collect(),
        }
    }
}

/// Declarative channel description: a kind name plus kind-specific
/// parameters, resolved against a [`ChannelRegistry`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

/// Inputs a builder may draw on: the Hamiltonian and reference state of the
/// surrounding experiment, if one exists.
#[derive(Clone, Copy, Default)]
pub struct BuildContext<'a> {
    pub hamiltonian: Option<&'a HermitianOperator>,
    pub reference: Option<&'a DensityMatrix>,
}

impl<'a> BuildContext<'a> {
    fn require_hamiltonian(&self, kind: &str) -> Result<&'a HermitianOperator> {
        self.hamiltonian.ok_or_else(|| Error::BadChannelSpec {
            reason: format!("channel kind '{kind}' needs a hamiltonian in context"),
        })
    }

    fn require_reference(&self, kind: &str) -> Result<&'a DensityMatrix> {
        self.reference.ok_or_else(|| Error::BadChannelSpec {
            reason: format!("channel kind '{kind}' needs a reference state in context"),
        })
    }
}

/// One constructible channel family, selected by kind name.
pub trait ChannelBuilder: Send + Sync {
    fn kind(&self) -> &'static str;
    fn build(
        &self,
        params: &serde_json::Value,
        ctx: &BuildContext,
        registry: &ChannelRegistry,
        rng: &mut dyn rand::RngCore,
    ) -> Result<QuantumChannel>;
}

fn parse_params<T: serde::de::DeserializeOwned>(
    kind: &str,
    params: &serde_json::Value,
) -> Result<T> {
    let value = if params.is_null() {
        serde_json::Value::Object(serde_json::Map::new())
    } else {
        params.clone()
    };
    serde_json::from_value(value).map_err(|e| Error::BadChannelSpec {
        reason: format!("invalid params for '{kind}': {e}"),
    })
}

macro_rules! builder {
    ($name:ident, $kind:literal, $params:ty, |$p:ident, $ctx:ident, $reg:ident, $rng:ident| $body:expr) => {
        struct $name;
        impl ChannelBuilder for $name {
            fn kind(&self) -> &'static str {
                $kind
            }
            #[allow(unused_variables)]
            fn build(
                &self,
                params: &serde_json::Value,
                $ctx: &BuildContext,
                $reg: &ChannelRegistry,
                $rng: &mut dyn rand::RngCore,
            ) -> Result<QuantumChannel> {
                let $p: $params = parse_params($kind, params)?;
                $body
            }
        }
    };
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeParams {
    time: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbabilityParams {
    p: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThermalParams {
    beta: f64,
    gap: f64,
    lambda: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CountParams {
    count: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StinespringParams {
    ancilla_dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixParams {
    weights: Vec<f64>,
    parts: Vec<ChannelSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComposeParams {
    parts: Vec<ChannelSpec>,
}

builder!(EvolutionBuilder, "hamiltonian_evolution", TimeParams, |p, ctx, reg, rng| {
    QuantumChannel::hamiltonian_evolution(ctx.require_hamiltonian("hamiltonian_evolution")?, p.time)
});

builder!(DephasingBuilder, "dephasing", EmptyParams, |p, ctx, reg, rng| {
    QuantumChannel::dephasing(ctx.require_hamiltonian("dephasing")?)
});

builder!(DepolarizingBuilder, "depolarizing", ProbabilityParams, |p, ctx, reg, rng| {
    let dim = ctx
        .reference
        .map(|r| r.dim())
        .or(ctx.hamiltonian.map(|h| h.dim()))
        .ok_or_else(|| Error::BadChannelSpec {
            reason: "depolarizing needs a hamiltonian or reference in context".into(),
        })?;
    QuantumChannel::depolarizing(dim, p.p)
});

builder!(ReplacementBuilder, "partial_replacement", ProbabilityParams, |p, ctx, reg, rng| {
    QuantumChannel::partial_replacement(ctx.require_reference("partial_replacement")?, p.p)
});

builder!(ThermalBuilder, "thermal_qubit", ThermalParams, |p, ctx, reg, rng| {
    QuantumChannel::thermal_qubit(p.beta, p.gap, p.lambda)
});

builder!(ResetBuilder, "measurement_reset", EmptyParams, |p, ctx, reg, rng| {
    Ok(QuantumChannel::measurement_reset())
});

builder!(KrausBuilder, "kraus", ChannelJson, |p, ctx, reg, rng| {
    QuantumChannel::try_from(p)
});

builder!(StinespringBuilder, "stinespring", StinespringParams, |p, ctx, reg, rng| {
    let dim = ctx
        .reference
        .map(|r| r.dim())
        .or(ctx.hamiltonian.map(|h| h.dim()))
        .ok_or_else(|| Error::BadChannelSpec {
            reason: "stinespring needs a hamiltonian or reference in context".into(),
        })?;
    QuantumChannel::random_stinespring(dim, p.ancilla_dim, rng)
});

builder!(UnitalBuilder, "unital_mixture", CountParams, |p, ctx, reg, rng| {
    let dim = ctx
        .reference
        .map(|r| r.dim())
        .or(ctx.hamiltonian.map(|h| h.dim()))
        .ok_or_else(|| Error::BadChannelSpec {
            reason: "unital_mixture needs a hamiltonian or reference in context".into(),
        })?;
    QuantumChannel::random_unital_mixture(dim, p.count, rng)
});

builder!(CommutingBuilder, "commuting_unitaries", CountParams, |p, ctx, reg, rng| {
    QuantumChannel::random_commuting_unitary_mixture(
        ctx.require_reference("commuting_unitaries")?,
        p.count,
        rng,
    )
});

builder!(MixBuilder, "mix", MixParams, |p, ctx, reg, rng| {
    let parts = p
        .parts
        .iter()
        .map(|spec| reg.build(spec, ctx, rng))
        .collect::<Result<Vec<_>>>()?;
    QuantumChannel::mix(&p.weights, &parts)
});

builder!(ComposeBuilder, "compose", ComposeParams, |p, ctx, reg, rng| {
    let parts = p
        .parts
        .iter()
        .map(|spec| reg.build(spec, ctx, rng))
        .collect::<Result<Vec<_>>>()?;
    QuantumChannel::compose(&parts)
});

/// Name-keyed channel constructors, deterministically ordered.
pub struct ChannelRegistry {
    builders: BTreeMap<&'static str, Box<dyn ChannelBuilder>>,
}

impl ChannelRegistry {
    pub fn with_builtin() -> Self {
        let mut registry = Self {
            builders: BTreeMap::new(),
        };
        registry.register(Box::new(EvolutionBuilder));
        registry.register(Box::new(DephasingBuilder));
        registry.register(Box::new(DepolarizingBuilder));
        registry.register(Box::new(ReplacementBuilder));
        registry.register(Box::new(ThermalBuilder));
        registry.register(Box::new(ResetBuilder));
        registry.register(Box::new(KrausBuilder));
        registry.register(Box::new(StinespringBuilder));
        registry.register(Box::new(UnitalBuilder));
        registry.register(Box::new(CommutingBuilder));
        registry.register(Box::new(MixBuilder));
        registry.register(Box::new(ComposeBuilder));
        registry
    }

    pub fn register(&mut self, builder: Box<dyn ChannelBuilder>) {
        self.builders.insert(builder.kind(), builder);
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }

    pub fn build(
        &self,
        spec: &ChannelSpec,
        ctx: &BuildContext,
        rng: &mut dyn rand::RngCore,
    ) -> Result<QuantumChannel> {
        let builder = self
            .builders
            .get(spec.kind.as_str())
            .ok_or_else(|| Error::UnknownKind {
                kind: spec.kind.clone(),
                known: self.kinds().iter().map(|s| s.to_string()).collect(),
            })?;
        builder.build(&spec.params, ctx, self, rng)
    }
}

impl Default for ChannelRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::relative_entropy;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let g = spectra::random_gaussian_matrix(dim, rng);
        let m = &g * g.adjoint();
        let trace = m.trace().re;
        DensityMatrix::new(m / Complex64::new(trace, 0.0)).unwrap()
    }

    #[test]
    fn rejects_non_trace_preserving_kraus() {
        // {√½·1}: Σ A†A = ½·1, residual exactly ½.
        let half = identity(2).scale(0.5f64.sqrt());
        match QuantumChannel::new("bad", vec![half]) {
            Err(Error::NotTracePreserving { residual }) => {
                assert_relative_eq!(residual, 0.5, epsilon = 1e-12)
            }
            other => panic!("expected trace error, got {other:?}"),
        }
        // {½·1}: Σ A†A = ¼·1, residual ¾.
        let quarter = identity(2).scale(0.5);
        match QuantumChannel::new("bad", vec![quarter]) {
            Err(Error::NotTracePreserving { residual }) => {
                assert_relative_eq!(residual, 0.75, epsilon = 1e-12)
            }
            other => panic!("expected trace error, got {other:?}"),
        }
    }

    #[test]
    fn unitary_channel_verifies_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let u = spectra::random_unitary(3, &mut rng);
        let channel = QuantumChannel::unitary(u).unwrap();
        let report = channel.verify(None).unwrap();
        assert!(report.pass);
        assert!(report.trace_residual < 1e-12);
        assert!(report.choi_min_eigenvalue > -1e-12);
        assert!(report.unital_residual < 1e-12);
    }

    #[test]
    fn unitary_rejects_non_unitary_input() {
        let m = identity(2).scale(2.0);
        assert!(matches!(
            QuantumChannel::unitary(m),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn gram_choi_spectrum_matches_explicit_choi() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..5 {
            let channel = QuantumChannel::random_stinespring(3, 3, &mut rng).unwrap();
            let gram_min = channel.choi_min_eigenvalue();
            let explicit_min = eigh(&channel.choi_matrix()).values[0];
            assert!(
                (gram_min - explicit_min).abs() < 1e-10,
                "{gram_min} vs {explicit_min}"
            );
        }
    }

    #[test]
    fn partial_replacement_mixes_toward_sigma_and_fixes_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let sigma = random_state(3, &mut rng);
        let rho = random_state(3, &mut rng);
        let p = 0.3;
        let channel = QuantumChannel::partial_replacement(&sigma, p).unwrap();
        // Action matches the convex formula directly.
        let out = channel.apply(&rho).unwrap();
        let expected = rho.entries().scale(1.0 - p) + sigma.entries().scale(p);
        assert!(max_abs(&(out.entries() - &expected)) < 1e-10);
        // σ is a fixed point.
        let report = channel.verify(Some(&sigma)).unwrap();
        assert!(report.pass);
        assert!(report.fixed_point_residual.unwrap() < 1e-10);
    }

    #[test]
    fn depolarizing_fully_mixes_at_p_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let rho = random_state(4, &mut rng);
        let channel = QuantumChannel::depolarizing(4, 1.0).unwrap();
        let out = channel.apply(&rho).unwrap();
        let uniform = DensityMatrix::maximally_mixed(4);
        assert!(max_abs(&(out.entries() - uniform.entries())) < 1e-12);
    }

    #[test]
    fn thermal_qubit_relaxes_to_gibbs() {
        // 200 applications from |1⟩⟨1| reach diag(q, 1−q) with
        // q = 1/(1+e^{−1}) ≈ 0.7311.
        let channel = QuantumChannel::thermal_qubit(1.0, 1.0, 0.3).unwrap();
        let mut rho = DensityMatrix::basis_state(2, 1).unwrap();
        for _ in 0..200 {
            rho = channel.apply(&rho).unwrap();
        }
        let q = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((rho.entries()[(0, 0)].re - q).abs() < 1e-6);
        assert!((rho.entries()[(1, 1)].re - (1.0 - q)).abs() < 1e-6);
        // And the Gibbs state is an exact fixed point.
        let gibbs = DensityMatrix::diagonal(&[q, 1.0 - q]).unwrap();
        assert!(channel.fixed_point_residual(&gibbs).unwrap() < 1e-10);
    }

    #[test]
    fn thermal_qubit_extremes() {
        // λ = 0 is the identity.
        let id = QuantumChannel::thermal_qubit(2.0, 1.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let rho = random_state(2, &mut rng);
        assert!(max_abs(&(id.apply(&rho).unwrap().entries() - rho.entries())) < 1e-12);
        // λ = 1 replaces in one step.
        let replace = QuantumChannel::thermal_qubit(2.0, 1.0, 1.0).unwrap();
        let out = replace.apply(&rho).unwrap();
        let q = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((out.entries()[(0, 0)].re - q).abs() < 1e-12);
        assert!(out.entries()[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn measurement_reset_lowers_entropy_from_ln2_to_zero() {
        let channel = QuantumChannel::measurement_reset();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_relative_eq!(mixed.von_neumann_entropy(), 2.0f64.ln(), epsilon = 1e-14);
        let out = channel.apply(&mixed).unwrap();
        assert_eq!(out.von_neumann_entropy(), 0.0);
        let expected = DensityMatrix::basis_state(2, 0).unwrap();
        assert!(max_abs(&(out.entries() - expected.entries())) < 1e-14);
        // Not unital, by a margin of a full trace norm.
        let report = channel.verify(None).unwrap();
        assert!(report.pass);
        assert!(report.unital_residual > 0.9);
    }

    #[test]
    fn dephasing_keeps_coherence_inside_degenerate_clusters() {
        // H = diag(1, 1, 2): coherence between the two degenerate levels
        // survives, coherence to the third dies.
        let h = HermitianOperator::diagonal(&[1.0, 1.0, 2.0]);
        let channel = QuantumChannel::dephasing(&h).unwrap();
        assert_eq!(channel.kraus().len(), 2);
        let third = 1.0 / 3.0;
        let mut m = CMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = Complex64::new(third, 0.0);
            }
        }
        let rho = DensityMatrix::new(m).unwrap();
        let out = channel.apply(&rho).unwrap();
        assert_relative_eq!(out.entries()[(0, 1)].re, third, epsilon = 1e-12);
        assert!(out.entries()[(0, 2)].norm() < 1e-12);
        assert!(out.entries()[(1, 2)].norm() < 1e-12);
    }

    #[test]
    fn dephasing_fixes_the_gibbs_state_of_its_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let h = HermitianOperator::random(4, &mut rng);
        let (gibbs, _, _) = crate::ensembles::canonical(&h, 0.8).unwrap();
        let channel = QuantumChannel::dephasing(&h).unwrap();
        assert!(channel.fixed_point_residual(&gibbs).unwrap() < 1e-10);
    }

    #[test]
    fn embed_acts_locally() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let a = random_state(2, &mut rng);
        let b = random_state(2, &mut rng);
        let c = random_state(2, &mut rng);
        let joint = a.tensor(&b).tensor(&c);
        let local = QuantumChannel::measurement_reset();
        let embedded = local.embed(1, &[2, 2, 2]).unwrap();
        let out = embedded.apply(&joint).unwrap();
        let expected = a
            .tensor(&local.apply(&b).unwrap())
            .tensor(&c);
        assert!(max_abs(&(out.entries() - expected.entries())) < 1e-12);
    }

    #[test]
    fn compose_equals_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let n1 = QuantumChannel::random_stinespring(2, 2, &mut rng).unwrap();
        let n2 = QuantumChannel::depolarizing(2, 0.4).unwrap();
        let composed = QuantumChannel::compose(&[n1.clone(), n2.clone()]).unwrap();
        let rho = random_state(2, &mut rng);
        let sequential = n2.apply(&n1.apply(&rho).unwrap()).unwrap();
        let direct = composed.apply(&rho).unwrap();
        assert!(max_abs(&(direct.entries() - sequential.entries())) < 1e-12);
        assert_eq!(composed.kraus().len(), n1.kraus().len() * n2.kraus().len());
    }

    #[test]
    fn mix_is_the_convex_combination_of_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(58);
        let n1 = QuantumChannel::random_stinespring(3, 2, &mut rng).unwrap();
        let n2 = QuantumChannel::random_stinespring(3, 2, &mut rng).unwrap();
        let rho = random_state(3, &mut rng);
        let mixed = QuantumChannel::mix(&[0.25, 0.75], &[n1.clone(), n2.clone()]).unwrap();
        let expected = n1.apply(&rho).unwrap().entries().scale(0.25)
            + n2.apply(&rho).unwrap().entries().scale(0.75);
        assert!(max_abs(&(mixed.apply(&rho).unwrap().entries() - &expected)) < 1e-12);
        assert!(QuantumChannel::mix(&[0.5, 0.6], &[n1, n2]).is_err());
    }

    #[test]
    fn stinespring_channels_are_cptp_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for dim in 2..=4usize {
            for anc in 2..=4usize {
                let channel = QuantumChannel::random_stinespring(dim, anc, &mut rng).unwrap();
                assert_eq!(channel.kraus().len(), anc);
                assert!(channel.verify(None).unwrap().pass);
            }
        }
        // Same seed, same channel.
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let c1 = QuantumChannel::random_stinespring(3, 2, &mut r1).unwrap();
        let c2 = QuantumChannel::random_stinespring(3, 2, &mut r2).unwrap();
        for (a, b) in c1.kraus().iter().zip(c2.kraus()) {
            assert_eq!(max_abs(&(a - b)), 0.0);
        }
    }

    #[test]
    fn unital_mixture_fixes_the_uniform_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let channel = QuantumChannel::random_unital_mixture(4, 3, &mut rng).unwrap();
        let report = channel.verify(None).unwrap();
        assert!(report.pass);
        assert!(report.unital_residual < 1e-10);
    }

    #[test]
    fn commuting_unitary_mixture_fixes_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let h = HermitianOperator::diagonal(&[0.0, 1.0, 1.0, 2.5]);
        let (shell, d) = crate::ensembles::microcanonical(&h, 1.0, 0.1).unwrap();
        assert_eq!(d, 2);
        let channel =
            QuantumChannel::random_commuting_unitary_mixture(&shell, 3, &mut rng).unwrap();
        assert!(channel.fixed_point_residual(&shell).unwrap() < 1e-10);
    }

    #[test]
    fn unital_channels_never_decrease_entropy_here() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for _ in 0..20 {
            let rho = random_state(3, &mut rng);
            let channel = QuantumChannel::random_unital_mixture(3, 2, &mut rng).unwrap();
            let out = channel.apply(&rho).unwrap();
            assert!(out.von_neumann_entropy() >= rho.von_neumann_entropy() - 1e-9);
        }
    }

    #[test]
    fn relative_entropy_is_monotone_under_these_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..10 {
            let rho = random_state(3, &mut rng);
            let sigma = random_state(3, &mut rng);
            let channel = QuantumChannel::random_stinespring(3, 2, &mut rng).unwrap();
            let before = relative_entropy(&rho, &sigma).unwrap();
            let after = relative_entropy(
                &channel.apply(&rho).unwrap(),
                &channel.apply(&sigma).unwrap(),
            )
            .unwrap();
            assert!(after <= before + 1e-9, "{after} > {before}");
        }
    }

    #[test]
    fn channel_json_round_trips() {
        let channel = QuantumChannel::thermal_qubit(1.0, 1.0, 0.5).unwrap();
        let json = serde_json::to_string(&channel).unwrap();
        let back: QuantumChannel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.kraus().len(), channel.kraus().len());
        for (a, b) in back.kraus().iter().zip(channel.kraus()) {
            assert_eq!(max_abs(&(a - b)), 0.0);
        }
    }

    #[test]
    fn registry_builds_channels_from_specs() {
        let registry = ChannelRegistry::with_builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let h = HermitianOperator::diagonal(&[0.0, 1.0]);
        let (gibbs, _, _) = crate::ensembles::canonical(&h, 1.0).unwrap();
        let ctx = BuildContext {
            hamiltonian: Some(&h),
            reference: Some(&gibbs),
        };
        let spec: ChannelSpec = serde_json::from_str(
            r#"{"kind": "mix", "params": {"weights": [0.5, 0.5], "parts": [
                {"kind": "dephasing"},
                {"kind": "partial_replacement", "params": {"p": 0.2}}
            ]}}"#,
        )
        .unwrap();
        let channel = registry.build(&spec, &ctx, &mut rng).unwrap();
        assert!(channel.fixed_point_residual(&gibbs).unwrap() < 1e-10);

        let unknown: ChannelSpec =
            serde_json::from_str(r#"{"kind": "teleport"}"#).unwrap();
        assert!(matches!(
            registry.build(&unknown, &ctx, &mut rng),
            Err(Error::UnknownKind { .. })
        ));

        let bad_params: ChannelSpec =
            serde_json::from_str(r#"{"kind": "depolarizing", "params": {"q": 0.5}}"#).unwrap();
        assert!(registry.build(&bad_params, &ctx, &mut rng).is_err());
    }
}
