//! Density matrices and the entropy functionals defined on them.
//!
//! A [`DensityMatrix`] is Hermitian, positive semidefinite and unit trace,
//! checked at construction. The eigendecomposition found during validation is
//! cached so entropies never re-diagonalise, and all spectral quantities are
//! computed from eigenvalues alone.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectra::{self, eigh, CMatrix, Eigh, HermitianOperator, MatrixJson};
use crate::{Error, Result};

/// Allowed deviation of the trace from one.
pub const TRACE_TOL: f64 = 1e-10;

/// Eigenvalues below this are rejected; eigenvalues in `[EIG_FLOOR, 0)` are
/// clamped to zero and the spectrum renormalised.
pub const EIG_FLOOR: f64 = -1e-10;

/// Eigenvalues at or below this cutoff are treated as exact zeros inside
/// entropy sums (`0 ln 0 = 0`).
pub const ENTROPY_EIG_CUTOFF: f64 = 1e-14;

/// Spectral support threshold: an eigenvalue at or below this counts as part
/// of the kernel, and a squared overlap above it counts as support leakage.
pub const SUPPORT_EPS: f64 = 1e-10;

/// Two states with trace-norm distance below this are entropically identical:
/// `relative_entropy` is zero (up to round-off) exactly on such pairs.
pub const FAITHFULNESS_TOL: f64 = 1e-8;

/// Validated quantum state with a cached eigendecomposition.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct DensityMatrix {
    dim: usize,
    factor_dims: Vec<usize>,
    entries: CMatrix,
    /// Ascending, clamped to `[0, 1]`, summing to one.
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity, clamping eigenvalues
    /// in `[−1e−10, 0)` to zero and renormalising the spectrum.
    pub fn new(entries: CMatrix) -> Result<Self> {
        let dim = entries.nrows();
        Self::with_factors(entries, vec![dim])
    }

    /// Like [`DensityMatrix::new`] with explicit tensor-factor dimensions.
    pub fn with_factors(entries: CMatrix, factor_dims: Vec<usize>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let dim = entries.nrows();
        if factor_dims.is_empty() || factor_dims.iter().product::<usize>() != dim {
            return Err(Error::FactorMismatch {
                factors: factor_dims,
                dim,
            });
        }
        let herm = spectra::hermiticity_error(&entries);
        if herm > spectra::HERMITICITY_TOL {
            return Err(Error::NotHermitian { deviation: herm });
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceNotOne {
                trace: trace.re,
                deviation: (trace.re - 1.0).abs(),
            });
        }
        let decomposition = eigh(&entries);
        Self::from_validated_spectrum(entries, decomposition, factor_dims)
    }

    /// Shared tail of validation: applies the clamping policy to an already
    /// computed decomposition and decides whether entries must be rebuilt.
    fn from_validated_spectrum(
        entries: CMatrix,
        decomposition: Eigh,
        factor_dims: Vec<usize>,
    ) -> Result<Self> {
        let Eigh { values, vectors } = decomposition;
        let min = values.first().copied().unwrap_or(0.0);
        if min < EIG_FLOOR {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
            });
        }
        let clamped: Vec<f64> = values.iter().map(|&x| x.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceNotOne {
                trace: total,
                deviation: (total - 1.0).abs(),
            });
        }
        let renormalised: Vec<f64> = clamped.iter().map(|&x| x / total).collect();
        let adjustment = values
            .iter()
            .zip(&renormalised)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        // Rebuild entries only when clamping actually moved the spectrum;
        // clean inputs keep their exact entries.
        let entries = if adjustment > 1e-15 {
            let lam = CMatrix::from_diagonal(&DVector::from_iterator(
                renormalised.len(),
                renormalised.iter().map(|&x| Complex64::new(x, 0.0)),
            ));
            &vectors * lam * vectors.adjoint()
        } else {
            entries
        };
        Ok(Self {
            dim: entries.nrows(),
            factor_dims,
            entries,
            eigenvalues: renormalised,
            eigenvectors: vectors,
        })
    }

    /// Builds a state from an explicit spectrum and unitary basis, skipping
    /// the eigensolver. Used where the decomposition is known exactly
    /// (Gibbs states, projectors, tensor products).
    pub(crate) fn from_eigensystem(
        values: Vec<f64>,
        vectors: CMatrix,
        factor_dims: Vec<usize>,
    ) -> Result<Self> {
        let dim = vectors.nrows();
        if factor_dims.iter().product::<usize>() != dim || factor_dims.is_empty() {
            return Err(Error::FactorMismatch {
                factors: factor_dims,
                dim,
            });
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted: Vec<f64> = order.iter().map(|&k| values[k]).collect();
        let vectors = CMatrix::from_fn(dim, dim, |r, c| vectors[(r, order[c])]);
        let lam = CMatrix::from_diagonal(&DVector::from_iterator(
            sorted.len(),
            sorted.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let entries = &vectors * lam * vectors.adjoint();
        Self::from_validated_spectrum(
            entries,
            Eigh {
                values: sorted,
                vectors,
            },
            factor_dims,
        )
    }

    /// Pure state `|ψ⟩⟨ψ|`; the amplitude vector is normalised first.
    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::BadMatrixJson {
                reason: "pure state amplitudes are all zero".into(),
            });
        }
        let dim = amplitudes.len();
        let entries = CMatrix::from_fn(dim, dim, |i, j| {
            amplitudes[i] * amplitudes[j].conj() / Complex64::new(norm * norm, 0.0)
        });
        Self::new(entries)
    }

    /// Computational basis state `|k⟩⟨k|`.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: k,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[k] = Complex64::new(1.0, 0.0);
        Self::from_pure(&amps)
    }

    /// `1/dim` on the diagonal.
    pub fn maximally_mixed(dim: usize) -> Self {
        let p = 1.0 / dim as f64;
        Self::diagonal(&vec![p; dim]).expect("uniform diagonal state is valid")
    }

    /// Classical distribution embedded as a diagonal state.
    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        let entries = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(probs[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Ascending, clamped, renormalised spectrum.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary whose columns pair with [`DensityMatrix::eigenvalues`].
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// Tensor product. The spectrum of the product is the product spectrum,
    /// so no re-diagonalisation happens.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let db = other.dim;
        let dim = self.dim * db;
        let values: Vec<f64> = (0..dim)
            .map(|k| self.eigenvalues[k / db] * other.eigenvalues[k % db])
            .collect();
        let vectors = spectra::kron(&self.eigenvectors, &other.eigenvectors);
        let mut factor_dims = self.factor_dims.clone();
        factor_dims.extend_from_slice(&other.factor_dims);
        Self::from_eigensystem(values, vectors, factor_dims)
            .expect("tensor product of valid states is valid")
    }

    /// Traces out every tensor factor not listed in `keep`. Kept factors stay
    /// in their original order; `keep` must be strictly increasing, nonempty
    /// and a strict subset-or-all of the factors.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let nf = self.factor_dims.len();
        if keep.is_empty() {
            return Err(Error::BadFactorSelection {
                reason: "keep set is empty".into(),
            });
        }
        if keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::BadFactorSelection {
                reason: format!("keep set {keep:?} is not strictly increasing"),
            });
        }
        if *keep.last().unwrap() >= nf {
            return Err(Error::BadFactorSelection {
                reason: format!("keep set {keep:?} exceeds the {nf} factors"),
            });
        }
        let traced: Vec<usize> = (0..nf).filter(|f| !keep.contains(f)).collect();
        if traced.is_empty() {
            return Ok(self.clone());
        }
        // Row-major strides over the full factor list.
        let mut stride = vec![1usize; nf];
        for f in (0..nf.saturating_sub(1)).rev() {
            stride[f] = stride[f + 1] * self.factor_dims[f + 1];
        }
        let offsets = |factors: &[usize]| -> Vec<usize> {
            let total: usize = factors.iter().map(|&f| self.factor_dims[f]).product();
            let mut table = Vec::with_capacity(total);
            for mut idx in 0..total {
                let mut offset = 0usize;
                for &f in factors.iter().rev() {
                    let d = self.factor_dims[f];
                    offset += (idx % d) * stride[f];
                    idx /= d;
                }
                table.push(offset);
            }
            table
        };
        let keep_offsets = offsets(keep);
        let traced_offsets = offsets(&traced);
        let dk = keep_offsets.len();
        let reduced = CMatrix::from_fn(dk, dk, |r, c| {
            traced_offsets
                .iter()
                .map(|&t| self.entries[(keep_offsets[r] + t, keep_offsets[c] + t)])
                .sum()
        });
        let kept_dims: Vec<usize> = keep.iter().map(|&f| self.factor_dims[f]).collect();
        DensityMatrix::with_factors(reduced, kept_dims)
    }

    /// Von Neumann entropy `−Σ λ ln λ` in nats, from the cached spectrum.
    pub fn von_neumann_entropy(&self) -> f64 {
        -self
            .eigenvalues
            .iter()
            .filter(|&&x| x > ENTROPY_EIG_CUTOFF)
            .map(|&x| x * x.ln())
            .sum::<f64>()
    }

    /// `Tr(ρ O)` for a Hermitian observable; the result is real.
    pub fn expectation(&self, obs: &HermitianOperator) -> Result<f64> {
        if obs.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: obs.dim(),
            });
        }
        let o = obs.entries();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.entries[(i, j)] * o[(j, i)];
            }
        }
        debug_assert!(acc.im.abs() <= 1e-10, "expectation should be real");
        Ok(acc.re)
    }
}

impl TryFrom<MatrixJson> for DensityMatrix {
    type Error = Error;
    fn try_from(json: MatrixJson) -> Result<Self> {
        let entries = json.to_matrix()?;
        match json.factor_dims {
            Some(f) => Self::with_factors(entries, f),
            None => Self::new(entries),
        }
    }
}

impl From<DensityMatrix> for MatrixJson {
    fn from(rho: DensityMatrix) -> MatrixJson {
        let factors = if rho.factor_dims == vec![rho.dim] {
            None
        } else {
            Some(rho.factor_dims.clone())
        };
        MatrixJson::from_matrix_with_factors(&rho.entries, factors)
    }
}

/// Quantum relative entropy `S(ρ‖σ) = Tr ρ(ln ρ − ln σ)` in nats.
///
/// Support is decided spectrally: the result is `+∞` exactly when some
/// eigenvector of ρ with eigenvalue above [`SUPPORT_EPS`] has squared overlap
/// above [`SUPPORT_EPS`] with the kernel of σ (eigenvalues ≤ [`SUPPORT_EPS`]).
/// Infinity is an ordinary return value, not an error.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    // overlap[(i, j)] = ⟨rᵢ|sⱼ⟩ between eigenbases.
    let overlap = rho.eigenvectors.adjoint() * &sigma.eigenvectors;
    let r = &rho.eigenvalues;
    let s = &sigma.eigenvalues;
    let dim = rho.dim();
    let kernel: Vec<usize> = (0..dim).filter(|&j| s[j] <= SUPPORT_EPS).collect();
    if !kernel.is_empty() {
        for i in 0..dim {
            if r[i] <= SUPPORT_EPS {
                continue;
            }
            let leak: f64 = kernel.iter().map(|&j| overlap[(i, j)].norm_sqr()).sum();
            if leak > SUPPORT_EPS {
                return Ok(f64::INFINITY);
            }
        }
    }
    let rho_term: f64 = r
        .iter()
        .filter(|&&x| x > ENTROPY_EIG_CUTOFF)
        .map(|&x| x * x.ln())
        .sum();
    let mut cross = 0.0;
    for j in 0..dim {
        if s[j] <= SUPPORT_EPS {
            continue;
        }
        let weight: f64 = (0..dim).map(|i| r[i] * overlap[(i, j)].norm_sqr()).sum();
        cross += weight * s[j].ln();
    }
    Ok(rho_term - cross)
}

/// Trace distance `½‖ρ − σ‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(0.5 * spectra::trace_norm_hermitian(&(a.entries() - b.entries())))
}

/// Shannon entropy `−Σ p ln p` of a classical distribution, in nats, with the
/// same eigenvalue cutoff as the quantum entropy.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > ENTROPY_EIG_CUTOFF)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}
