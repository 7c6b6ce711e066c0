//! Validated Hermitian operators and the spectral calculus built on them.
//!
//! Every higher-level quantity in this crate (entropies, Gibbs weights,
//! channel verification) is defined through eigenvalues and spectral
//! projectors, so this module owns the one eigensolver call site and the
//! tolerances that make "Hermitian" and "reconstructs" precise.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;

/// Largest tolerated entry of `H − H†` when validating Hermiticity.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Guaranteed round-trip accuracy of [`eigh`]: `‖V Λ V† − H‖_max` stays below
/// this bound for validated inputs.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

/// Max-norm of the anti-Hermitian part, `max_ij |M − M†|_ij`.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Largest entry of `|M|` in absolute value.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `dim × dim` complex identity.
pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Square complex matrix whose Hermiticity has been checked on construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct HermitianOperator {
    dim: usize,
    factor_dims: Option<Vec<usize>>,
    entries: CMatrix,
}

impl HermitianOperator {
    /// Validates squareness and `‖H − H†‖_max ≤ 1e−12`.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let deviation = hermiticity_error(&entries);
        if deviation > HERMITICITY_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            dim: entries.nrows(),
            factor_dims: None,
            entries,
        })
    }

    /// Attaches tensor-factor dimensions; their product must equal `dim`.
    pub fn with_factors(entries: CMatrix, factor_dims: Vec<usize>) -> Result<Self> {
        let mut op = Self::new(entries)?;
        if factor_dims.iter().product::<usize>() != op.dim || factor_dims.is_empty() {
            return Err(Error::FactorMismatch {
                factors: factor_dims,
                dim: op.dim,
            });
        }
        op.factor_dims = Some(factor_dims);
        Ok(op)
    }

    /// Real diagonal operator.
    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            dim: n,
            factor_dims: None,
            entries: CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(values[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    /// GUE-style random Hermitian matrix, `(G + G†)/2` with standard normal
    /// entries. Used for seeded test inputs.
    pub fn random(dim: usize, rng: &mut (impl Rng + ?Sized)) -> Self {
        let g = random_gaussian_matrix(dim, rng);
        let h = (&g + g.adjoint()).scale(0.5);
        Self {
            dim,
            factor_dims: None,
            entries: h,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factor_dims(&self) -> Option<&[usize]> {
        self.factor_dims.as_deref()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Eigendecomposition, ascending eigenvalues.
    pub fn eigh(&self) -> Eigh {
        eigh(&self.entries)
    }
}

impl TryFrom<MatrixJson> for HermitianOperator {
    type Error = Error;
    fn try_from(json: MatrixJson) -> Result<Self> {
        let entries = json.to_matrix()?;
        match json.factor_dims {
            Some(f) => Self::with_factors(entries, f),
            None => Self::new(entries),
        }
    }
}

impl From<HermitianOperator> for MatrixJson {
    fn from(op: HermitianOperator) -> MatrixJson {
        MatrixJson::from_matrix_with_factors(&op.entries, op.factor_dims.clone())
    }
}

/// Result of a Hermitian eigendecomposition. `values[k]` pairs with column
/// `k` of `vectors`; values are ascending and `vectors` is unitary.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    /// Rebuilds `V Λ V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let lam = CMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        &self.vectors * lam * self.vectors.adjoint()
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted ascending.
///
/// Degenerate eigenvalues give an arbitrary orthonormal basis of their
/// eigenspace; callers must only rely on spectral projectors, never on the
/// individual vectors of a degenerate cluster.
///
/// The backend's iterative solver can mis-report eigenvalues on matrices
/// with exactly degenerate clusters while still returning a valid
/// orthonormal eigenbasis, so the values are recomputed here as Rayleigh
/// quotients `vᵢ† M vᵢ` (exact for a true eigenvector, second-order
/// accurate otherwise) and the decomposition is checked before returning.
pub fn eigh(h: &CMatrix) -> Eigh {
    let n = h.nrows();
    let se = h.clone().symmetric_eigen();
    let mv = h * &se.eigenvectors;
    let rayleigh: Vec<f64> = (0..n)
        .map(|i| se.eigenvectors.column(i).dotc(&mv.column(i)).re)
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rayleigh[a].total_cmp(&rayleigh[b]));
    let values: Vec<f64> = order.iter().map(|&k| rayleigh[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);

    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut residual = 0.0f64;
    for (c, &k) in order.iter().enumerate() {
        for r in 0..n {
            let dev = (mv[(r, k)] - vectors[(r, c)].scale(values[c])).norm();
            residual = residual.max(dev);
        }
    }
    assert!(
        residual <= 1e-6 * scale.max(1.0),
        "eigendecomposition failed to converge: residual {residual:.3e} on a \
         {n}x{n} matrix (max eigenvalue magnitude {scale:.3e})"
    );
    Eigh { values, vectors }
}

/// Applies a real scalar function to the spectrum: `f(H) = V f(Λ) V†`.
/// Errors if `f` is not finite on some eigenvalue.
pub fn matrix_fn(h: &HermitianOperator, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    matrix_fn_complex(h, |x| Complex64::new(f(x), 0.0))
}

/// Applies a complex scalar function to the spectrum. The workhorse behind
/// `exp(−iHt)` and friends; the result is not Hermitian in general.
pub fn matrix_fn_complex(
    h: &HermitianOperator,
    f: impl Fn(f64) -> Complex64,
) -> Result<CMatrix> {
    let Eigh { values, vectors } = h.eigh();
    let mut fvals = Vec::with_capacity(values.len());
    for &x in &values {
        let y = f(x);
        if !y.re.is_finite() || !y.im.is_finite() {
            return Err(Error::NonFiniteFunction { eigenvalue: x });
        }
        fvals.push(y);
    }
    let lam = CMatrix::from_diagonal(&DVector::from_vec(fvals));
    Ok(&vectors * lam * vectors.adjoint())
}

/// Trace norm `‖M‖₁ = Σ|λ_i|` of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    debug_assert!(hermiticity_error(m) < 1e-8, "trace norm needs Hermitian input");
    eigh(m).values.iter().map(|x| x.abs()).sum()
}

/// Frobenius norm of the commutator `[A, B]`.
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    (a * b - b * a).norm()
}

/// Complex matrix with independent standard normal real and imaginary parts.
pub fn random_gaussian_matrix(dim: usize, rng: &mut (impl Rng + ?Sized)) -> CMatrix {
    use rand::distributions::Distribution;
    let normal = GaussianPair;
    CMatrix::from_fn(dim, dim, |_, _| normal.sample(rng))
}

/// Box-Muller standard normal pair packed into one complex number.
struct GaussianPair;

impl rand::distributions::Distribution<Complex64> for GaussianPair {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let u1: f64 = loop {
            let u = rng.gen::<f64>();
            if u > 0.0 {
                break u;
            }
        };
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        Complex64::new(r * theta.cos(), r * theta.sin())
    }
}

/// Haar-distributed unitary, sampled by QR-orthonormalising a Gaussian matrix
/// with the positive-diagonal phase convention.
pub fn random_unitary(dim: usize, rng: &mut (impl Rng + ?Sized)) -> CMatrix {
    let g = random_gaussian_matrix(dim, rng);
    let mut q = g;
    // Modified Gram-Schmidt; normalising against the running norm plays the
    // role of R having a positive real diagonal, which makes Q Haar.
    for j in 0..dim {
        for k in 0..j {
            let proj: Complex64 = (0..dim).map(|r| q[(r, k)].conj() * q[(r, j)]).sum();
            for r in 0..dim {
                let sub = proj * q[(r, k)];
                q[(r, j)] -= sub;
            }
        }
        let norm: f64 = (0..dim).map(|r| q[(r, j)].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..dim {
            q[(r, j)] /= Complex64::new(norm, 0.0);
        }
    }
    q
}

/// Row-major serialized form of a complex matrix:
/// `{dim, factor_dims?, re, im}` with `re`/`im` of length `dim²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_dims: Option<Vec<usize>>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self::from_matrix_with_factors(m, None)
    }

    pub fn from_matrix_with_factors(m: &CMatrix, factor_dims: Option<Vec<usize>>) -> Self {
        let dim = m.nrows();
        let mut re = Vec::with_capacity(dim * dim);
        let mut im = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self {
            dim,
            factor_dims,
            re,
            im,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.dim;
        if self.re.len() != n * n || self.im.len() != n * n {
            return Err(Error::BadMatrixJson {
                reason: format!(
                    "dim {} needs {} entries, got re: {}, im: {}",
                    n,
                    n * n,
                    self.re.len(),
                    self.im.len()
                ),
            });
        }
        if let Some(f) = &self.factor_dims {
            if f.is_empty() || f.iter().product::<usize>() != n {
                return Err(Error::BadMatrixJson {
                    reason: format!("factor_dims {f:?} do not multiply to dim {n}"),
                });
            }
        }
        Ok(CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(self.re[i * n + j], self.im[i * n + j])
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_fn(2, 2, |i, j| Complex64::new((i + 2 * j) as f64, 0.0));
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn rejects_non_square() {
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn eigh_sorts_ascending_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2usize, 3, 5, 8, 13] {
            let h = HermitianOperator::random(dim, &mut rng);
            let e = h.eigh();
            for w in e.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
            let err = max_abs(&(e.reconstruct() - h.entries()));
            assert!(err <= RECONSTRUCTION_TOL, "dim {dim}: {err:.3e}");
            let orth = max_abs(&(e.vectors.adjoint() * &e.vectors - identity(dim)));
            assert!(orth <= RECONSTRUCTION_TOL, "dim {dim}: {orth:.3e}");
        }
    }

    #[test]
    fn eigh_handles_degenerate_spectra_via_projectors() {
        // diag(1, 1, 2): the two-fold eigenspace must reproduce its projector
        // even though the individual vectors are basis-dependent.
        let h = HermitianOperator::diagonal(&[1.0, 1.0, 2.0]);
        let e = h.eigh();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let v0 = e.vectors.column(0);
        let v1 = e.vectors.column(1);
        let proj = v0 * v0.adjoint() + v1 * v1.adjoint();
        let expected =
            CMatrix::from_diagonal(&DVector::from_vec(vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ]));
        assert!(max_abs(&(proj - expected)) < 1e-12);
    }

    #[test]
    fn matrix_fn_exponentiates_diagonals_exactly() {
        let h = HermitianOperator::diagonal(&[0.0, 1.0]);
        let m = matrix_fn(&h, |x| (-x).exp()).unwrap();
        assert!((m[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!((m[(1, 1)].re - (-1.0f64).exp()).abs() < 1e-14);
        assert!(m[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn matrix_fn_rejects_non_finite_values() {
        let h = HermitianOperator::diagonal(&[0.0, 1.0]);
        assert!(matches!(
            matrix_fn(&h, |x| 1.0 / x),
            Err(Error::NonFiniteFunction { .. })
        ));
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [2usize, 4, 9] {
            let u = random_unitary(dim, &mut rng);
            let err = max_abs(&(u.adjoint() * &u - identity(dim)));
            assert!(err < 1e-12, "dim {dim}: {err:.3e}");
        }
    }

    #[test]
    fn trace_norm_matches_hand_computed_difference() {
        // diag(0.9, 0.1) - diag(0.5, 0.5) has eigenvalues ±0.4.
        let a = CMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(0.9, 0.0),
            Complex64::new(0.1, 0.0),
        ]));
        let b = CMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
        ]));
        assert!((trace_norm_hermitian(&(a - b)) - 0.8).abs() < 1e-14);
    }

    #[test]
    fn matrix_json_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = HermitianOperator::random(4, &mut rng);
        let json = serde_json::to_string(&h).unwrap();
        let back: HermitianOperator = serde_json::from_str(&json).unwrap();
        assert_eq!(max_abs(&(back.entries() - h.entries())), 0.0);
    }

    #[test]
    fn matrix_json_rejects_unknown_fields() {
        let text = r#"{"dim": 1, "re": [1.0], "im": [0.0], "comment": "nope"}"#;
        assert!(serde_json::from_str::<MatrixJson>(text).is_err());
    }

    #[test]
    fn matrix_json_rejects_wrong_lengths() {
        let text = r#"{"dim": 2, "re": [1.0], "im": [0.0]}"#;
        let parsed: MatrixJson = serde_json::from_str(text).unwrap();
        assert!(parsed.to_matrix().is_err());
    }
}
