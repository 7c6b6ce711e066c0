//! Toolkit for checking entropy-production inequalities on finite-dimensional
//! quantum systems and on classical field grids.
//!
//! The crate is organised around one quantity, the relative entropy
//! `S(ρ‖σ) = Tr ρ(ln ρ − ln σ)`, measured in nats. Everything else supports
//! producing the two arguments and the maps between them:
//!
//! * [`spectra`] — validated Hermitian operators and spectral calculus,
//! * [`states`] — density matrices, entropies, partial traces,
//! * [`ensembles`] — microcanonical / canonical / grand-canonical and general
//!   exponential reference states,
//! * [`channels`] — Kraus-form quantum channels and their CPTP verification,
//! * [`secondlaw`] — ledgers certifying `ΔS(ρ‖σ) ≤ 0` for channels that fix σ,
//! * [`lightcone`] — a small spin-chain simulator tracking relative entropy
//!   inside an expanding-then-contracting causal diamond,
//! * [`geometry`] — finite-difference checks of the classical entropy current
//!   `s^μ = −β_ν T^{μν} − α N^μ + p β^μ` on flat 1+1-dimensional grids.

#![forbid(unsafe_code)]

use thiserror::Error;

pub mod channels;
pub mod ensembles;
pub mod geometry;
pub mod lightcone;
pub mod secondlaw;
pub mod spectra;
pub mod states;

/// Crate-wide error type. Numeric residuals are carried so callers can report
/// how far an input missed a contract, not only that it missed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |H - H†| entry = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("trace must be 1, found {trace:.12} (|trace - 1| = {deviation:.3e})")]
    TraceNotOne { trace: f64, deviation: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue = {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("factor dimensions {factors:?} do not multiply to the matrix dimension {dim}")]
    FactorMismatch { factors: Vec<usize>, dim: usize },

    #[error("invalid factor selection: {reason}")]
    BadFactorSelection { reason: String },

    #[error("function value is not finite at eigenvalue {eigenvalue}")]
    NonFiniteFunction { eigenvalue: f64 },

    #[error("serialized matrix is malformed: {reason}")]
    BadMatrixJson { reason: String },

    #[error("energy shell [{lo}, {hi}] contains no eigenvalues")]
    EmptyEnergyShell { lo: f64, hi: f64 },

    #[error("inverse temperature must be positive, found {beta}")]
    NonPositiveBeta { beta: f64 },

    #[error("operators do not commute: ‖[A, B]‖_F = {residual:.3e}")]
    NonCommuting { residual: f64 },

    #[error("ensemble specification is invalid: {reason}")]
    BadEnsembleSpec { reason: String },

    #[error("contour resolution must be at least 2, got {requested}")]
    BadResolution { requested: usize },

    #[error("unknown strategy kind '{kind}', known kinds: {known:?}")]
    UnknownKind { kind: String, known: Vec<String> },

    #[error("Kraus operators do not preserve the trace: max |ΣA†A - 1| entry = {residual:.3e}")]
    NotTracePreserving { residual: f64 },

    #[error("channel is not completely positive: min Choi eigenvalue = {min_eigenvalue:.3e}")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("matrix is not unitary: max |U†U - 1| entry = {residual:.3e}")]
    NotUnitary { residual: f64 },

    #[error("probability out of range [0, 1]: {value}")]
    BadProbability { value: f64 },

    #[error("mixture weights are invalid: {reason}")]
    BadWeights { reason: String },

    #[error("channel list is invalid: {reason}")]
    BadChannelList { reason: String },

    #[error("channel does not fix the reference state: ‖N(σ) - σ‖₁ = {residual:.3e}")]
    DoesNotFixReference { residual: f64 },

    #[error("channel parameters are invalid: {reason}")]
    BadChannelSpec { reason: String },

    #[error("chain supports at most {max} sites, requested {requested}")]
    ChainTooLong { requested: usize, max: usize },

    #[error("chain specification is invalid: {reason}")]
    BadChainSpec { reason: String },

    #[error("schedule step {step} is invalid: {reason}")]
    BadScheduleStep { step: usize, reason: String },

    #[error("gate pair ({left}, {right}) has mismatched local fields: |h_l - h_r| = {residual:.3e}; the gate would not fix the reference state")]
    GateFieldMismatch { left: usize, right: usize, residual: f64 },

    #[error("field grid is invalid: {reason}")]
    BadFieldGrid { reason: String },

    #[error("diamond does not fit the grid: {reason}")]
    BadDiamond { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
