//! Classical approximation algorithms for maximum-eigenvalue 2-local
//! Hamiltonian problems, together with the numerical analysis that certifies
//! their approximation ratios.
//!
//! The library revolves around instances `H = Σ_e w_e P_e ⊗ 𝕀`, where each
//! term acts on a pair of qubits, and the objective is the largest eigenvalue
//! `λ_max(H)`. It provides:
//!
//! * [`pauli`] — Pauli-coefficient operator algebra, instance generators and
//!   encoders (Haar projectors, Bell-state constructions, Max 2-SAT,
//!   Heisenberg, Ising), and the moment-polytope geometry of two-qubit states.
//! * [`exact`] — a desk-scale oracle: exact `λ_max` by diagonalization and the
//!   best product state by multi-start coordinate ascent.
//! * [`sdp`] — the moment-matrix semidefinite relaxation, a unit-diagonal
//!   correlation relaxation for traceless instances, and an internal
//!   first-order operator-splitting solver.
//! * [`rounding`] — Gaussian hyperplane rounding of the relaxation's Gram
//!   vectors to product states, with deterministic parallel Monte Carlo
//!   estimators of energies and ratios.
//! * [`hermite`] — the Hermite/Gaussian analysis engine: expansion
//!   coefficients of `z₁/‖z‖`, truncated series with rigorous remainder
//!   brackets, the hypergeometric linear term, and numerical certification of
//!   the approximation-ratio constants.
//! * [`grothendieck`] — Pauli interaction graphs and Krivine rounding for
//!   bipartite traceless instances, plus the generic 1/3 classical reduction.
//!
//! All randomized routines take explicit 64-bit seeds and draw from
//! counter-based streams, so results are reproducible bit-for-bit regardless
//! of thread count.

// Dense linear-algebra code: indexed loops over matrix coordinates and plain
// parity tests read better here than the iterator rewrites clippy suggests.
#![allow(clippy::needless_range_loop, clippy::manual_is_multiple_of)]

pub mod exact;
pub mod grothendieck;
pub mod hermite;
pub mod pauli;
pub mod rng;
pub mod rounding;
pub mod sdp;
pub mod stats;

use thiserror::Error;

/// Errors produced by the library.
///
/// Validation reports (which collect per-term diagnostics without aborting)
/// are separate; see [`pauli::validate_instance`].
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix expected to be Hermitian deviates from its conjugate
    /// transpose by more than the stated tolerance.
    #[error("matrix is not Hermitian: max deviation {deviation:.3e} exceeds tolerance {tol:.1e}")]
    NotHermitian { deviation: f64, tol: f64 },

    /// An instance or term failed structural validation.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A dimension limit guarding memory use was exceeded.
    #[error("{what}: size {requested} exceeds the supported limit {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    /// Mismatched dimensions between related objects.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// An iterative method failed to reach its tolerance.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A matrix required to be positive semidefinite has an eigenvalue below
    /// the allowed clipping tolerance.
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.6e} below -{tol:.1e}")]
    NotPsd { eigenvalue: f64, tol: f64 },

    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quantity that is guaranteed to satisfy a structural invariant
    /// (e.g. polytope membership of a standard form) violated it numerically.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A traceless instance whose Pauli interaction graph contains an odd
    /// cycle was passed to a bipartite-only pipeline.
    #[error("Pauli interaction graph is not bipartite; odd cycle through vertices {cycle:?}. Use the generic traceless pipeline instead.")]
    NotBipartite { cycle: Vec<(usize, u8)> },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
