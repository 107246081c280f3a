//! Pauli-basis algebra for 2-qubit operators, the instance data model, and
//! the moment geometry of 2-qubit states and projectors.
//!
//! Every 2-qubit Hermitian operator `H` has a unique real expansion
//! `H = Σ_{k,l} α_{kl} σ^k ⊗ σ^l` over Pauli matrices (σ⁰ = I), with
//! `α_{kl} = Tr[(σ^k ⊗ σ^l) H] / 4`. Instances store only these coefficient
//! tables, never 2ⁿ-dimensional matrices. The scaled table
//! `Γ_{kl} = Tr[(σ^k ⊗ σ^l) H] = 4 α_{kl}` is the *2-moment* of `H`; its
//! 3×3 quadratic part `R`, and the 1-local parts `u`, `v`, obey sharp
//! geometric constraints when `H` is a density matrix or a projector:
//!
//! * the signed singular values of a density's `R` lie in the tetrahedron
//!   `S = conv{(-1,-1,-1), (-1,1,1), (1,-1,1), (1,1,-1)}`;
//! * `diag(R)` of a rank-k projector lies in `S`, the octahedron
//!   `T = {|x|+|y|+|z| ≤ 2}`, or `-S` for k = 1, 2, 3;
//! * `‖u‖, ‖v‖ ≤ 1` for densities and rank-1/3 projectors, `≤ 2` for rank 2.
//!
//! Those sets (and the membership test [`polytope_contains`]) drive both the
//! generator sanity suite and the ratio certification in [`crate::hermite`].

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector3, Vector4};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::rng::{derive_seed, stream, SALT_GENERATE};
use crate::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = Complex<f64>;

/// Tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on the idempotence defect ‖P² − P‖_F of a declared projector.
pub const PROJECTOR_TOL: f64 = 1e-9;
/// Eigenvalues above this threshold count towards a projector's rank.
pub const RANK_EIG_THRESHOLD: f64 = 0.5;
/// Tolerance under which 1-local / scalar coefficients count as zero.
pub const STRICT_QUAD_TOL: f64 = 1e-12;

/// The 2×2 Pauli matrix σ^k for k ∈ {0,1,2,3} (σ⁰ = identity).
pub fn sigma(k: usize) -> Matrix2<C64> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match k {
        0 => Matrix2::new(l, o, o, l),
        1 => Matrix2::new(o, l, l, o),
        2 => Matrix2::new(o, -i, i, o),
        3 => Matrix2::new(l, o, o, -l),
        _ => panic!("Pauli index {k} out of range 0..=3"),
    }
}

/// The 4×4 product σ^k ⊗ σ^l (first factor acts on the term's first qubit,
/// which indexes the high bit of the 4-dimensional basis).
pub fn sigma_kron(k: usize, l: usize) -> Matrix4<C64> {
    sigma(k).kronecker(&sigma(l))
}

/// A 4×4 complex Hermitian operator on two qubits.
///
/// Construction validates Hermiticity and then symmetrizes, so downstream
/// code can rely on exact conjugate symmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct Hermitian4(Matrix4<C64>);

impl Hermitian4 {
    /// Validates that `m` is Hermitian within [`HERMITIAN_TOL`] and wraps it.
    pub fn new(m: Matrix4<C64>) -> Result<Self> {
        let mut dev = 0.0f64;
        for a in 0..4 {
            for b in 0..4 {
                dev = dev.max((m[(a, b)] - m[(b, a)].conj()).norm());
            }
        }
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                deviation: dev,
                tol: HERMITIAN_TOL,
            });
        }
        Ok(Self((m + m.adjoint()) * C64::new(0.5, 0.0)))
    }

    /// The underlying matrix.
    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    /// Real trace (the imaginary part is zero for Hermitian matrices).
    pub fn trace_re(&self) -> f64 {
        self.0.trace().re
    }

    /// Eigenvalues in ascending order (real, since the matrix is Hermitian).
    pub fn eigenvalues_ascending(&self) -> [f64; 4] {
        let eig = self.0.symmetric_eigen();
        let mut ev = [0.0; 4];
        for (slot, v) in ev.iter_mut().zip(eig.eigenvalues.iter()) {
            *slot = *v;
        }
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Frobenius norm of P² − P; zero exactly when the operator is a projector.
    pub fn projector_defect(&self) -> f64 {
        (self.0 * self.0 - self.0).norm()
    }

    /// Number of eigenvalues above [`RANK_EIG_THRESHOLD`].
    pub fn rank_by_threshold(&self) -> usize {
        self.eigenvalues_ascending()
            .iter()
            .filter(|&&e| e > RANK_EIG_THRESHOLD)
            .count()
    }
}

/// Real Pauli coefficients α of a 2-qubit Hermitian operator:
/// `H = Σ_{k,l} alpha[k][l] σ^k ⊗ σ^l`, indices 0..=3 with 0 = identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PauliCoeffs {
    /// `alpha[k][l]` multiplies σ^k on the first qubit and σ^l on the second.
    pub alpha: [[f64; 4]; 4],
}

impl PauliCoeffs {
    /// All-zero coefficient table.
    pub fn zero() -> Self {
        Self {
            alpha: [[0.0; 4]; 4],
        }
    }

    /// Builds a table from a function of the two Pauli indices.
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut alpha = [[0.0; 4]; 4];
        for (k, row) in alpha.iter_mut().enumerate() {
            for (l, slot) in row.iter_mut().enumerate() {
                *slot = f(k, l);
            }
        }
        Self { alpha }
    }

    /// The table with every entry multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self::from_fn(|k, l| self.alpha[k][l] * s)
    }

    /// Largest magnitude among the 1-local coefficients α_{k0}, α_{0l} (k,l ≠ 0).
    pub fn one_local_max(&self) -> f64 {
        (1..4)
            .flat_map(|k| [self.alpha[k][0].abs(), self.alpha[0][k].abs()])
            .fold(0.0, f64::max)
    }

    /// True when all 1-local coefficients vanish within `tol`
    /// (the operator is *strictly quadratic*).
    pub fn is_strictly_quadratic(&self, tol: f64) -> bool {
        self.one_local_max() <= tol
    }

    /// Errors unless every entry is finite.
    pub fn validate(&self) -> Result<()> {
        for row in &self.alpha {
            for v in row {
                if !v.is_finite() {
                    return Err(Error::InvalidInstance(format!(
                        "non-finite Pauli coefficient {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for PauliCoeffs {
    type Output = f64;
    fn index(&self, (k, l): (usize, usize)) -> &f64 {
        &self.alpha[k][l]
    }
}

/// Expands a Hermitian operator in the Pauli basis:
/// `alpha[k][l] = Tr[(σ^k ⊗ σ^l) H] / 4`.
pub fn pauli_decompose(h: &Hermitian4) -> PauliCoeffs {
    // Tr[A B] is real for Hermitian A, B, so dropping the imaginary part
    // discards only rounding noise.
    PauliCoeffs::from_fn(|k, l| (sigma_kron(k, l) * h.matrix()).trace().re / 4.0)
}

/// Rebuilds the Hermitian operator `Σ alpha[k][l] σ^k ⊗ σ^l`.
pub fn pauli_reconstruct(c: &PauliCoeffs) -> Hermitian4 {
    let mut m = Matrix4::zeros();
    for k in 0..4 {
        for l in 0..4 {
            let a = c.alpha[k][l];
            if a != 0.0 {
                m += sigma_kron(k, l) * C64::new(a, 0.0);
            }
        }
    }
    Hermitian4::new(m).expect("real Pauli combinations are Hermitian by construction")
}

/// The 2-moment Γ = [[Γ₀₀, vᵀ], [u, R]] of a 2-qubit Hermitian operator,
/// with entries `Γ_{kl} = Tr[(σ^k ⊗ σ^l) H]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoMoment {
    /// Γ₀₀ = Tr[H]: 1 for a density matrix, the rank for a projector.
    pub scalar_one: f64,
    /// First-qubit 1-local part u = (Γ₁₀, Γ₂₀, Γ₃₀).
    pub u: Vector3<f64>,
    /// Second-qubit 1-local part v = (Γ₀₁, Γ₀₂, Γ₀₃).
    pub v: Vector3<f64>,
    /// Quadratic part R with R[(k-1, l-1)] = Γ_{kl} for k, l ∈ {1,2,3}.
    pub r: Matrix3<f64>,
}

impl TwoMoment {
    /// Builds the moment table from Pauli coefficients (Γ = 4 α).
    pub fn from_coeffs(c: &PauliCoeffs) -> Self {
        Self {
            scalar_one: 4.0 * c.alpha[0][0],
            u: Vector3::new(
                4.0 * c.alpha[1][0],
                4.0 * c.alpha[2][0],
                4.0 * c.alpha[3][0],
            ),
            v: Vector3::new(
                4.0 * c.alpha[0][1],
                4.0 * c.alpha[0][2],
                4.0 * c.alpha[0][3],
            ),
            r: Matrix3::from_fn(|k, l| 4.0 * c.alpha[k + 1][l + 1]),
        }
    }

    /// Diagonal of the quadratic part, (Γ₁₁, Γ₂₂, Γ₃₃).
    pub fn diag(&self) -> Vector3<f64> {
        Vector3::new(self.r[(0, 0)], self.r[(1, 1)], self.r[(2, 2)])
    }
}

/// The 2-moment of a Hermitian operator: `Γ_{kl} = Tr[(σ^k ⊗ σ^l) H]`.
pub fn two_moment(h: &Hermitian4) -> TwoMoment {
    TwoMoment::from_coeffs(&pauli_decompose(h))
}

/// Sign-adjusted SVD of a real 3×3 matrix: returns `(L, s, N)` with
/// `m = L · diag(s) · Nᵀ` and `L, N ∈ SO(3)`. Any negative determinant of
/// the orthogonal factors is absorbed into the sign of `s[2]`, so `s` holds
/// the *signed* singular values (descending in magnitude).
pub fn special_svd(m: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let svd = m.svd(true, true);
    let u = svd.u.expect("3x3 SVD with factors requested");
    let vt = svd.v_t.expect("3x3 SVD with factors requested");
    let v = vt.transpose();
    let du = u.determinant().signum();
    let dv = v.determinant().signum();
    let l = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, du));
    let n = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, dv));
    let sv = svd.singular_values;
    let s = Vector3::new(sv[0], sv[1], sv[2] * du * dv);
    (l, s, n)
}

/// Identifier for the three moment polytopes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolytopeName {
    /// Tetrahedron of density-matrix signed singular values / rank-1 diagonals.
    S,
    /// Octahedron |x|+|y|+|z| ≤ 2 of rank-2 projector diagonals.
    T,
    /// The reflection −S, home of rank-3 projector diagonals.
    NegS,
}

/// A convex polytope in ℝ³ stored in both vertex and facet (`aᵀx ≤ b`) form.
///
/// The constructor cross-checks the two descriptions: every vertex must
/// satisfy every facet, and every facet must be tight on at least three
/// vertices (otherwise it would be redundant or wrong).
#[derive(Clone, Debug)]
pub struct Polytope3 {
    /// Which of the three named polytopes this is.
    pub name: PolytopeName,
    /// Extreme points.
    pub vertices: Vec<Vector3<f64>>,
    facets: Vec<(Vector3<f64>, f64)>,
}

impl Polytope3 {
    fn verified(
        name: PolytopeName,
        vertices: Vec<Vector3<f64>>,
        facets: Vec<(Vector3<f64>, f64)>,
    ) -> Self {
        for (a, b) in &facets {
            let mut tight = 0;
            for v in &vertices {
                let val = a.dot(v);
                assert!(
                    val <= b + 1e-12,
                    "facet {a:?} <= {b} violated by vertex {v:?}"
                );
                if (val - b).abs() <= 1e-12 {
                    tight += 1;
                }
            }
            assert!(
                tight >= 3,
                "facet {a:?} <= {b} touches fewer than 3 vertices"
            );
        }
        Self {
            name,
            vertices,
            facets,
        }
    }

    /// The tetrahedron `S = conv{(-1,-1,-1), (-1,1,1), (1,-1,1), (1,1,-1)}`.
    pub fn s() -> Self {
        Self::verified(
            PolytopeName::S,
            vec![
                Vector3::new(-1.0, -1.0, -1.0),
                Vector3::new(-1.0, 1.0, 1.0),
                Vector3::new(1.0, -1.0, 1.0),
                Vector3::new(1.0, 1.0, -1.0),
            ],
            vec![
                (Vector3::new(1.0, 1.0, 1.0), 1.0),
                (Vector3::new(-1.0, -1.0, 1.0), 1.0),
                (Vector3::new(-1.0, 1.0, -1.0), 1.0),
                (Vector3::new(1.0, -1.0, -1.0), 1.0),
            ],
        )
    }

    /// The reflected tetrahedron −S.
    pub fn neg_s() -> Self {
        Self::verified(
            PolytopeName::NegS,
            vec![
                Vector3::new(1.0, 1.0, 1.0),
                Vector3::new(1.0, -1.0, -1.0),
                Vector3::new(-1.0, 1.0, -1.0),
                Vector3::new(-1.0, -1.0, 1.0),
            ],
            vec![
                (Vector3::new(-1.0, -1.0, -1.0), 1.0),
                (Vector3::new(1.0, 1.0, -1.0), 1.0),
                (Vector3::new(1.0, -1.0, 1.0), 1.0),
                (Vector3::new(-1.0, 1.0, 1.0), 1.0),
            ],
        )
    }

    /// The octahedron `T = {x : |x₁| + |x₂| + |x₃| ≤ 2}`.
    pub fn t() -> Self {
        let mut vertices = Vec::new();
        for k in 0..3 {
            for sign in [2.0, -2.0] {
                let mut v = Vector3::zeros();
                v[k] = sign;
                vertices.push(v);
            }
        }
        let mut facets = Vec::new();
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    facets.push((Vector3::new(sx, sy, sz), 2.0));
                }
            }
        }
        Self::verified(PolytopeName::T, vertices, facets)
    }

    /// The polytope confining `diag(R)` of a rank-k projector:
    /// S, T, −S for k = 1, 2, 3.
    pub fn for_rank(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Self::s()),
            2 => Ok(Self::t()),
            3 => Ok(Self::neg_s()),
            _ => Err(Error::Domain(format!("projector rank {k} not in 1..=3"))),
        }
    }

    /// Largest signed facet violation `max_i (aᵢᵀx − bᵢ)`; ≤ 0 inside the hull.
    pub fn max_facet_slack(&self, x: &Vector3<f64>) -> f64 {
        self.facets
            .iter()
            .map(|(a, b)| a.dot(x) - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Membership test with ℓ∞ slack `tol` on the facet inequalities.
pub fn polytope_contains(p: &Polytope3, x: &Vector3<f64>, tol: f64) -> bool {
    p.max_facet_slack(x) <= tol
}

/// The four Bell states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bell {
    /// (|00⟩ + |11⟩)/√2
    PhiPlus,
    /// (|00⟩ − |11⟩)/√2
    PhiMinus,
    /// (|01⟩ + |10⟩)/√2
    PsiPlus,
    /// (|01⟩ − |10⟩)/√2 — the singlet.
    PsiMinus,
}

impl Bell {
    /// All four states, in a fixed order.
    pub const ALL: [Bell; 4] = [Bell::PhiPlus, Bell::PhiMinus, Bell::PsiPlus, Bell::PsiMinus];

    /// State vector in the basis |00⟩, |01⟩, |10⟩, |11⟩
    /// (first qubit = high bit).
    pub fn vector(self) -> Vector4<C64> {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            Bell::PhiPlus => Vector4::new(h, C64::default(), C64::default(), h),
            Bell::PhiMinus => Vector4::new(h, C64::default(), C64::default(), -h),
            Bell::PsiPlus => Vector4::new(C64::default(), h, h, C64::default()),
            Bell::PsiMinus => Vector4::new(C64::default(), h, -h, C64::default()),
        }
    }

    /// Rank-1 projector onto the state.
    pub fn projector(self) -> Hermitian4 {
        let v = self.vector();
        Hermitian4::new(v * v.adjoint()).expect("outer products are Hermitian")
    }

    /// Diagonal of the quadratic 2-moment, (⟨XX⟩, ⟨YY⟩, ⟨ZZ⟩).
    pub fn moment_diag(self) -> Vector3<f64> {
        match self {
            Bell::PhiPlus => Vector3::new(1.0, -1.0, 1.0),
            Bell::PhiMinus => Vector3::new(-1.0, 1.0, 1.0),
            Bell::PsiPlus => Vector3::new(1.0, 1.0, -1.0),
            Bell::PsiMinus => Vector3::new(-1.0, -1.0, -1.0),
        }
    }
}

/// One weighted 2-local term: `weight · Σ_{kl} alpha[k][l] σ^k_i ⊗ σ^l_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLocalTerm {
    /// First qubit (high bit of the term's 4-dimensional block).
    pub i: usize,
    /// Second qubit.
    pub j: usize,
    /// Multiplicative weight; nonnegative for projector instances.
    pub weight: f64,
    /// Pauli coefficients of the local operator.
    #[serde(rename = "alpha")]
    pub coeffs: PauliCoeffs,
}

/// Structural class of an instance, fixing which validation rules apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceKind {
    /// Every term is a rank-k projector with nonnegative weight.
    Projector(u8),
    /// Rank-k projectors whose 1-local Pauli coefficients all vanish.
    StrictlyQuadraticProjector(u8),
    /// Traceless terms with no 1-local part (single Pauli coupling expected).
    Traceless,
    /// No structural promises beyond Hermiticity.
    Generic,
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceKind::Projector(k) => write!(f, "projector:{k}"),
            InstanceKind::StrictlyQuadraticProjector(k) => {
                write!(f, "strictly-quadratic-projector:{k}")
            }
            InstanceKind::Traceless => write!(f, "traceless"),
            InstanceKind::Generic => write!(f, "generic"),
        }
    }
}

impl FromStr for InstanceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parse_rank = |r: &str| -> Result<u8> {
            let k: u8 = r
                .parse()
                .map_err(|_| Error::InvalidInstance(format!("bad rank in kind `{s}`")))?;
            if (1..=3).contains(&k) {
                Ok(k)
            } else {
                Err(Error::InvalidInstance(format!(
                    "rank {k} out of range 1..=3 in kind `{s}`"
                )))
            }
        };
        if let Some(r) = s.strip_prefix("projector:") {
            return Ok(InstanceKind::Projector(parse_rank(r)?));
        }
        if let Some(r) = s.strip_prefix("strictly-quadratic-projector:") {
            return Ok(InstanceKind::StrictlyQuadraticProjector(parse_rank(r)?));
        }
        match s {
            "traceless" => Ok(InstanceKind::Traceless),
            "generic" => Ok(InstanceKind::Generic),
            _ => Err(Error::InvalidInstance(format!(
                "unknown instance kind `{s}`"
            ))),
        }
    }
}

impl Serialize for InstanceKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for InstanceKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A problem instance: `n` qubits and a multiset of weighted 2-local terms.
///
/// Multiedges are kept as distinct terms and never merged, so per-edge
/// accounting (ratios, rounding guarantees) stays faithful.
///
/// Canonical JSON form:
/// `{"n": int, "kind": string, "terms": [{"i", "j", "weight", "alpha": [[f;4];4]}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Number of qubits.
    pub n: usize,
    /// Structural class (drives validation).
    pub kind: InstanceKind,
    /// Weighted 2-local terms; order is meaningful only for reproducibility.
    pub terms: Vec<TwoLocalTerm>,
}

impl Instance {
    /// Cheap structural checks: index ranges, loop edges, finiteness.
    /// Run this after deserializing untrusted input.
    pub fn validate_basic(&self) -> Result<()> {
        for (t, term) in self.terms.iter().enumerate() {
            if term.i == term.j {
                return Err(Error::InvalidInstance(format!(
                    "term {t}: loop edge on qubit {}",
                    term.i
                )));
            }
            if term.i >= self.n || term.j >= self.n {
                return Err(Error::InvalidInstance(format!(
                    "term {t}: qubit index out of range for n = {}",
                    self.n
                )));
            }
            if !term.weight.is_finite() {
                return Err(Error::InvalidInstance(format!(
                    "term {t}: non-finite weight {}",
                    term.weight
                )));
            }
            term.coeffs
                .validate()
                .map_err(|e| Error::InvalidInstance(format!("term {t}: {e}")))?;
        }
        Ok(())
    }

    /// Total weight Σ_e w_e.
    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }
}

// ---------------------------------------------------------------------------
// Random generators
// ---------------------------------------------------------------------------

fn complex_normal(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn ginibre4(rng: &mut impl Rng) -> Matrix4<C64> {
    Matrix4::from_fn(|_, _| complex_normal(rng))
}

fn ginibre2(rng: &mut impl Rng) -> Matrix2<C64> {
    Matrix2::from_fn(|_, _| complex_normal(rng))
}

/// Haar-distributed 4×4 unitary via QR of a Ginibre matrix with the phases
/// of diag(R) absorbed into Q's columns (making diag(R) positive).
fn haar_unitary4(rng: &mut impl Rng) -> Matrix4<C64> {
    let qr = ginibre4(rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..4 {
        let d = r[(c, c)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for row in 0..4 {
                q[(row, c)] *= phase;
            }
        }
    }
    q
}

/// Haar-distributed 2×2 unitary, same construction as [`haar_unitary4`].
fn haar_unitary2(rng: &mut impl Rng) -> Matrix2<C64> {
    let qr = ginibre2(rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..2 {
        let d = r[(c, c)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for row in 0..2 {
                q[(row, c)] *= phase;
            }
        }
    }
    q
}

/// Haar-random rank-k projector on two qubits: the span of the first k
/// columns of a Haar unitary (QR of a complex Ginibre matrix with
/// phase-fixed R diagonal).
pub fn random_projector(k: u8, seed: u64) -> Hermitian4 {
    assert!((1..=3).contains(&k), "projector rank must be 1, 2, or 3");
    let mut rng = stream(seed, SALT_GENERATE, k as u64);
    let q = haar_unitary4(&mut rng);
    let mut p = Matrix4::zeros();
    for c in 0..k as usize {
        let col = q.column(c);
        p += col * col.adjoint();
    }
    Hermitian4::new(p).expect("sums of outer products are Hermitian")
}

/// Random 2-qubit density matrix G G† / Tr[G G†] (Hilbert–Schmidt measure).
pub fn random_density(seed: u64) -> Hermitian4 {
    let mut rng = stream(seed, SALT_GENERATE, 8);
    let g = ginibre4(&mut rng);
    let m = g * g.adjoint();
    let t = m.trace().re;
    Hermitian4::new(m / C64::new(t, 0.0)).expect("G G† is Hermitian")
}

/// Random strictly quadratic rank-k projector: a sum of k distinct
/// Bell-state projectors (or I minus one for k = 3), conjugated by
/// independent Haar-random single-qubit unitaries U₁ ⊗ U₂.
///
/// Bell states have maximally mixed marginals, so the base operator has no
/// 1-local part; local conjugation rotates the 1-local parts within ℝ³ and
/// therefore preserves that property exactly.
pub fn random_sq_projector(k: u8, seed: u64) -> Hermitian4 {
    assert!((1..=3).contains(&k), "projector rank must be 1, 2, or 3");
    let mut rng = stream(seed, SALT_GENERATE, 16 + k as u64);
    let first = rng.random_range(0..4usize);
    let mut base = match k {
        1 => Bell::ALL[first].projector().matrix().clone_owned(),
        2 => {
            let mut second = rng.random_range(0..3usize);
            if second >= first {
                second += 1;
            }
            Bell::ALL[first].projector().matrix() + Bell::ALL[second].projector().matrix()
        }
        _ => Matrix4::identity() - Bell::ALL[first].projector().matrix(),
    };
    let u1 = haar_unitary2(&mut rng);
    let u2 = haar_unitary2(&mut rng);
    let u = u1.kronecker(&u2);
    base = u * base * u.adjoint();
    Hermitian4::new(base).expect("unitary conjugation preserves Hermiticity")
}

/// Random projector-kind instance: `n_terms` terms on uniformly random
/// distinct pairs, weights uniform in [0.5, 1.5), operators drawn by
/// [`random_projector`] or [`random_sq_projector`] according to `kind`.
pub fn random_instance(
    n: usize,
    n_terms: usize,
    kind: InstanceKind,
    seed: u64,
) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidInstance(format!(
            "need at least 2 qubits for 2-local terms, got n = {n}"
        )));
    }
    let mut rng = stream(seed, SALT_GENERATE, 0);
    let mut terms = Vec::with_capacity(n_terms);
    for t in 0..n_terms {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let weight = rng.random_range(0.5..1.5);
        let op_seed = derive_seed(seed, (t + 1) as u64);
        let h = match kind {
            InstanceKind::Projector(k) => random_projector(k, op_seed),
            InstanceKind::StrictlyQuadraticProjector(k) => random_sq_projector(k, op_seed),
            other => {
                return Err(Error::InvalidInstance(format!(
                    "random_instance only draws projector kinds, got {other}"
                )))
            }
        };
        terms.push(TwoLocalTerm {
            i,
            j,
            weight,
            coeffs: pauli_decompose(&h),
        });
    }
    Ok(Instance { n, kind, terms })
}

// ---------------------------------------------------------------------------
// Encoders and named instances
// ---------------------------------------------------------------------------

/// A literal: (variable index, negated?).
pub type Literal = (usize, bool);

/// Encodes a Max 2-SAT formula as a projector instance: each clause becomes
/// the diagonal rank-3 projector onto its satisfying assignments, so the
/// instance's λ_max equals the classical optimum (qubit value |0⟩ ↔ false).
pub fn encode_max2sat(clauses: &[(Literal, Literal)], n: usize) -> Result<Instance> {
    let mut terms = Vec::with_capacity(clauses.len());
    for (t, &((i, neg_i), (j, neg_j))) in clauses.iter().enumerate() {
        if i == j {
            return Err(Error::InvalidInstance(format!(
                "clause {t}: both literals use variable {i}"
            )));
        }
        if i >= n || j >= n {
            return Err(Error::InvalidInstance(format!(
                "clause {t}: variable index out of range for n = {n}"
            )));
        }
        // The unique falsifying assignment sets each variable opposite to its
        // literal; bit b = 1 encodes "true". P = I − |b_i b_j⟩⟨b_i b_j| with
        // |b⟩⟨b| = (I + (−1)^b Z)/2 expands to the table below.
        let si = if neg_i { -1.0 } else { 1.0 };
        let sj = if neg_j { -1.0 } else { 1.0 };
        let mut coeffs = PauliCoeffs::zero();
        coeffs.alpha[0][0] = 0.75;
        coeffs.alpha[3][0] = -si / 4.0;
        coeffs.alpha[0][3] = -sj / 4.0;
        coeffs.alpha[3][3] = -si * sj / 4.0;
        terms.push(TwoLocalTerm {
            i,
            j,
            weight: 1.0,
            coeffs,
        });
    }
    Ok(Instance {
        n,
        kind: InstanceKind::Projector(3),
        terms,
    })
}

/// Uniformly random 2-SAT clauses on distinct variables with random signs.
pub fn random_max2sat_clauses(
    n_vars: usize,
    n_clauses: usize,
    seed: u64,
) -> Vec<(Literal, Literal)> {
    assert!(n_vars >= 2, "need at least two variables");
    let mut rng = stream(seed, SALT_GENERATE, 2);
    (0..n_clauses)
        .map(|_| {
            let i = rng.random_range(0..n_vars);
            let mut j = rng.random_range(0..n_vars - 1);
            if j >= i {
                j += 1;
            }
            ((i, rng.random_bool(0.5)), (j, rng.random_bool(0.5)))
        })
        .collect()
}

/// Max Heisenberg instance: every edge carries the singlet projector
/// ¼(I − X₁X₂ − Y₁Y₂ − Z₁Z₂) scaled by its weight.
pub fn encode_heisenberg(edges: &[(usize, usize, f64)], n: usize) -> Result<Instance> {
    let singlet = pauli_decompose(&Bell::PsiMinus.projector());
    let terms = edges
        .iter()
        .map(|&(i, j, weight)| TwoLocalTerm {
            i,
            j,
            weight,
            coeffs: singlet,
        })
        .collect();
    let inst = Instance {
        n,
        kind: InstanceKind::StrictlyQuadraticProjector(1),
        terms,
    };
    inst.validate_basic()?;
    Ok(inst)
}

/// Antiferromagnetic Ising instance: each edge carries the traceless
/// coupling −Z ⊗ Z scaled by its weight.
pub fn encode_zz(edges: &[(usize, usize, f64)], n: usize) -> Result<Instance> {
    let mut coeffs = PauliCoeffs::zero();
    coeffs.alpha[3][3] = -1.0;
    let terms = edges
        .iter()
        .map(|&(i, j, weight)| TwoLocalTerm {
            i,
            j,
            weight,
            coeffs,
        })
        .collect();
    let inst = Instance {
        n,
        kind: InstanceKind::Traceless,
        terms,
    };
    inst.validate_basic()?;
    Ok(inst)
}

/// Random antiferromagnetic −ZZ instance on a bipartition of `n` qubits
/// (low indices on the left, high on the right), `n_edges` uniformly random
/// cross edges with weights in [0.5, 1.5).
pub fn random_bipartite_zz(n: usize, n_edges: usize, seed: u64) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidInstance(format!(
            "need at least 2 qubits, got n = {n}"
        )));
    }
    let split = n / 2;
    let mut rng = stream(seed, SALT_GENERATE, 3);
    let edges: Vec<(usize, usize, f64)> = (0..n_edges)
        .map(|_| {
            let i = rng.random_range(0..split);
            let j = rng.random_range(split..n);
            (i, j, rng.random_range(0.5..1.5))
        })
        .collect();
    encode_zz(&edges, n)
}

/// The two-qubit instance with λ_max = 1 whose best product-state value is
/// exactly k/2 · 1/k... see the table: 1/2, 2/3, 5/6 for k = 1, 2, 3.
///
/// * k = 1: the singlet projector.
/// * k = 2: three weight-⅓ rank-2 terms |Ψ⁻⟩⟨Ψ⁻| + B for B ranging over the
///   other Bell projectors; the sum is ⅓·I + ⅔·|Ψ⁻⟩⟨Ψ⁻|.
/// * k = 3: three weight-⅓ rank-3 terms I − B; the sum is ⅔·I + ⅓·|Ψ⁻⟩⟨Ψ⁻|.
pub fn product_gap_instance(k: u8) -> Result<Instance> {
    let others = [Bell::PhiPlus, Bell::PhiMinus, Bell::PsiPlus];
    let singlet = Bell::PsiMinus.projector();
    let terms = match k {
        1 => vec![TwoLocalTerm {
            i: 0,
            j: 1,
            weight: 1.0,
            coeffs: pauli_decompose(&singlet),
        }],
        2 => others
            .iter()
            .map(|b| {
                let m = singlet.matrix() + b.projector().matrix();
                TwoLocalTerm {
                    i: 0,
                    j: 1,
                    weight: 1.0 / 3.0,
                    coeffs: pauli_decompose(&Hermitian4::new(m).expect("Bell sums are Hermitian")),
                }
            })
            .collect(),
        3 => others
            .iter()
            .map(|b| {
                let m = Matrix4::identity() - b.projector().matrix();
                TwoLocalTerm {
                    i: 0,
                    j: 1,
                    weight: 1.0 / 3.0,
                    coeffs: pauli_decompose(&Hermitian4::new(m).expect("I - Bell is Hermitian")),
                }
            })
            .collect(),
        _ => return Err(Error::Domain(format!("gap instance rank {k} not in 1..=3"))),
    };
    Ok(Instance {
        n: 2,
        kind: InstanceKind::StrictlyQuadraticProjector(k),
        terms,
    })
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Severity of a validation finding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    /// Violates the declared kind or basic structure; the report fails.
    Fail,
    /// Permitted but unusual; the report still passes.
    Warn,
}

/// A single validation finding, tied to a term when applicable.
#[derive(Clone, Debug)]
pub struct ValidationIssue {
    /// Index into `instance.terms`, or `None` for instance-level findings.
    pub term: Option<usize>,
    /// Whether this finding fails the report.
    pub severity: Severity,
    /// Human-readable description naming the offending quantity.
    pub message: String,
}

/// Structured validation output; never aborts, lists all findings.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    /// All findings, in term order.
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    /// True when no [`Severity::Fail`] finding is present.
    pub fn passed(&self) -> bool {
        self.issues.iter().all(|i| i.severity != Severity::Fail)
    }

    fn push(&mut self, term: Option<usize>, severity: Severity, message: String) {
        self.issues.push(ValidationIssue {
            term,
            severity,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        for issue in &self.issues {
            let tag = match issue.severity {
                Severity::Fail => "FAIL",
                Severity::Warn => "warn",
            };
            match issue.term {
                Some(t) => writeln!(f, "{tag} term {t}: {}", issue.message)?,
                None => writeln!(f, "{tag}: {}", issue.message)?,
            }
        }
        Ok(())
    }
}

/// Checks an instance against its declared kind and returns per-term
/// diagnostics. Structural problems are reported, never thrown.
pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = inst.validate_basic() {
        report.push(None, Severity::Fail, e.to_string());
        return report;
    }
    for (t, term) in inst.terms.iter().enumerate() {
        match inst.kind {
            InstanceKind::Projector(k) | InstanceKind::StrictlyQuadraticProjector(k) => {
                if !(1..=3).contains(&k) {
                    report.push(
                        None,
                        Severity::Fail,
                        format!("declared rank {k} not in 1..=3"),
                    );
                    return report;
                }
                if term.weight < 0.0 {
                    report.push(
                        Some(t),
                        Severity::Fail,
                        format!("projector instances need weight >= 0, got {}", term.weight),
                    );
                }
                let h = pauli_reconstruct(&term.coeffs);
                let defect = h.projector_defect();
                if defect > PROJECTOR_TOL {
                    report.push(
                        Some(t),
                        Severity::Fail,
                        format!("not a projector: ||P^2 - P||_F = {defect:.3e}"),
                    );
                } else {
                    let rank = h.rank_by_threshold();
                    if rank != k as usize {
                        let extra = if rank > k as usize {
                            " (higher rank is physical but does not match this kind)"
                        } else {
                            ""
                        };
                        report.push(
                            Some(t),
                            Severity::Fail,
                            format!("rank {rank} found, {k} declared{extra}"),
                        );
                    }
                }
                if matches!(inst.kind, InstanceKind::StrictlyQuadraticProjector(_)) {
                    for k1 in 1..4 {
                        for (label, val) in [
                            (format!("alpha[{k1}][0]"), term.coeffs.alpha[k1][0]),
                            (format!("alpha[0][{k1}]"), term.coeffs.alpha[0][k1]),
                        ] {
                            if val.abs() > STRICT_QUAD_TOL {
                                report.push(
                                    Some(t),
                                    Severity::Fail,
                                    format!("1-local coefficient {label} = {val:.3e} breaks strict quadraticity"),
                                );
                            }
                        }
                    }
                }
            }
            InstanceKind::Traceless => {
                if term.coeffs.alpha[0][0].abs() > STRICT_QUAD_TOL {
                    report.push(
                        Some(t),
                        Severity::Fail,
                        format!(
                            "alpha[0][0] = {:.3e} is not traceless",
                            term.coeffs.alpha[0][0]
                        ),
                    );
                }
                if term.coeffs.one_local_max() > STRICT_QUAD_TOL {
                    report.push(
                        Some(t),
                        Severity::Fail,
                        format!(
                            "1-local coefficient of magnitude {:.3e} present in a traceless term",
                            term.coeffs.one_local_max()
                        ),
                    );
                }
                let quad_nonzero = (1..4)
                    .flat_map(|k| (1..4).map(move |l| (k, l)))
                    .filter(|&(k, l)| term.coeffs.alpha[k][l].abs() > STRICT_QUAD_TOL)
                    .count();
                if quad_nonzero != 1 {
                    report.push(
                        Some(t),
                        Severity::Warn,
                        format!("{quad_nonzero} quadratic couplings (bipartite rounding expects exactly 1)"),
                    );
                }
            }
            InstanceKind::Generic => {}
        }
    }
    report
}
