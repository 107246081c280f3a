//! Semidefinite relaxations of two-local Hamiltonian maximization, and a
//! first-order solver for them.
//!
//! Two programs are built here:
//!
//! * [`build_moment_relaxation`] — the full moment relaxation: a real symmetric
//!   moment matrix `M` indexed by `{I, sigma_i^k}` (dimension `3n+1`) plus one
//!   Hermitian two-qubit marginal per term, tied to `M` by linking equalities.
//!   Complex marginals are embedded as real symmetric `8x8` blocks, so the whole
//!   program is a real SDP: maximize a linear functional over PSD blocks subject
//!   to equality constraints.
//! * [`build_unit_diagonal_relaxation`] — the unit-diagonal relaxation for
//!   traceless, strictly quadratic instances: one `3n x 3n` block with unit
//!   diagonal, objective `sum_e w_e sum_kl alpha_kl M(ik, jl)`. This is the
//!   classical quadratic-form relaxation used by hyperplane-rounding schemes.
//!
//! [`solve`] is an operator-splitting (ADMM) method: alternate (i) projection
//! onto the affine constraint set via a cached Cholesky factorization of the
//! constraint Gram matrix, (ii) projection onto the PSD cone of each block by
//! eigenvalue clamping, and (iii) a scaled dual ascent step, with over-relaxation.
//! The solver is fully deterministic and single-threaded; identical inputs give
//! bit-identical outputs regardless of thread configuration.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix4, SMatrix};

use crate::exact::ProductState;
use crate::pauli::{
    pauli_reconstruct, sigma, sigma_kron, validate_instance, Hermitian4, Instance, InstanceKind,
    C64,
};
use crate::{Error, Result};

/// Default relative residual tolerance for [`solve`].
pub const DEFAULT_TOL: f64 = 1e-6;

/// Default iteration cap for [`solve`].
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Default eigenvalue clipping tolerance for [`gram_vectors`].
///
/// The solver stops on *residuals*, so the affine-feasible iterate it returns
/// is PSD only up to a small multiple of [`DEFAULT_TOL`]; negative
/// eigenvalues of a few times the residual tolerance are routine on
/// converged solves. The default gate is therefore 100x the solver
/// tolerance: anything in `[-1e-4, 0)` is treated as solver noise and
/// clipped, anything lower signals genuine infeasibility.
pub const DEFAULT_CLIP_TOL: f64 = 1e-4;

/// Over-relaxation parameter for the splitting iteration.
const OVER_RELAXATION: f64 = 1.6;

/// Row index of the moment-matrix basis element `sigma_i^k` (`k` in `1..=3`);
/// index 0 is the identity element.
#[inline]
pub fn moment_index(qubit: usize, k: usize) -> usize {
    debug_assert!((1..=3).contains(&k));
    1 + 3 * qubit + (k - 1)
}

/// Row index of `sigma_i^k` in the unit-diagonal relaxation (no identity row).
#[inline]
pub fn traceless_index(qubit: usize, k: usize) -> usize {
    debug_assert!((1..=3).contains(&k));
    3 * qubit + (k - 1)
}

/// Sparse real symmetric matrix.
///
/// Entries are stored once with `row <= col`; an off-diagonal entry `(r, c, v)`
/// represents the value `v` at both `(r, c)` and `(c, r)`. Inner products and
/// scatter-adds account for the mirrored half.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    /// Empty matrix (the zero functional).
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Matrix with a single stored entry.
    pub fn single(r: usize, c: usize, v: f64) -> Self {
        let mut s = Self::new();
        s.push(r, c, v);
        s
    }

    /// Add an entry; the index pair is normalized to `row <= col`.
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        self.entries.push((r, c, v));
    }

    /// Build from an accumulation map, dropping exact zeros.
    /// `BTreeMap` keeps the entry order (and thus float summation order)
    /// deterministic.
    pub fn from_map(map: BTreeMap<(usize, usize), f64>) -> Self {
        let entries = map
            .into_iter()
            .filter(|&(_, v)| v != 0.0)
            .map(|((r, c), v)| (r, c, v))
            .collect();
        Self { entries }
    }

    /// Stored entries `(row, col, value)` with `row <= col`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest index referenced by any entry.
    pub fn max_index(&self) -> Option<usize> {
        self.entries.iter().map(|&(_, c, _)| c).max()
    }

    /// Frobenius inner product with a dense symmetric matrix
    /// (off-diagonal entries count twice).
    pub fn inner(&self, x: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for &(r, c, v) in &self.entries {
            acc += if r == c {
                v * x[(r, r)]
            } else {
                2.0 * v * x[(r, c)]
            };
        }
        acc
    }

    /// `x += s * self`, writing both mirrored halves.
    pub fn add_scaled(&self, x: &mut DMatrix<f64>, s: f64) {
        for &(r, c, v) in &self.entries {
            x[(r, c)] += s * v;
            if r != c {
                x[(c, r)] += s * v;
            }
        }
    }

    /// Squared Frobenius norm (off-diagonal entries count twice).
    pub fn frobenius_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
            .sum()
    }

    /// Copy with every value multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|&(r, c, v)| (r, c, v * s))
                .collect(),
        }
    }
}

/// One block's coefficients within a linear equality constraint.
#[derive(Clone, Debug)]
pub struct BlockTerm {
    /// Index into [`ConicProgram::blocks`].
    pub block: usize,
    pub coeffs: SparseSym,
}

/// Linear equality `sum_b <coeffs_b, X_b> = rhs` over the PSD blocks.
#[derive(Clone, Debug)]
pub struct LinearConstraint {
    pub terms: Vec<BlockTerm>,
    pub rhs: f64,
}

/// A block-diagonal SDP in standard equality form:
/// maximize `constant + sum_b <objective_b, X_b>` subject to the equality
/// constraints and `X_b` PSD for every block.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    /// `(label, dimension)` per PSD block. The moment block is labeled `"M"`,
    /// embedded marginal blocks `"rho:<t>"` for term index `t`.
    pub blocks: Vec<(String, usize)>,
    pub constraints: Vec<LinearConstraint>,
    /// One coefficient matrix per block (possibly empty).
    pub objective: Vec<SparseSym>,
    /// Affine part of the objective.
    pub constant: f64,
}

impl ConicProgram {
    /// Check internal consistency: one objective per block, all entry indices
    /// within their block dimension, no empty constraint rows.
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: self.blocks.len(),
                got: self.objective.len(),
                context: "objective blocks",
            });
        }
        let check = |s: &SparseSym, block: usize| -> Result<()> {
            let dim = self.blocks[block].1;
            if let Some(mx) = s.max_index() {
                if mx >= dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: mx + 1,
                        context: "sparse entry index",
                    });
                }
            }
            Ok(())
        };
        for (b, s) in self.objective.iter().enumerate() {
            check(s, b)?;
        }
        for con in &self.constraints {
            if con.terms.iter().all(|t| t.coeffs.is_empty()) {
                return Err(Error::Invariant("empty constraint row".into()));
            }
            for t in &con.terms {
                if t.block >= self.blocks.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.blocks.len(),
                        got: t.block + 1,
                        context: "constraint block index",
                    });
                }
                check(&t.coeffs, t.block)?;
            }
        }
        Ok(())
    }

    /// Objective value (including the affine constant) at the given blocks.
    pub fn objective_of(&self, blocks: &[DMatrix<f64>]) -> f64 {
        self.constant
            + self
                .objective
                .iter()
                .zip(blocks)
                .map(|(c, x)| c.inner(x))
                .sum::<f64>()
    }

    /// Largest absolute equality-constraint violation at the given blocks.
    pub fn max_violation(&self, blocks: &[DMatrix<f64>]) -> f64 {
        self.constraints
            .iter()
            .map(|con| {
                let lhs: f64 = con
                    .terms
                    .iter()
                    .map(|t| t.coeffs.inner(&blocks[t.block]))
                    .sum();
                (lhs - con.rhs).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Output of [`solve`].
#[derive(Clone, Debug)]
pub struct MomentSolution {
    /// Moment block (affine-feasible iterate; PSD up to roughly the tolerance).
    pub m: DMatrix<f64>,
    /// Two-qubit marginal per term, recovered from the embedded real blocks.
    pub rho: Vec<Matrix4<C64>>,
    /// Objective value at the reported iterate, including the affine constant.
    pub objective: f64,
    /// Relative splitting residual `|X - Z| / (1 + |X| + |Z|)`.
    pub primal_residual: f64,
    /// Relative dual residual `|Z - Z_prev| / (1 + |U|)`.
    pub dual_residual: f64,
    pub iterations: usize,
    /// False when the iteration cap was reached; the best iterate seen is
    /// still reported.
    pub converged: bool,
}

/// Unit Gram vectors extracted from a solved moment matrix.
#[derive(Clone, Debug)]
pub struct GramVectors {
    /// Vector for the identity basis element.
    pub v0: DVector<f64>,
    /// Vectors for `sigma_i^k`, indexed `v[i][k-1]`.
    pub v: Vec<[DVector<f64>; 3]>,
    /// Ambient dimension (numerical rank of the moment matrix).
    pub dim: usize,
    /// Largest deviation of any raw vector norm from 1 before renormalization.
    pub norm_deviation: f64,
}

impl GramVectors {
    pub fn n(&self) -> usize {
        self.v.len()
    }
}

/// Real embedding of a Hermitian `4x4` matrix as a symmetric `8x8` matrix
/// `[[Re, -Im], [Im, Re]]`. The embedding doubles each eigenvalue's
/// multiplicity and preserves positive semidefiniteness in both directions.
pub fn real_embed(h: &Hermitian4) -> SMatrix<f64, 8, 8> {
    real_embed_matrix(h.matrix())
}

fn real_embed_matrix(a: &Matrix4<C64>) -> SMatrix<f64, 8, 8> {
    let mut out = SMatrix::<f64, 8, 8>::zeros();
    for r in 0..4 {
        for c in 0..4 {
            let z = a[(r, c)];
            out[(r, c)] = z.re;
            out[(r + 4, c + 4)] = z.re;
            out[(r, c + 4)] = -z.im;
            out[(r + 4, c)] = z.im;
        }
    }
    out
}

/// Recover a Hermitian `4x4` matrix from a symmetric `8x8` block.
///
/// For a general symmetric PSD `X = [[P, B], [B^T, S]]`, averaging `X` with
/// `J X J^T` (`J` the embedded imaginary unit) gives an embedded Hermitian
/// matrix with real part `(P+S)/2` and imaginary part `(B^T-B)/2`; that matrix
/// is PSD whenever `X` is and attains the same values on all embedded
/// functionals. This is the exact inverse on genuinely embedded inputs.
pub fn extract_hermitian(x: &DMatrix<f64>) -> Result<Matrix4<C64>> {
    if x.nrows() != 8 || x.ncols() != 8 {
        return Err(Error::DimensionMismatch {
            expected: 8,
            got: x.nrows(),
            context: "embedded marginal block",
        });
    }
    let mut out = Matrix4::<C64>::zeros();
    for r in 0..4 {
        for c in 0..4 {
            let re = 0.5 * (x[(r, c)] + x[(r + 4, c + 4)]);
            let im = 0.5 * (x[(c, r + 4)] - x[(r, c + 4)]);
            out[(r, c)] = C64::new(re, im);
        }
    }
    // Exact hermitization kills residual asymmetry from the solver iterate.
    Ok((out + out.adjoint()).scale(0.5))
}

/// Sparse coefficients of the functional `scale * <embed(a), X>` on an
/// embedded `8x8` block. With `scale = 1/2` this evaluates `Tr[a rho]` for
/// Hermitian `a` at `X = embed(rho)`.
fn embedded_coeffs(a: &Matrix4<C64>, scale: f64) -> SparseSym {
    let e = real_embed_matrix(a);
    let mut s = SparseSym::new();
    for r in 0..8 {
        for c in r..8 {
            let v = e[(r, c)] * scale;
            if v != 0.0 {
                s.push(r, c, v);
            }
        }
    }
    s
}

/// Build the moment relaxation of an instance.
///
/// Blocks: the `(3n+1)`-dimensional moment matrix `M` plus one embedded `8x8`
/// marginal per term. Constraints: `M(I,I) = 1`; `M(ik,ik) = 1`;
/// `M(ik,il) = 0` for `k != l`; per term, the nine quadratic and six linear
/// linking equalities `M(...) = Tr[(sigma^k (x) sigma^l) rho_t]` and
/// `Tr[rho_t] = 1`. Objective: `sum_t w_t Tr[O_t rho_t]` rewritten through the
/// linking equalities as a functional of `M` plus the constant
/// `sum_t w_t alpha_00`.
pub fn build_moment_relaxation(inst: &Instance) -> Result<ConicProgram> {
    inst.validate_basic()?;
    let n = inst.n;
    let mdim = 3 * n + 1;

    let mut blocks = vec![("M".to_string(), mdim)];
    for t in 0..inst.terms.len() {
        blocks.push((format!("rho:{t}"), 8));
    }

    let mut constraints = Vec::new();
    // Scalar normalization M(I, I) = 1.
    constraints.push(LinearConstraint {
        terms: vec![BlockTerm {
            block: 0,
            coeffs: SparseSym::single(0, 0, 1.0),
        }],
        rhs: 1.0,
    });
    // Unit diagonal M(ik, ik) = 1.
    for i in 0..n {
        for k in 1..=3 {
            let p = moment_index(i, k);
            constraints.push(LinearConstraint {
                terms: vec![BlockTerm {
                    block: 0,
                    coeffs: SparseSym::single(p, p, 1.0),
                }],
                rhs: 1.0,
            });
        }
    }
    // Same-qubit orthogonality M(ik, il) = 0, k < l.
    for i in 0..n {
        for k in 1..=3 {
            for l in (k + 1)..=3 {
                let (p, q) = (moment_index(i, k), moment_index(i, l));
                constraints.push(LinearConstraint {
                    terms: vec![BlockTerm {
                        block: 0,
                        coeffs: SparseSym::single(p, q, 0.5),
                    }],
                    rhs: 0.0,
                });
            }
        }
    }
    // Per-term linking and trace constraints.
    for (t, term) in inst.terms.iter().enumerate() {
        let xb = 1 + t;
        // Quadratic linking: M(ik, jl) = Tr[(sigma^k (x) sigma^l) rho_t].
        for k in 1..=3 {
            for l in 1..=3 {
                let (p, q) = (moment_index(term.i, k), moment_index(term.j, l));
                constraints.push(LinearConstraint {
                    terms: vec![
                        BlockTerm {
                            block: 0,
                            coeffs: SparseSym::single(p, q, -0.5),
                        },
                        BlockTerm {
                            block: xb,
                            coeffs: embedded_coeffs(&sigma_kron(k, l), 0.5),
                        },
                    ],
                    rhs: 0.0,
                });
            }
        }
        // Linear linking: M(I, ik) = Tr[(sigma^k (x) I) rho_t] and the j side.
        for k in 1..=3 {
            constraints.push(LinearConstraint {
                terms: vec![
                    BlockTerm {
                        block: 0,
                        coeffs: SparseSym::single(0, moment_index(term.i, k), -0.5),
                    },
                    BlockTerm {
                        block: xb,
                        coeffs: embedded_coeffs(&sigma_kron(k, 0), 0.5),
                    },
                ],
                rhs: 0.0,
            });
        }
        for l in 1..=3 {
            constraints.push(LinearConstraint {
                terms: vec![
                    BlockTerm {
                        block: 0,
                        coeffs: SparseSym::single(0, moment_index(term.j, l), -0.5),
                    },
                    BlockTerm {
                        block: xb,
                        coeffs: embedded_coeffs(&sigma_kron(0, l), 0.5),
                    },
                ],
                rhs: 0.0,
            });
        }
        // Tr[rho_t] = 1.
        constraints.push(LinearConstraint {
            terms: vec![BlockTerm {
                block: xb,
                coeffs: embedded_coeffs(&sigma_kron(0, 0), 0.5),
            }],
            rhs: 1.0,
        });
    }

    // Objective on the moment block; the marginals enter only through the
    // linking equalities.
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let key = |p: usize, q: usize| if p <= q { (p, q) } else { (q, p) };
    let mut constant = 0.0;
    for term in &inst.terms {
        let a = &term.coeffs;
        let w = term.weight;
        constant += w * a[(0, 0)];
        for k in 1..=3 {
            *acc.entry(key(0, moment_index(term.i, k))).or_insert(0.0) += 0.5 * w * a[(k, 0)];
            *acc.entry(key(0, moment_index(term.j, k))).or_insert(0.0) += 0.5 * w * a[(0, k)];
            for l in 1..=3 {
                *acc.entry(key(moment_index(term.i, k), moment_index(term.j, l)))
                    .or_insert(0.0) += 0.5 * w * a[(k, l)];
            }
        }
    }
    let mut objective = vec![SparseSym::from_map(acc)];
    objective.extend(inst.terms.iter().map(|_| SparseSym::new()));

    let prog = ConicProgram {
        blocks,
        constraints,
        objective,
        constant,
    };
    prog.validate()?;
    Ok(prog)
}

/// Build the unit-diagonal relaxation of a traceless, strictly quadratic
/// instance: maximize `sum_t w_t sum_kl alpha_kl M(ik, jl)` over symmetric PSD
/// `M` (dimension `3n`) with unit diagonal.
pub fn build_unit_diagonal_relaxation(inst: &Instance) -> Result<ConicProgram> {
    inst.validate_basic()?;
    if inst.kind != InstanceKind::Traceless {
        return Err(Error::InvalidInstance(format!(
            "unit-diagonal relaxation requires a traceless instance, got kind \"{}\"",
            inst.kind
        )));
    }
    let report = validate_instance(inst);
    if !report.passed() {
        return Err(Error::InvalidInstance(format!(
            "instance failed validation:\n{report}"
        )));
    }
    let n = inst.n;
    let dim = 3 * n;
    let blocks = vec![("M".to_string(), dim)];

    let mut constraints = Vec::new();
    for i in 0..n {
        for k in 1..=3 {
            let p = traceless_index(i, k);
            constraints.push(LinearConstraint {
                terms: vec![BlockTerm {
                    block: 0,
                    coeffs: SparseSym::single(p, p, 1.0),
                }],
                rhs: 1.0,
            });
        }
    }

    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let key = |p: usize, q: usize| if p <= q { (p, q) } else { (q, p) };
    for term in &inst.terms {
        let a = &term.coeffs;
        for k in 1..=3 {
            for l in 1..=3 {
                *acc.entry(key(traceless_index(term.i, k), traceless_index(term.j, l)))
                    .or_insert(0.0) += 0.5 * term.weight * a[(k, l)];
            }
        }
    }
    let objective = vec![SparseSym::from_map(acc)];

    let prog = ConicProgram {
        blocks,
        constraints,
        objective,
        constant: 0.0,
    };
    prog.validate()?;
    Ok(prog)
}

/// Normalized internal copy of one constraint row: per touched block, the
/// sparse `(row, col, coeff)` entries of its coefficient matrix.
struct Row {
    #[allow(clippy::type_complexity)]
    terms: Vec<(usize, Vec<(usize, usize, f64)>)>,
    rhs: f64,
}

fn eval_row(row: &Row, blocks: &[DMatrix<f64>]) -> f64 {
    let mut acc = 0.0;
    for (b, entries) in &row.terms {
        let x = &blocks[*b];
        for &(r, c, v) in entries {
            acc += if r == c {
                v * x[(r, r)]
            } else {
                2.0 * v * x[(r, c)]
            };
        }
    }
    acc
}

/// Project a symmetric matrix onto the PSD cone by clamping negative
/// eigenvalues to zero.
fn psd_project(x: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = x.nrows();
    let sym = (x + x.transpose()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut out = DMatrix::<f64>::zeros(dim, dim);
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let v = eig.eigenvectors.column(idx);
            out.ger(lam, &v, &v, 1.0);
        }
    }
    out
}

/// Solve a block SDP by operator splitting.
///
/// Alternates projection onto the affine constraint set (cached Cholesky of
/// the row-normalized constraint Gram matrix), PSD projection per block, and a
/// scaled dual update, with over-relaxation 1.6 and unit penalty. Stops when
/// both relative residuals fall below `tol`. If the iteration cap is reached,
/// the best iterate seen (smallest worst-case residual) is returned with
/// `converged = false`. The reported blocks come from the affine-projection
/// side: equality constraints hold exactly, PSD holds up to roughly `tol`.
pub fn solve(prog: &ConicProgram, tol: f64, max_iter: usize) -> Result<MomentSolution> {
    prog.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::Domain("iteration cap must be at least 1".into()));
    }
    let nb = prog.blocks.len();
    let ncons = prog.constraints.len();

    // Row-normalized constraints.
    let mut rows: Vec<Row> = Vec::with_capacity(ncons);
    for con in &prog.constraints {
        let norm_sq: f64 = con.terms.iter().map(|t| t.coeffs.frobenius_sq()).sum();
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            return Err(Error::Invariant("constraint row with zero norm".into()));
        }
        let terms = con
            .terms
            .iter()
            .map(|t| (t.block, t.coeffs.scaled(1.0 / norm).entries().to_vec()))
            .collect();
        rows.push(Row {
            terms,
            rhs: con.rhs / norm,
        });
    }

    // Gram matrix of the normalized rows, assembled cell by cell so shared
    // entries pair up exactly once. BTreeMap keeps the accumulation order
    // (and thus the floating-point result) deterministic.
    let mut gram = DMatrix::<f64>::zeros(ncons, ncons);
    for b in 0..nb {
        let mut cells: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
        for (ci, row) in rows.iter().enumerate() {
            for (blk, entries) in &row.terms {
                if *blk == b {
                    for &(r, c, v) in entries {
                        cells.entry((r, c)).or_default().push((ci, v));
                    }
                }
            }
        }
        for ((r, c), list) in &cells {
            let weight = if r == c { 1.0 } else { 2.0 };
            for (pos, &(ci, vi)) in list.iter().enumerate() {
                for &(cj, vj) in &list[pos..] {
                    gram[(ci, cj)] += weight * vi * vj;
                    if ci != cj {
                        gram[(cj, ci)] += weight * vi * vj;
                    }
                }
            }
        }
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Invariant(
            "constraint Gram matrix is singular; equality constraints are linearly dependent"
                .into(),
        )
    })?;

    // Dense objective per block (step direction for the affine update).
    let c_dense: Vec<DMatrix<f64>> = prog
        .objective
        .iter()
        .zip(&prog.blocks)
        .map(|(s, (_, d))| {
            let mut mtx = DMatrix::<f64>::zeros(*d, *d);
            s.add_scaled(&mut mtx, 1.0);
            mtx
        })
        .collect();

    let proj_affine = |blocks: &mut [DMatrix<f64>]| {
        if ncons == 0 {
            return;
        }
        let resid =
            DVector::<f64>::from_fn(ncons, |ci, _| eval_row(&rows[ci], blocks) - rows[ci].rhs);
        let y = chol.solve(&resid);
        for (ci, row) in rows.iter().enumerate() {
            let yi = y[ci];
            if yi == 0.0 {
                continue;
            }
            for (blk, entries) in &row.terms {
                let x = &mut blocks[*blk];
                for &(r, c, v) in entries {
                    x[(r, c)] -= yi * v;
                    if r != c {
                        x[(c, r)] -= yi * v;
                    }
                }
            }
        }
    };

    let dims: Vec<usize> = prog.blocks.iter().map(|b| b.1).collect();
    let zero_blocks: Vec<DMatrix<f64>> =
        dims.iter().map(|&d| DMatrix::<f64>::zeros(d, d)).collect();
    let mut z = zero_blocks.clone();
    let mut u = zero_blocks.clone();
    let mut x = zero_blocks;

    #[allow(clippy::type_complexity)] // (objective, blocks, primal, dual, iteration)
    let mut best: Option<(f64, Vec<DMatrix<f64>>, f64, f64, usize)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);

    for it in 1..=max_iter {
        iterations = it;
        // Affine step: x = proj_affine(z - u + C).
        for b in 0..nb {
            x[b] = &z[b] - &u[b] + &c_dense[b];
        }
        proj_affine(&mut x);

        // Over-relaxed PSD step and dual update.
        let mut primal_sq = 0.0;
        let mut dual_sq = 0.0;
        let mut x_sq = 0.0;
        let mut z_sq = 0.0;
        let mut u_sq = 0.0;
        for b in 0..nb {
            let xh = x[b].scale(OVER_RELAXATION) - z[b].scale(OVER_RELAXATION - 1.0);
            let w = &xh + &u[b];
            let z_new = psd_project(&w);
            u[b] = w - &z_new;
            dual_sq += (&z_new - &z[b]).norm_squared();
            z[b] = z_new;
            primal_sq += (&x[b] - &z[b]).norm_squared();
            x_sq += x[b].norm_squared();
            z_sq += z[b].norm_squared();
            u_sq += u[b].norm_squared();
        }
        primal = primal_sq.sqrt() / (1.0 + x_sq.sqrt() + z_sq.sqrt());
        dual = dual_sq.sqrt() / (1.0 + u_sq.sqrt());

        let score = primal.max(dual);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, x.clone(), primal, dual, it));
        }
        if primal <= tol && dual <= tol {
            converged = true;
            break;
        }
    }

    let (blocks_out, primal_out, dual_out, iter_out) = if converged {
        (x, primal, dual, iterations)
    } else {
        let (_, bx, bp, bd, bi) =
            best.ok_or_else(|| Error::Invariant("no iterate recorded".into()))?;
        (bx, bp, bd, bi)
    };

    let objective = prog.objective_of(&blocks_out);

    let mut m = None;
    let mut rho = Vec::new();
    for (idx, (label, _)) in prog.blocks.iter().enumerate() {
        if label == "M" {
            m = Some(blocks_out[idx].clone());
        } else if label.starts_with("rho:") {
            rho.push(extract_hermitian(&blocks_out[idx])?);
        }
    }
    let m = m.ok_or_else(|| Error::Invariant("program has no moment block".into()))?;

    Ok(MomentSolution {
        m,
        rho,
        objective,
        primal_residual: primal_out,
        dual_residual: dual_out,
        iterations: iter_out,
        converged,
    })
}

/// Factor a solved moment matrix into unit Gram vectors.
///
/// Eigenvalues in `[-clip_tol, 0)` are clipped to zero; an eigenvalue below
/// `-clip_tol` is an error. The ambient dimension is the numerical rank
/// (eigenvalues above `clip_tol`). Each vector is renormalized to unit length;
/// the largest pre-normalization deviation is recorded.
pub fn gram_vectors(sol: &MomentSolution, clip_tol: f64) -> Result<GramVectors> {
    if !(clip_tol >= 0.0 && clip_tol.is_finite()) {
        return Err(Error::Domain(format!(
            "clip tolerance must be nonnegative and finite, got {clip_tol}"
        )));
    }
    let mdim = sol.m.nrows();
    if sol.m.ncols() != mdim || mdim == 0 || (mdim - 1) % 3 != 0 {
        return Err(Error::DimensionMismatch {
            expected: sol.m.ncols(),
            got: mdim,
            context: "moment matrix of dimension 3n+1",
        });
    }
    let n = (mdim - 1) / 3;

    let sym = (&sol.m + sol.m.transpose()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let min_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -clip_tol {
        return Err(Error::NotPsd {
            eigenvalue: min_eig,
            tol: clip_tol,
        });
    }
    let kept: Vec<usize> = (0..mdim)
        .filter(|&e| eig.eigenvalues[e] > clip_tol)
        .collect();
    let dim = kept.len();
    if dim == 0 {
        return Err(Error::Invariant("moment matrix is numerically zero".into()));
    }

    let mut norm_deviation = 0.0f64;
    let mut column = |p: usize| -> Result<DVector<f64>> {
        let mut col = DVector::<f64>::from_fn(dim, |row, _| {
            eig.eigenvalues[kept[row]].sqrt() * eig.eigenvectors[(p, kept[row])]
        });
        let norm = col.norm();
        norm_deviation = norm_deviation.max((norm - 1.0).abs());
        if norm <= f64::EPSILON {
            return Err(Error::Invariant(format!(
                "zero Gram vector for unit-diagonal basis element {p}"
            )));
        }
        col /= norm;
        Ok(col)
    };

    let v0 = column(0)?;
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        v.push([
            column(moment_index(i, 1))?,
            column(moment_index(i, 2))?,
            column(moment_index(i, 3))?,
        ]);
    }
    Ok(GramVectors {
        v0,
        v,
        dim,
        norm_deviation,
    })
}

/// Objective of the moment relaxation evaluated directly on a moment matrix:
/// `sum_t w_t (alpha_00 + sum_k alpha_k0 M(I,ik) + sum_l alpha_0l M(I,jl)
/// + sum_kl alpha_kl M(ik,jl))`.
pub fn objective_value(inst: &Instance, m: &DMatrix<f64>) -> Result<f64> {
    inst.validate_basic()?;
    let mdim = 3 * inst.n + 1;
    if m.nrows() != mdim || m.ncols() != mdim {
        return Err(Error::DimensionMismatch {
            expected: mdim,
            got: m.nrows(),
            context: "moment matrix",
        });
    }
    let mut total = 0.0;
    for term in &inst.terms {
        let a = &term.coeffs;
        let mut val = a[(0, 0)];
        for k in 1..=3 {
            val += a[(k, 0)] * m[(0, moment_index(term.i, k))];
            val += a[(0, k)] * m[(0, moment_index(term.j, k))];
            for l in 1..=3 {
                val += a[(k, l)] * m[(moment_index(term.i, k), moment_index(term.j, l))];
            }
        }
        total += term.weight * val;
    }
    Ok(total)
}

/// `sum_t w_t Re Tr[O_t rho_t]` evaluated directly on the recovered marginals.
/// By the linking constraints this coincides with [`objective_value`] on any
/// affine-feasible solution.
pub fn marginal_objective(inst: &Instance, rho: &[Matrix4<C64>]) -> Result<f64> {
    inst.validate_basic()?;
    if rho.len() != inst.terms.len() {
        return Err(Error::DimensionMismatch {
            expected: inst.terms.len(),
            got: rho.len(),
            context: "marginal list",
        });
    }
    let mut total = 0.0;
    for (term, r) in inst.terms.iter().zip(rho) {
        let op = pauli_reconstruct(&term.coeffs);
        total += term.weight * (op.matrix() * r).trace().re;
    }
    Ok(total)
}

/// Feasible blocks of the moment relaxation realized by a product state:
/// `M(I,ik) = theta_ik`, `M(ik,jl) = theta_ik theta_jl` across qubits,
/// `M(ik,il) = delta_kl` on a qubit, and `rho_t = rho_i (x) rho_j` embedded.
/// Useful as a physical feasibility oracle for the program builder.
pub fn moment_blocks_from_product(
    inst: &Instance,
    state: &ProductState,
) -> Result<Vec<DMatrix<f64>>> {
    inst.validate_basic()?;
    if state.n() != inst.n {
        return Err(Error::DimensionMismatch {
            expected: inst.n,
            got: state.n(),
            context: "product state length",
        });
    }
    let n = inst.n;
    let mdim = 3 * n + 1;
    let mut m = DMatrix::<f64>::identity(mdim, mdim);
    for i in 0..n {
        for k in 1..=3 {
            let p = moment_index(i, k);
            m[(0, p)] = state.thetas[i][k - 1];
            m[(p, 0)] = state.thetas[i][k - 1];
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for k in 1..=3 {
                for l in 1..=3 {
                    m[(moment_index(i, k), moment_index(j, l))] =
                        state.thetas[i][k - 1] * state.thetas[j][l - 1];
                }
            }
        }
    }

    let mut blocks = vec![m];
    for term in &inst.terms {
        let rho_q = |i: usize| {
            let mut rho = sigma(0).scale(0.5);
            for k in 1..=3 {
                rho += sigma(k).scale(0.5 * state.thetas[i][k - 1]);
            }
            rho
        };
        let joint = rho_q(term.i).kronecker(&rho_q(term.j));
        let joint4 = Matrix4::<C64>::from_fn(|r, c| joint[(r, c)]);
        let embedded = real_embed_matrix(&joint4);
        blocks.push(DMatrix::<f64>::from_fn(8, 8, |r, c| embedded[(r, c)]));
    }
    Ok(blocks)
}
