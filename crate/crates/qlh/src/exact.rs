//! Ground-truth oracle: exact λ_max by diagonalization and the best product
//! state by multi-start coordinate ascent.
//!
//! Everything here is desk scale on purpose. Hamiltonians are assembled as
//! sparse 2ⁿ-dimensional Hermitian matrices (n ≤ 24); small systems are
//! diagonalized densely, larger ones with a restarted Lanczos iteration on
//! the shifted operator. Product-state energies never touch the 2ⁿ space:
//! with Bloch vectors θ_i (and the convention θ_{i0} = 1), the energy of
//! `ρ = ⊗ᵢ ½(I + Σ_k θ_{ik} σ^k)` is the closed form
//! `Σ_e w_e Σ_{kl} α_{kl} θ_{e₁k} θ_{e₂l}`, evaluated in O(|terms|).
//!
//! The best-product search exploits that this energy is affine in each θ_i
//! separately: a sweep sets θ_i to the normalized local gradient, which is
//! the exact per-qubit maximizer, so sweeps are monotone and converge to a
//! local optimum. Multiple seeded restarts run in parallel and the best is
//! returned (a heuristic lower bound on the true product optimum — callers
//! should treat it as "best found").

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::pauli::{sigma_kron, Instance, C64};
use crate::rng::{stream, SALT_ASCENT, SALT_LANCZOS};
use crate::{Error, Result};

/// Largest qubit count for which the sparse matrix form may be built.
pub const SPARSE_QUBIT_LIMIT: usize = 24;
/// Dense diagonalization is used up to this qubit count, Lanczos beyond.
pub const DENSE_QUBIT_LIMIT: usize = 12;
/// Relative residual target for the iterative eigensolver.
pub const EIG_RESIDUAL_TOL: f64 = 1e-8;

/// A product of single-qubit states, one Bloch vector per qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    /// Bloch vectors; ‖θ_i‖ ≤ 1, with equality for pure states.
    pub thetas: Vec<Vector3<f64>>,
}

impl ProductState {
    /// Wraps Bloch vectors after checking they sit inside the Bloch ball.
    // The negated comparison is deliberate: it also rejects NaN norms.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(thetas: Vec<Vector3<f64>>) -> Result<Self> {
        for (i, t) in thetas.iter().enumerate() {
            if !(t.norm() <= 1.0 + 1e-12) {
                return Err(Error::Domain(format!(
                    "Bloch vector {i} has norm {} > 1",
                    t.norm()
                )));
            }
        }
        Ok(Self { thetas })
    }

    /// Number of qubits.
    pub fn n(&self) -> usize {
        self.thetas.len()
    }

    /// True when every Bloch vector has unit norm within `tol`.
    pub fn is_pure(&self, tol: f64) -> bool {
        self.thetas.iter().all(|t| (t.norm() - 1.0).abs() <= tol)
    }

    /// Independent uniform points on the Bloch sphere (pure product state).
    pub fn random_pure(n: usize, rng: &mut impl Rng) -> Self {
        let thetas = (0..n).map(|_| random_unit_vector(rng)).collect();
        Self { thetas }
    }
}

fn random_unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::<f64>::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let norm = v.norm();
        if norm > 1e-9 {
            return v / norm;
        }
    }
}

/// How an extremal eigenvalue was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigMethod {
    /// Full dense Hermitian eigendecomposition.
    Dense,
    /// Restarted Lanczos iteration with full reorthogonalization.
    Iterative,
}

/// Extremal eigenvalue result.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// The largest eigenvalue λ_max(H).
    pub lambda_max: f64,
    /// A unit eigenvector achieving it (in the 2ⁿ computational basis,
    /// qubit q addressing bit q of the index).
    pub eigvec: Option<DVector<C64>>,
    /// Which code path produced the result.
    pub method: EigMethod,
}

/// Sparse Hermitian matrix in compressed-sparse-row form.
///
/// Qubit q addresses bit q of the basis index (qubit 0 is the lowest bit).
#[derive(Clone, Debug)]
pub struct SparseHermitian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
}

impl SparseHermitian {
    /// Matrix dimension 2ⁿ.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Real part of the trace (exact for Hermitian matrices).
    pub fn trace_re(&self) -> f64 {
        let mut t = 0.0;
        for row in 0..self.dim {
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                if self.cols[idx] as usize == row {
                    t += self.vals[idx].re;
                }
            }
        }
        t
    }

    /// Maximum absolute row sum ‖H‖₁ (equals the column version for
    /// Hermitian matrices); an upper bound on the spectral radius.
    pub fn norm1(&self) -> f64 {
        (0..self.dim)
            .map(|row| {
                (self.row_ptr[row]..self.row_ptr[row + 1])
                    .map(|idx| self.vals[idx].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// y = H x.
    pub fn matvec(&self, x: &DVector<C64>, y: &mut DVector<C64>) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for row in 0..self.dim {
            let mut acc = C64::default();
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[idx] * x[self.cols[idx] as usize];
            }
            y[row] = acc;
        }
    }

    /// Dense copy (guarded: dimension ≤ 4096).
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        if self.dim > 1 << DENSE_QUBIT_LIMIT {
            return Err(Error::Capacity {
                what: "dense matrix",
                requested: self.dim,
                limit: 1 << DENSE_QUBIT_LIMIT,
            });
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for row in 0..self.dim {
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                m[(row, self.cols[idx] as usize)] = self.vals[idx];
            }
        }
        Ok(m)
    }
}

/// Assembles `H = Σ_e w_e Σ_{kl} α_{kl} σ^k_{e₁} σ^l_{e₂}` as a sparse
/// Hermitian matrix of dimension 2ⁿ.
pub fn build_matrix(inst: &Instance) -> Result<SparseHermitian> {
    if inst.n > SPARSE_QUBIT_LIMIT {
        return Err(Error::Capacity {
            what: "sparse Hamiltonian (qubits)",
            requested: inst.n,
            limit: SPARSE_QUBIT_LIMIT,
        });
    }
    inst.validate_basic()?;
    let dim = 1usize << inst.n;

    // Weighted 4×4 block of each term, in the term-local basis where the
    // first qubit of the pair is the high bit.
    let blocks: Vec<(usize, usize, nalgebra::Matrix4<C64>)> = inst
        .terms
        .iter()
        .map(|t| {
            let mut b = nalgebra::Matrix4::<C64>::zeros();
            for k in 0..4 {
                for l in 0..4 {
                    let a = t.weight * t.coeffs.alpha[k][l];
                    if a != 0.0 {
                        b += sigma_kron(k, l) * C64::new(a, 0.0);
                    }
                }
            }
            (t.i, t.j, b)
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols: Vec<u32> = Vec::new();
    let mut vals: Vec<C64> = Vec::new();
    row_ptr.push(0);
    let mut scratch: Vec<(u32, C64)> = Vec::new();
    for x in 0..dim {
        scratch.clear();
        for &(i, j, ref b) in &blocks {
            let bi = (x >> i) & 1;
            let bj = (x >> j) & 1;
            let r4 = 2 * bi + bj;
            for c4 in 0..4 {
                let v = b[(r4, c4)];
                if v != C64::default() {
                    let mut y = x & !(1 << i) & !(1 << j);
                    y |= (c4 >> 1) << i;
                    y |= (c4 & 1) << j;
                    scratch.push((y as u32, v));
                }
            }
        }
        scratch.sort_by_key(|&(c, _)| c);
        let mut idx = 0;
        while idx < scratch.len() {
            let col = scratch[idx].0;
            let mut acc = C64::default();
            while idx < scratch.len() && scratch[idx].0 == col {
                acc += scratch[idx].1;
                idx += 1;
            }
            if acc != C64::default() {
                cols.push(col);
                vals.push(acc);
            }
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseHermitian {
        dim,
        row_ptr,
        cols,
        vals,
    })
}

/// Exact largest eigenvalue: dense diagonalization for n ≤ 12, shifted
/// restarted Lanczos for larger systems (up to n = 24).
pub fn lambda_max(inst: &Instance) -> Result<SpectrumResult> {
    let method = if inst.n <= DENSE_QUBIT_LIMIT {
        EigMethod::Dense
    } else {
        EigMethod::Iterative
    };
    lambda_max_using(inst, method)
}

/// Like [`lambda_max`] but with the code path forced; useful for
/// cross-validating the two solvers on the same instance.
pub fn lambda_max_using(inst: &Instance, method: EigMethod) -> Result<SpectrumResult> {
    let h = build_matrix(inst)?;
    match method {
        EigMethod::Dense => {
            let dense = h.to_dense()?;
            let eig = dense.symmetric_eigen();
            let mut best = 0usize;
            for i in 1..eig.eigenvalues.len() {
                if eig.eigenvalues[i] > eig.eigenvalues[best] {
                    best = i;
                }
            }
            Ok(SpectrumResult {
                lambda_max: eig.eigenvalues[best],
                eigvec: Some(eig.eigenvectors.column(best).into_owned()),
                method,
            })
        }
        EigMethod::Iterative => {
            let (lam, vec) = lanczos_top(&h, 7)?;
            Ok(SpectrumResult {
                lambda_max: lam,
                eigvec: Some(vec),
                method,
            })
        }
    }
}

/// Restarted Lanczos with full reorthogonalization for the top eigenpair.
///
/// The operator is shifted by s = ‖H‖₁ ≥ ρ(H) so the target eigenvalue
/// λ_max + s is the largest in magnitude, then the shift is subtracted.
fn lanczos_top(h: &SparseHermitian, seed: u64) -> Result<(f64, DVector<C64>)> {
    let dim = h.dim();
    let shift = h.norm1();
    let scale = shift.max(1e-30);
    let steps = 40.min(dim);
    let max_restarts = 500;

    let mut rng = stream(seed, SALT_LANCZOS, 0);
    let mut q: DVector<C64> = DVector::from_fn(dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    q /= C64::new(q.norm(), 0.0);

    let mut residual = f64::INFINITY;
    for restart in 0..max_restarts {
        let mut basis: Vec<DVector<C64>> = vec![q.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(steps);
        let mut betas: Vec<f64> = Vec::with_capacity(steps);
        let mut w = DVector::zeros(dim);
        for j in 0..steps {
            h.matvec(&basis[j], &mut w);
            w += &basis[j] * C64::new(shift, 0.0);
            let alpha = basis[j].dotc(&w).re;
            alphas.push(alpha);
            // Two rounds of classical Gram-Schmidt against the whole basis
            // keep the Krylov vectors orthogonal to working precision.
            for _ in 0..2 {
                for b in &basis {
                    let overlap = b.dotc(&w);
                    w -= b * overlap;
                }
            }
            let beta = w.norm();
            if beta < 1e-12 * scale || j + 1 == steps {
                if beta >= 1e-12 * scale {
                    betas.push(beta);
                }
                break;
            }
            betas.push(beta);
            basis.push(&w / C64::new(beta, 0.0));
        }

        let m = alphas.len();
        let mut tri = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            tri[(j, j)] = alphas[j];
            if j + 1 < m {
                tri[(j, j + 1)] = betas[j];
                tri[(j + 1, j)] = betas[j];
            }
        }
        let eig = tri.symmetric_eigen();
        let mut best = 0usize;
        for i in 1..m {
            if eig.eigenvalues[i] > eig.eigenvalues[best] {
                best = i;
            }
        }
        let s = eig.eigenvectors.column(best);
        let mut ritz: DVector<C64> = DVector::zeros(dim);
        for (j, b) in basis.iter().take(m).enumerate() {
            ritz += b * C64::new(s[j], 0.0);
        }
        ritz /= C64::new(ritz.norm(), 0.0);

        let theta = eig.eigenvalues[best];
        h.matvec(&ritz, &mut w);
        w += &ritz * C64::new(shift - theta, 0.0);
        residual = w.norm();
        if residual <= EIG_RESIDUAL_TOL * scale {
            return Ok((theta - shift, ritz));
        }
        q = ritz;
        let _ = restart;
    }
    Err(Error::NoConvergence {
        what: "Lanczos eigensolver",
        iterations: max_restarts,
        residual,
    })
}

/// Energy `Tr[H ρ_prod]` of a product state, computed in O(|terms|) via the
/// Pauli coefficients: `Σ_e w_e Σ_{kl} α_{kl} θ_{e₁k} θ_{e₂l}` with θ_{·0} = 1.
pub fn product_energy(inst: &Instance, state: &ProductState) -> Result<f64> {
    if state.n() != inst.n {
        return Err(Error::DimensionMismatch {
            expected: inst.n,
            got: state.n(),
            context: "product state vs instance qubit count",
        });
    }
    let mut energy = 0.0;
    for term in &inst.terms {
        let ti = extended(&state.thetas[term.i]);
        let tj = extended(&state.thetas[term.j]);
        let mut local = 0.0;
        for k in 0..4 {
            for l in 0..4 {
                let a = term.coeffs.alpha[k][l];
                if a != 0.0 {
                    local += a * ti[k] * tj[l];
                }
            }
        }
        energy += term.weight * local;
    }
    Ok(energy)
}

fn extended(t: &Vector3<f64>) -> [f64; 4] {
    [1.0, t[0], t[1], t[2]]
}

/// Best product state found by seeded multi-start coordinate ascent.
///
/// Restarts run in parallel with per-restart seeds `seed ⊕ restart index`;
/// the returned maximum is independent of scheduling (ties resolve to the
/// lowest restart index). The value is a certified *lower* bound on the
/// product-state optimum; global optimality is heuristic.
pub fn best_product(inst: &Instance, restarts: usize, seed: u64) -> Result<(ProductState, f64)> {
    if restarts == 0 {
        return Err(Error::Domain("need at least one restart".into()));
    }
    inst.validate_basic()?;
    let results: Vec<(ProductState, f64)> = (0..restarts)
        .into_par_iter()
        .map(|r| ascend(inst, seed ^ (r as u64)))
        .collect();
    let mut best = 0usize;
    for i in 1..results.len() {
        if results[i].1 > results[best].1 {
            best = i;
        }
    }
    Ok(results.into_iter().nth(best).expect("restarts >= 1"))
}

/// One coordinate-ascent run from a random pure product state.
fn ascend(inst: &Instance, seed: u64) -> (ProductState, f64) {
    let mut rng = stream(seed, SALT_ASCENT, 0);
    let mut state = ProductState::random_pure(inst.n, &mut rng);
    let mut energy = product_energy(inst, &state).expect("dimensions match by construction");
    for _sweep in 0..500 {
        for i in 0..inst.n {
            // Local gradient: energy = const + g · θ_i with everything else
            // fixed, so the per-qubit maximizer over the Bloch ball is g/‖g‖.
            let mut g: Vector3<f64> = Vector3::zeros();
            for term in &inst.terms {
                if term.i == i {
                    let tj = extended(&state.thetas[term.j]);
                    for k in 1..4 {
                        let mut acc = 0.0;
                        for l in 0..4 {
                            acc += term.coeffs.alpha[k][l] * tj[l];
                        }
                        g[k - 1] += term.weight * acc;
                    }
                }
                if term.j == i {
                    let ti = extended(&state.thetas[term.i]);
                    for l in 1..4 {
                        let mut acc = 0.0;
                        for k in 0..4 {
                            acc += term.coeffs.alpha[k][l] * ti[k];
                        }
                        g[l - 1] += term.weight * acc;
                    }
                }
            }
            let norm = g.norm();
            if norm > 1e-14 {
                state.thetas[i] = g / norm;
            }
        }
        let new_energy = product_energy(inst, &state).expect("dimensions fixed");
        debug_assert!(
            new_energy >= energy - 1e-9,
            "coordinate ascent decreased the energy: {energy} -> {new_energy}"
        );
        if new_energy - energy < 1e-10 {
            energy = new_energy;
            break;
        }
        energy = new_energy;
    }
    (state, energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{
        encode_heisenberg, encode_max2sat, product_gap_instance, random_instance, Instance,
        InstanceKind,
    };
    use approx::assert_abs_diff_eq;

    fn singlet_edge() -> Instance {
        product_gap_instance(1).unwrap()
    }

    #[test]
    fn empty_instance_builds_zero_matrix() {
        let inst = Instance {
            n: 3,
            kind: InstanceKind::Generic,
            terms: vec![],
        };
        let h = build_matrix(&inst).unwrap();
        assert_eq!(h.dim(), 8);
        assert_eq!(h.nnz(), 0);
        assert_abs_diff_eq!(lambda_max(&inst).unwrap().lambda_max, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn qubit_limit_is_enforced() {
        let inst = Instance {
            n: 25,
            kind: InstanceKind::Generic,
            terms: vec![],
        };
        assert!(matches!(build_matrix(&inst), Err(Error::Capacity { .. })));
    }

    #[test]
    fn singlet_edge_has_unit_top_eigenvalue() {
        let res = lambda_max(&singlet_edge()).unwrap();
        assert_eq!(res.method, EigMethod::Dense);
        assert_abs_diff_eq!(res.lambda_max, 1.0, epsilon = 1e-10);
        let h = build_matrix(&singlet_edge()).unwrap();
        assert_abs_diff_eq!(h.trace_re(), 1.0, epsilon = 1e-12);
        // Spectrum of a rank-1 projector: (1, 0, 0, 0).
        let dense = h.to_dense().unwrap();
        let mut ev: Vec<f64> = dense
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(ev[3], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ev[2], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn overlapping_singlet_chain_reaches_three_halves() {
        let inst = encode_heisenberg(&[(0, 1, 1.0), (1, 2, 1.0)], 3).unwrap();
        assert_abs_diff_eq!(lambda_max(&inst).unwrap().lambda_max, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn heisenberg_triangle_reaches_three_halves() {
        let inst = encode_heisenberg(&[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], 3).unwrap();
        assert_abs_diff_eq!(lambda_max(&inst).unwrap().lambda_max, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn trace_matches_term_sum_on_random_instance() {
        let inst = random_instance(5, 8, InstanceKind::Projector(2), 11).unwrap();
        let h = build_matrix(&inst).unwrap();
        let expect: f64 = inst
            .terms
            .iter()
            .map(|t| t.weight * 2f64.powi(inst.n as i32 - 2) * (4.0 * t.coeffs.alpha[0][0]))
            .sum();
        assert_abs_diff_eq!(h.trace_re(), expect, epsilon = 1e-9);
    }

    #[test]
    fn sparse_matvec_agrees_with_dense() {
        let inst = random_instance(4, 6, InstanceKind::Projector(1), 3).unwrap();
        let h = build_matrix(&inst).unwrap();
        let dense = h.to_dense().unwrap();
        assert!((dense.adjoint() - &dense).norm() <= 1e-12, "not Hermitian");
        let mut rng = stream(5, SALT_LANCZOS, 1);
        let x = DVector::from_fn(h.dim(), |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let mut y = DVector::zeros(h.dim());
        h.matvec(&x, &mut y);
        assert!((&dense * &x - y).norm() <= 1e-10);
    }

    #[test]
    fn product_energy_matches_dense_trace() {
        let inst = random_instance(4, 7, InstanceKind::Projector(2), 21).unwrap();
        let mut rng = stream(9, SALT_ASCENT, 5);
        let state = ProductState::random_pure(4, &mut rng);
        let fast = product_energy(&inst, &state).unwrap();

        // Dense cross-check: Tr[H ρ] with ρ = ⊗ᵢ ½(I + θᵢ·σ).
        let h = build_matrix(&inst).unwrap().to_dense().unwrap();
        let mut rho = DMatrix::<C64>::identity(1, 1);
        // Qubit q is bit q (low bit), so qubit 0 must be the innermost
        // Kronecker factor: build as ρ_{n-1} ⊗ ... ⊗ ρ_0.
        for q in (0..4).rev() {
            let t = &state.thetas[q];
            let mut local = nalgebra::Matrix2::<C64>::identity();
            for k in 0..3 {
                local += crate::pauli::sigma(k + 1) * C64::new(t[k], 0.0);
            }
            local *= C64::new(0.5, 0.0);
            rho = rho.kronecker(&local);
        }
        let direct = (h * rho).trace().re;
        assert_abs_diff_eq!(fast, direct, epsilon = 1e-10);
    }

    #[test]
    fn product_energy_of_maximally_mixed_state_is_weighted_trace() {
        let inst = random_instance(5, 6, InstanceKind::Projector(3), 2).unwrap();
        let state = ProductState::new(vec![Vector3::zeros(); 5]).unwrap();
        let expect: f64 = inst
            .terms
            .iter()
            .map(|t| t.weight * t.coeffs.alpha[0][0])
            .sum();
        assert_abs_diff_eq!(
            product_energy(&inst, &state).unwrap(),
            expect,
            epsilon = 1e-12
        );
    }

    #[test]
    fn singlet_antialigned_product_scores_one_half() {
        let state = ProductState::new(vec![
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.0, 0.0, -1.0),
        ])
        .unwrap();
        assert_abs_diff_eq!(
            product_energy(&singlet_edge(), &state).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn best_product_matches_gap_instance_table() {
        for (k, expect) in [(1u8, 0.5), (2, 2.0 / 3.0), (3, 5.0 / 6.0)] {
            let inst = product_gap_instance(k).unwrap();
            let (state, value) = best_product(&inst, 32, 2024).unwrap();
            assert_abs_diff_eq!(value, expect, epsilon = 1e-6);
            assert!(state.is_pure(1e-9));
            assert_abs_diff_eq!(
                product_energy(&inst, &state).unwrap(),
                value,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn best_product_never_exceeds_lambda_max() {
        for seed in 0..5 {
            let inst = random_instance(4, 6, InstanceKind::Projector(2), seed).unwrap();
            let lam = lambda_max(&inst).unwrap().lambda_max;
            let (_, val) = best_product(&inst, 8, seed).unwrap();
            assert!(
                val <= lam + 1e-8,
                "seed {seed}: product {val} above lambda_max {lam}"
            );
        }
    }

    #[test]
    fn best_product_is_deterministic_across_thread_counts() {
        let inst = random_instance(5, 8, InstanceKind::Projector(2), 77).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| best_product(&inst, 16, 5).unwrap().1)
        };
        assert_eq!(run(1).to_bits(), run(4).to_bits());
    }

    #[test]
    fn iterative_path_matches_dense_path() {
        for seed in 0..3 {
            let inst = random_instance(6, 9, InstanceKind::Projector(2), 100 + seed).unwrap();
            let dense = lambda_max_using(&inst, EigMethod::Dense).unwrap();
            let iter = lambda_max_using(&inst, EigMethod::Iterative).unwrap();
            let scale = dense.lambda_max.abs().max(1.0);
            assert!(
                (dense.lambda_max - iter.lambda_max).abs() <= 1e-7 * scale,
                "seed {seed}: dense {} vs iterative {}",
                dense.lambda_max,
                iter.lambda_max
            );
            // Residual check on the iterative eigenvector.
            let h = build_matrix(&inst).unwrap();
            let v = iter.eigvec.as_ref().unwrap();
            let mut w = DVector::zeros(h.dim());
            h.matvec(v, &mut w);
            w -= v * C64::new(iter.lambda_max, 0.0);
            assert!(w.norm() <= 1e-7 * h.norm1().max(1.0));
        }
    }

    #[test]
    fn max2sat_lambda_max_equals_brute_force() {
        use crate::pauli::random_max2sat_clauses;
        for seed in 0..4 {
            let clauses = random_max2sat_clauses(4, 8, seed);
            let inst = encode_max2sat(&clauses, 4).unwrap();
            let lam = lambda_max(&inst).unwrap().lambda_max;
            // Brute force: variable v is true iff bit v of the assignment.
            let mut best = 0usize;
            for assign in 0..(1usize << 4) {
                let sat = clauses
                    .iter()
                    .filter(|&&((i, ni), (j, nj))| {
                        let xi = (assign >> i) & 1 == 1;
                        let xj = (assign >> j) & 1 == 1;
                        (xi != ni) || (xj != nj)
                    })
                    .count();
                best = best.max(sat);
            }
            assert_abs_diff_eq!(lam, best as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn diagonal_instance_best_product_hits_brute_force() {
        use crate::pauli::random_max2sat_clauses;
        let clauses = random_max2sat_clauses(5, 10, 3);
        let inst = encode_max2sat(&clauses, 5).unwrap();
        let lam = lambda_max(&inst).unwrap().lambda_max;
        let (_, val) = best_product(&inst, 32, 9).unwrap();
        // Diagonal instances admit optimal products with θ = (0,0,±1).
        assert_abs_diff_eq!(val, lam, epsilon = 1e-6);
    }
}
