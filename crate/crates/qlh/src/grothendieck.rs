//! Traceless single-coupling instances: the Pauli interaction graph, the
//! unit-diagonal relaxation, Krivine sign rounding on bipartite graphs, and
//! the 1/√3 reduction from classical ±1 assignments to product states.
//!
//! For a Hamiltonian whose every term is a single weighted Pauli product
//! `w·σᵢᵏ⊗σⱼˡ`, the product-state problem restricted to Bloch vectors with
//! coordinates `±1/√3` is exactly one third of the classical ±1 quadratic
//! program `max zᵀAz`. When the interaction graph is bipartite, that
//! program's unit-diagonal semidefinite relaxation rounds at the
//! Grothendieck-type factor `2c/π` (`c = ln(1+√2)`): the transformed Gram
//! matrix with `sinh(c·G)` within sides and `sin(c·G)` across sides is again
//! a Gram matrix, and sign-rounding it gives the exact cross-pair
//! correlation `E[z_u z_v] = (2c/π)·G_uv`. The product state therefore
//! achieves at least `2c/(3π) ≈ 0.18703` of the relaxation value — hence of
//! `λ_max`.

use crate::exact::{self, ProductState};
use crate::hermite::DENOMINATOR_TOL;
use crate::pauli::{Instance, STRICT_QUAD_TOL};
use crate::rng::{self, SALT_INACTIVE, SALT_KRIVINE};
use crate::sdp::{self, traceless_index};
use crate::stats;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// The Krivine constant `c = ln(1+√2) = arcsinh(1)`.
pub fn krivine_constant() -> f64 {
    (1.0 + 2f64.sqrt()).ln()
}

/// Guaranteed product-state fraction of the relaxation value on bipartite
/// instances: `2c/(3π) ≈ 0.18703`.
pub fn bipartite_guarantee() -> f64 {
    2.0 * krivine_constant() / (3.0 * PI)
}

/// One weighted coupling of the interaction graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphEdge {
    /// First endpoint `(qubit, Pauli axis)`, axis in `1..=3`.
    pub u: (usize, u8),
    /// Second endpoint.
    pub v: (usize, u8),
    /// Effective coupling: term weight times its single Pauli coefficient.
    pub weight: f64,
}

/// Interaction graph of a traceless single-coupling instance: one vertex per
/// `(qubit, axis)` pair that appears in a term, one edge per term
/// (multi-edges allowed).
#[derive(Clone, Debug, Serialize)]
pub struct PauliGraph {
    /// Qubit count of the underlying instance.
    pub n: usize,
    /// Active vertices, sorted by `(qubit, axis)`.
    pub vertices: Vec<(usize, u8)>,
    /// Edges in instance term order.
    pub edges: Vec<GraphEdge>,
    /// Per active vertex (in `vertices` order): `false` = left side,
    /// `true` = right side. Present iff the graph is two-colorable.
    pub coloring: Option<Vec<bool>>,
    /// An odd cycle (as vertex labels) witnessing non-bipartiteness, when
    /// `coloring` is absent.
    pub odd_cycle: Option<Vec<(usize, u8)>>,
}

impl PauliGraph {
    /// The two sides of the bipartition as vertex labels.
    #[allow(clippy::type_complexity)]
    pub fn sides(&self) -> Option<(Vec<(usize, u8)>, Vec<(usize, u8)>)> {
        let coloring = self.coloring.as_ref()?;
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (vtx, &side) in self.vertices.iter().zip(coloring) {
            if side {
                right.push(*vtx);
            } else {
                left.push(*vtx);
            }
        }
        Some((left, right))
    }
}

/// Checks that a term is a pure weighted Pauli product and returns its
/// coupling `(k, l, weight·α_kl)`.
fn single_coupling(t: usize, term: &crate::pauli::TwoLocalTerm) -> Result<(u8, u8, f64)> {
    let a = &term.coeffs.alpha;
    if a[0][0].abs() > STRICT_QUAD_TOL {
        return Err(Error::InvalidInstance(format!(
            "term {t}: trace coefficient {:.3e} is nonzero",
            a[0][0]
        )));
    }
    if term.coeffs.one_local_max() > STRICT_QUAD_TOL {
        return Err(Error::InvalidInstance(format!(
            "term {t}: 1-local coefficients present (magnitude {:.3e})",
            term.coeffs.one_local_max()
        )));
    }
    let mut found = None;
    for k in 1..4 {
        for l in 1..4 {
            if a[k][l].abs() > STRICT_QUAD_TOL {
                if found.is_some() {
                    return Err(Error::InvalidInstance(format!(
                        "term {t}: more than one Pauli coupling"
                    )));
                }
                found = Some((k as u8, l as u8, term.weight * a[k][l]));
            }
        }
    }
    found.ok_or_else(|| Error::InvalidInstance(format!("term {t}: all couplings are zero")))
}

/// Builds the interaction graph and attempts a breadth-first two-coloring.
///
/// # Errors
/// `InvalidInstance` naming the first term that is not a single traceless
/// Pauli product.
pub fn pauli_graph(inst: &Instance) -> Result<PauliGraph> {
    inst.validate_basic()?;
    let mut edges = Vec::with_capacity(inst.terms.len());
    let mut vertex_set = std::collections::BTreeSet::new();
    for (t, term) in inst.terms.iter().enumerate() {
        let (k, l, weight) = single_coupling(t, term)?;
        let u = (term.i, k);
        let v = (term.j, l);
        vertex_set.insert(u);
        vertex_set.insert(v);
        edges.push(GraphEdge { u, v, weight });
    }
    let vertices: Vec<(usize, u8)> = vertex_set.into_iter().collect();
    let index: BTreeMap<(usize, u8), usize> =
        vertices.iter().enumerate().map(|(p, &v)| (v, p)).collect();

    let mut adjacency = vec![Vec::new(); vertices.len()];
    for e in &edges {
        let (pu, pv) = (index[&e.u], index[&e.v]);
        adjacency[pu].push(pv);
        adjacency[pv].push(pu);
    }

    // Breadth-first two-coloring; on a same-color adjacency, assemble the
    // odd cycle from the two root paths.
    let mut color: Vec<Option<bool>> = vec![None; vertices.len()];
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    let mut odd_cycle = None;
    'components: for start in 0..vertices.len() {
        if color[start].is_some() {
            continue;
        }
        color[start] = Some(false);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &w in &adjacency[u] {
                match color[w] {
                    None => {
                        color[w] = Some(!color[u].unwrap());
                        parent[w] = u;
                        queue.push_back(w);
                    }
                    Some(cw) if cw == color[u].unwrap() => {
                        odd_cycle = Some(extract_cycle(&parent, u, w, &vertices));
                        break 'components;
                    }
                    Some(_) => {}
                }
            }
        }
    }

    let coloring = if odd_cycle.is_none() {
        Some(color.into_iter().map(|c| c.unwrap_or(false)).collect())
    } else {
        None
    };
    Ok(PauliGraph {
        n: inst.n,
        vertices,
        edges,
        coloring,
        odd_cycle,
    })
}

/// Odd cycle through the tree paths of two same-color adjacent vertices.
fn extract_cycle(parent: &[usize], u: usize, w: usize, labels: &[(usize, u8)]) -> Vec<(usize, u8)> {
    let path_to_root = |mut x: usize| {
        let mut path = vec![x];
        while parent[x] != x {
            x = parent[x];
            path.push(x);
        }
        path
    };
    let pu = path_to_root(u);
    let pw = path_to_root(w);
    // Strip the common suffix (shared ancestry), keeping the meet point.
    let mut iu = pu.len();
    let mut iw = pw.len();
    while iu > 0 && iw > 0 && pu[iu - 1] == pw[iw - 1] {
        iu -= 1;
        iw -= 1;
    }
    let mut cycle: Vec<usize> = pu[..=iu.min(pu.len() - 1)].to_vec();
    for &x in pw[..iw].iter().rev() {
        cycle.push(x);
    }
    cycle.into_iter().map(|x| labels[x]).collect()
}

/// The classical coupling matrix: `3n×3n` symmetric `A` with
/// `A[(i,k),(j,l)] = A[(j,l),(i,k)] = w_e/2` summed over terms, so that
/// `zᵀAz` over `±1` vertex variables is the classical objective.
///
/// # Errors
/// Same conformity errors as [`pauli_graph`].
pub fn build_a(inst: &Instance) -> Result<DMatrix<f64>> {
    inst.validate_basic()?;
    let mut a = DMatrix::zeros(3 * inst.n, 3 * inst.n);
    for (t, term) in inst.terms.iter().enumerate() {
        let (k, l, weight) = single_coupling(t, term)?;
        let p = traceless_index(term.i, k as usize);
        let q = traceless_index(term.j, l as usize);
        a[(p, q)] += 0.5 * weight;
        a[(q, p)] += 0.5 * weight;
    }
    Ok(a)
}

/// The Krivine-transformed Gram matrix of a bipartite vertex set, with the
/// unit-row factor used for sign rounding.
#[derive(Clone, Debug)]
pub struct KrivineGram {
    /// Transformed matrix: `sinh(c·G)` within a side, `sin(c·G)` across.
    /// Unit diagonal (because `sinh(c) = 1`).
    pub k: DMatrix<f64>,
    /// The constant `ln(1+√2)`.
    pub c: f64,
    /// Row-vector realization of `k` (rows normalized to unit length).
    pub factor: DMatrix<f64>,
    /// Side of each vertex (`false` left, `true` right).
    pub side: Vec<bool>,
    /// Largest deviation of a raw factor row norm from 1.
    pub norm_deviation: f64,
}

/// First-order solvers return Gram blocks that are PSD only up to roughly
/// their stopping tolerance; eigenvalues above `-SOLVER_PSD_GUARD` are
/// treated as solver noise and clipped, anything lower is an error. Shared
/// with the moment pipeline's Gram extraction.
const SOLVER_PSD_GUARD: f64 = sdp::DEFAULT_CLIP_TOL;

/// Nearest-PSD cleanup of a solver Gram block: negative eigenvalues within
/// the guard are clipped to zero and the diagonal is rescaled back to
/// exactly 1, so downstream transforms see a genuine correlation matrix.
fn psd_unit_diagonal(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = g.nrows();
    let sym = (g + g.transpose()).scale(0.5);
    let mut eig = sym.symmetric_eigen();
    for lam in eig.eigenvalues.iter_mut() {
        if *lam < -SOLVER_PSD_GUARD {
            return Err(Error::NotPsd {
                eigenvalue: *lam,
                tol: SOLVER_PSD_GUARD,
            });
        }
        if *lam < 0.0 {
            *lam = 0.0;
        }
    }
    let clipped = eig.recompose();
    let diag: Vec<f64> = (0..dim).map(|p| clipped[(p, p)]).collect();
    if let Some(p) = diag.iter().position(|&d| d <= f64::EPSILON) {
        return Err(Error::Invariant(format!(
            "Gram diagonal entry {p} vanished after the PSD projection"
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |p, q| {
        clipped[(p, q)] / (diag[p] * diag[q]).sqrt()
    }))
}

/// Unit-row factor of a PSD matrix, clipping eigenvalues in `[-tol, 0)` to
/// zero and rejecting anything below `-tol`.
fn unit_row_factor(m: &DMatrix<f64>, tol: f64, what: &str) -> Result<(DMatrix<f64>, f64)> {
    let dim = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut kept = Vec::new();
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -tol {
            return Err(Error::NotPsd {
                eigenvalue: lam,
                tol,
            });
        }
        if lam > 0.0 {
            kept.push(idx);
        }
    }
    if kept.is_empty() {
        return Err(Error::Invariant(format!(
            "{what} matrix is numerically zero"
        )));
    }
    let mut factor = DMatrix::zeros(dim, kept.len());
    for (col, &idx) in kept.iter().enumerate() {
        let root = eig.eigenvalues[idx].sqrt();
        for row in 0..dim {
            factor[(row, col)] = root * eig.eigenvectors[(row, idx)];
        }
    }
    let mut deviation = 0.0f64;
    for row in 0..dim {
        let norm = factor.row(row).norm();
        if norm <= f64::EPSILON {
            return Err(Error::Invariant(format!(
                "{what} matrix has a zero row vector at index {row}"
            )));
        }
        deviation = deviation.max((norm - 1.0).abs());
        for col in 0..factor.ncols() {
            factor[(row, col)] /= norm;
        }
    }
    Ok((factor, deviation))
}

/// Builds the Krivine transform of a unit-diagonal PSD Gram matrix `g` under
/// the given side assignment.
///
/// The transform is realized by the odd-Taylor tensor embedding (left-side
/// vectors carry alternating signs), so `k` is itself a Gram matrix; its
/// positive semidefiniteness is verified numerically during factorization.
///
/// # Errors
/// `DimensionMismatch` for a non-square `g` or wrong `side` length;
/// `Domain` when the diagonal strays from 1 by more than 1e-6;
/// `NotPsd` when the transform has an eigenvalue below `-1e-6`.
pub fn krivine_gram(g: &DMatrix<f64>, side: &[bool]) -> Result<KrivineGram> {
    let dim = g.nrows();
    if g.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: g.ncols(),
            context: "Gram matrix must be square",
        });
    }
    if side.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: side.len(),
            context: "side assignment vs Gram dimension",
        });
    }
    for p in 0..dim {
        if (g[(p, p)] - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "Gram diagonal entry {p} is {:.8}, expected 1",
                g[(p, p)]
            )));
        }
    }
    let c = krivine_constant();
    let k = DMatrix::from_fn(dim, dim, |p, q| {
        let x = c * 0.5 * (g[(p, q)] + g[(q, p)]);
        if side[p] == side[q] {
            x.sinh()
        } else {
            x.sin()
        }
    });
    let (factor, norm_deviation) = unit_row_factor(&k, 1e-6, "Krivine")?;
    Ok(KrivineGram {
        k,
        c,
        factor,
        side: side.to_vec(),
        norm_deviation,
    })
}

/// Maps a solved Gram matrix to the unit rounding vectors a sign rounder
/// will hyperplane-round. Implementations must be deterministic.
pub trait SignRounder: Sync {
    /// Rounding vectors, one unit row per vertex.
    ///
    /// `side` carries the bipartition when one exists; rounders that require
    /// it must error otherwise.
    fn vectors(&self, g: &DMatrix<f64>, side: Option<&[bool]>) -> Result<DMatrix<f64>>;

    /// Short name for reports.
    fn name(&self) -> &'static str;
}

/// Plain hyperplane rounding of the relaxation vectors themselves (the
/// classical random-hyperplane scheme; no bipartiteness needed, no
/// correlation guarantee asserted).
#[derive(Clone, Copy, Debug, Default)]
pub struct HyperplaneRounder;

impl SignRounder for HyperplaneRounder {
    fn vectors(&self, g: &DMatrix<f64>, _side: Option<&[bool]>) -> Result<DMatrix<f64>> {
        Ok(unit_row_factor(g, 1e-6, "relaxation Gram")?.0)
    }

    fn name(&self) -> &'static str {
        "hyperplane"
    }
}

/// Krivine rounding: hyperplane-round the transformed vectors. Requires a
/// bipartition.
#[derive(Clone, Copy, Debug, Default)]
pub struct KrivineRounder;

impl SignRounder for KrivineRounder {
    fn vectors(&self, g: &DMatrix<f64>, side: Option<&[bool]>) -> Result<DMatrix<f64>> {
        let side =
            side.ok_or_else(|| Error::Domain("Krivine rounding requires a bipartition".into()))?;
        Ok(krivine_gram(g, side)?.factor)
    }

    fn name(&self) -> &'static str {
        "krivine"
    }
}

/// One sign draw: `z_v = sign(row_v · g)` with `g` Gaussian from stream
/// `(seed, sample)`.
fn draw_signs(vectors: &DMatrix<f64>, seed: u64, sample: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, SALT_KRIVINE, sample);
    let g = DVector::<f64>::from_fn(vectors.ncols(), |_, _| rng.sample(StandardNormal));
    (0..vectors.nrows())
        .map(|v| {
            if vectors.row(v).transpose().dot(&g) >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Sign assignments drawn from a Krivine Gram for one sample index.
pub fn krivine_signs(kg: &KrivineGram, seed: u64, sample: u64) -> Vec<f64> {
    draw_signs(&kg.factor, seed, sample)
}

/// Monte Carlo estimate (mean, stderr) of the product `z_u z_v` under
/// Krivine rounding. For a cross pair this converges to `(2c/π)·G_uv`.
pub fn sign_correlation(
    kg: &KrivineGram,
    u: usize,
    v: usize,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let nv = kg.factor.nrows();
    if u >= nv || v >= nv {
        return Err(Error::Domain(format!(
            "vertex pair ({u}, {v}) out of range for {nv} vertices"
        )));
    }
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    Ok(stats::mc_mean_stderr(samples, |s| {
        let z = krivine_signs(kg, seed, s);
        z[u] * z[v]
    }))
}

/// Summary of a classical sign-rounding run and its product-state reduction.
#[derive(Clone, Debug, Serialize)]
pub struct KrivineReport {
    /// Mean product-state energy (one third of `mean_objective`).
    pub mean_energy: f64,
    /// Standard error of `mean_energy`.
    pub stderr: f64,
    /// Mean classical objective `E[zᵀAz]`.
    pub mean_objective: f64,
    /// Relaxation value `⟨A, G⟩` reported by the solver.
    pub sdp_value: f64,
    /// Exact maximum eigenvalue, attached for small instances.
    pub lambda_max: Option<f64>,
    /// `mean_energy / sdp_value` (absent when the relaxation value is
    /// numerically zero).
    pub ratio_vs_sdp: Option<f64>,
    /// `mean_energy / lambda_max`.
    pub ratio_vs_exact: Option<f64>,
    /// The certified fraction `2c/(3π)` when the Krivine path was taken;
    /// absent for rounders without a guarantee.
    pub guarantee: Option<f64>,
    /// Which rounder produced the signs.
    pub rounder: String,
    /// Whether a bipartition was available.
    pub bipartite: bool,
    /// Number of active interaction-graph vertices.
    pub active_vertices: usize,
    /// Best single-sample product energy.
    pub best_energy: f64,
    /// Sample index attaining it (lowest on ties).
    pub best_sample_index: u64,
    /// Sample count.
    pub samples: u64,
    /// Stream seed.
    pub seed: u64,
    /// Solver convergence flag.
    pub converged: bool,
    /// Solver iterations.
    pub solver_iterations: usize,
    /// Worst solver residual.
    pub solver_residual: f64,
}

/// Knobs shared by the two pipelines.
#[derive(Clone, Copy, Debug)]
pub struct TracelessOptions {
    /// Solver stopping tolerance.
    pub tol: f64,
    /// Solver iteration cap.
    pub max_iter: usize,
    /// Attach the exact optimum when `n` is at most this.
    pub exact_threshold: usize,
}

impl Default for TracelessOptions {
    fn default() -> Self {
        Self {
            tol: sdp::DEFAULT_TOL,
            max_iter: sdp::DEFAULT_MAX_ITER,
            exact_threshold: 10,
        }
    }
}

/// Product state from one sign assignment: active vertices get `z_v/√3`,
/// inactive coordinates get independent `±1/√3` signs from the dedicated
/// stream, so every Bloch vector is exactly unit length.
fn signs_to_state(
    n: usize,
    vertices: &[(usize, u8)],
    signs: &[f64],
    seed: u64,
    sample: u64,
) -> Result<ProductState> {
    let inv = 1.0 / 3f64.sqrt();
    let mut thetas = vec![Vector3::zeros(); n];
    let mut active = vec![[false; 3]; n];
    for (vtx, &z) in vertices.iter().zip(signs) {
        thetas[vtx.0][vtx.1 as usize - 1] = z * inv;
        active[vtx.0][vtx.1 as usize - 1] = true;
    }
    let mut rng = rng::stream(seed, SALT_INACTIVE, sample);
    for i in 0..n {
        for k in 0..3 {
            let coin: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
            if !active[i][k] {
                thetas[i][k] = coin * inv;
            }
        }
    }
    ProductState::new(thetas)
}

/// Shared pipeline body: relaxation solve, sign rounding, 1/√3 reduction.
fn rounded_pipeline(
    inst: &Instance,
    rounder: &dyn SignRounder,
    samples: u64,
    seed: u64,
    opts: &TracelessOptions,
    require_bipartite: bool,
) -> Result<(ProductState, KrivineReport)> {
    if samples == 0 {
        return Err(Error::Domain("need at least one rounding sample".into()));
    }
    let graph = pauli_graph(inst)?;
    if require_bipartite && graph.coloring.is_none() {
        return Err(Error::NotBipartite {
            cycle: graph.odd_cycle.unwrap_or_default(),
        });
    }

    let lambda_max = if inst.n <= opts.exact_threshold {
        Some(exact::lambda_max(inst)?.lambda_max)
    } else {
        None
    };

    // No couplings: the rounded state is pure noise with zero energy.
    if graph.vertices.is_empty() {
        let state = signs_to_state(inst.n, &[], &[], seed, 0)?;
        let report = KrivineReport {
            mean_energy: 0.0,
            stderr: 0.0,
            mean_objective: 0.0,
            sdp_value: 0.0,
            lambda_max,
            ratio_vs_sdp: None,
            ratio_vs_exact: None,
            guarantee: None,
            rounder: rounder.name().to_string(),
            bipartite: true,
            active_vertices: 0,
            best_energy: 0.0,
            best_sample_index: 0,
            samples,
            seed,
            converged: true,
            solver_iterations: 0,
            solver_residual: 0.0,
        };
        return Ok((state, report));
    }

    let prog = sdp::build_unit_diagonal_relaxation(inst)?;
    let sol = sdp::solve(&prog, opts.tol, opts.max_iter)?;

    // Active-vertex Gram, PSD-projected and renormalized to an exactly unit
    // diagonal (the solver block is PSD only up to its tolerance).
    let idx: Vec<usize> = graph
        .vertices
        .iter()
        .map(|&(i, k)| traceless_index(i, k as usize))
        .collect();
    let nv = idx.len();
    let g_active = psd_unit_diagonal(&DMatrix::from_fn(nv, nv, |p, q| sol.m[(idx[p], idx[q])]))?;
    let side_owned: Vec<bool> = graph.coloring.clone().unwrap_or_default();
    let side = graph.coloring.as_ref().map(|_| side_owned.as_slice());
    let vectors = rounder.vectors(&g_active, side)?;

    // Active-restricted coupling matrix for the per-sample objective.
    let a = build_a(inst)?;
    let a_active = DMatrix::from_fn(nv, nv, |p, q| a[(idx[p], idx[q])]);
    let objective = |signs: &[f64]| -> f64 {
        let z = DVector::from_column_slice(signs);
        (z.transpose() * &a_active * z)[(0, 0)]
    };

    let (mean_objective, obj_stderr) =
        stats::mc_mean_stderr(samples, |s| objective(&draw_signs(&vectors, seed, s)));
    let best = (0..samples)
        .into_par_iter()
        .map(|s| (objective(&draw_signs(&vectors, seed, s)), s))
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |x, y| {
                if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                    y
                } else {
                    x
                }
            },
        );
    let best_signs = draw_signs(&vectors, seed, best.1);
    let state = signs_to_state(inst.n, &graph.vertices, &best_signs, seed, best.1)?;

    let mean_energy = mean_objective / 3.0;
    let report = KrivineReport {
        mean_energy,
        stderr: obj_stderr / 3.0,
        mean_objective,
        sdp_value: sol.objective,
        lambda_max,
        ratio_vs_sdp: (sol.objective.abs() >= DENOMINATOR_TOL).then(|| mean_energy / sol.objective),
        ratio_vs_exact: lambda_max
            .filter(|l| l.abs() >= DENOMINATOR_TOL)
            .map(|l| mean_energy / l),
        guarantee: (require_bipartite).then(bipartite_guarantee),
        rounder: rounder.name().to_string(),
        bipartite: graph.coloring.is_some(),
        active_vertices: nv,
        best_energy: best.0 / 3.0,
        best_sample_index: best.1,
        samples,
        seed,
        converged: sol.converged,
        solver_iterations: sol.iterations,
        solver_residual: sol.primal_residual.max(sol.dual_residual),
    };
    Ok((state, report))
}

/// Certified pipeline for bipartite instances: unit-diagonal relaxation →
/// Krivine rounding → `±1/√3` product state. The expected product energy is
/// at least `2c/(3π)` times the relaxation value, hence at least
/// `0.18703·λ_max`.
///
/// # Errors
/// `NotBipartite` with an odd-cycle witness when the interaction graph has
/// no two-coloring; conformity/solver errors otherwise.
pub fn bipartite_pipeline(
    inst: &Instance,
    samples: u64,
    seed: u64,
    opts: &TracelessOptions,
) -> Result<(ProductState, KrivineReport)> {
    rounded_pipeline(inst, &KrivineRounder, samples, seed, opts, true)
}

/// Uncertified pipeline for arbitrary traceless single-coupling instances:
/// the supplied rounder produces ±1 assignments from the relaxation Gram
/// matrix, and the product energy is exactly one third of the classical
/// objective. No approximation factor is asserted.
pub fn generic_traceless_pipeline(
    inst: &Instance,
    rounder: &dyn SignRounder,
    samples: u64,
    seed: u64,
    opts: &TracelessOptions,
) -> Result<(ProductState, KrivineReport)> {
    rounded_pipeline(inst, rounder, samples, seed, opts, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli;
    use approx::assert_abs_diff_eq;

    fn zz_edges(edges: &[(usize, usize)], n: usize) -> Instance {
        let weighted: Vec<(usize, usize, f64)> = edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        pauli::encode_zz(&weighted, n).unwrap()
    }

    #[test]
    fn single_term_graph_is_one_bipartite_edge() {
        let inst = zz_edges(&[(0, 1)], 2);
        let g = pauli_graph(&inst).unwrap();
        assert_eq!(g.vertices, vec![(0, 3), (1, 3)]);
        assert_eq!(g.edges.len(), 1);
        // encode_zz stores the antiferromagnetic sign in the coefficient.
        assert_abs_diff_eq!(g.edges[0].weight, -1.0, epsilon = 1e-15);
        let (left, right) = g.sides().expect("one edge is bipartite");
        assert_eq!(left.len() + right.len(), 2);
        assert!(g.odd_cycle.is_none());
    }

    #[test]
    fn triangle_yields_an_odd_cycle_witness() {
        let inst = zz_edges(&[(0, 1), (1, 2), (0, 2)], 3);
        let g = pauli_graph(&inst).unwrap();
        assert!(g.coloring.is_none());
        let cycle = g.odd_cycle.as_ref().expect("triangle is odd");
        assert_eq!(cycle.len() % 2, 1);
        assert!(cycle.len() >= 3);
        // The witness is a genuine cycle: consecutive labels (wrapping) are
        // connected by edges of the graph.
        let has_edge = |a: (usize, u8), b: (usize, u8)| {
            g.edges
                .iter()
                .any(|e| (e.u == a && e.v == b) || (e.u == b && e.v == a))
        };
        for w in 0..cycle.len() {
            let x = cycle[w];
            let y = cycle[(w + 1) % cycle.len()];
            assert!(has_edge(x, y), "cycle step {x:?} → {y:?} is not an edge");
        }
        // The certified pipeline refuses, naming the cycle.
        let err = bipartite_pipeline(&inst, 10, 1, &TracelessOptions::default()).unwrap_err();
        match err {
            Error::NotBipartite { cycle } => assert_eq!(cycle.len() % 2, 1),
            other => panic!("expected NotBipartite, got {other:?}"),
        }
    }

    #[test]
    fn complete_bipartite_graph_two_colors_with_three_per_side() {
        let edges: Vec<(usize, usize)> = (0..3).flat_map(|i| (3..6).map(move |j| (i, j))).collect();
        let inst = zz_edges(&edges, 6);
        let g = pauli_graph(&inst).unwrap();
        assert_eq!(g.vertices.len(), 6);
        assert_eq!(g.edges.len(), 9);
        let (left, right) = g.sides().unwrap();
        assert_eq!(left.len(), 3);
        assert_eq!(right.len(), 3);
        // Every edge crosses the bipartition.
        let coloring = g.coloring.as_ref().unwrap();
        let pos = |v: (usize, u8)| g.vertices.iter().position(|&x| x == v).unwrap();
        for e in &g.edges {
            assert_ne!(coloring[pos(e.u)], coloring[pos(e.v)]);
        }
    }

    #[test]
    fn coupling_matrix_matches_hand_construction() {
        // One term of weight w: two mirrored entries w_eff/2 with
        // w_eff = -w for the antiferromagnetic coupling.
        let inst = pauli::encode_zz(&[(0, 1, 2.0)], 2).unwrap();
        let a = build_a(&inst).unwrap();
        let p = traceless_index(0, 3);
        let q = traceless_index(1, 3);
        assert_abs_diff_eq!(a[(p, q)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(q, p)], -1.0, epsilon = 1e-15);
        assert_eq!(a.iter().filter(|&&x| x != 0.0).count(), 2);

        // Zero-term instance → zero matrix.
        let empty = Instance {
            n: 2,
            kind: pauli::InstanceKind::Traceless,
            terms: vec![],
        };
        assert_eq!(
            build_a(&empty)
                .unwrap()
                .iter()
                .filter(|&&x| x != 0.0)
                .count(),
            0
        );

        // Ferromagnetic ZZ chain of 3 edges: brute force over the active
        // ±1 variables gives 3.
        let mut chain = zz_edges(&[(0, 1), (1, 2), (2, 3)], 4);
        for term in &mut chain.terms {
            term.coeffs.alpha[3][3] = 1.0;
        }
        let a = build_a(&chain).unwrap();
        let active: Vec<usize> = (0..4).map(|i| traceless_index(i, 3)).collect();
        let mut best = f64::NEG_INFINITY;
        for mask in 0..16u32 {
            let mut z = DVector::zeros(12);
            for (b, &p) in active.iter().enumerate() {
                z[p] = if mask >> b & 1 == 1 { 1.0 } else { -1.0 };
            }
            best = best.max((z.transpose() * &a * z)[(0, 0)]);
        }
        assert_abs_diff_eq!(best, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn nonconforming_terms_are_named() {
        // A Heisenberg term has three couplings.
        let inst = pauli::encode_heisenberg(&[(0, 1, 1.0)], 2).unwrap();
        let err = pauli_graph(&inst).unwrap_err();
        assert!(matches!(err, Error::InvalidInstance(ref m) if m.contains("term 0")));
        let err = build_a(&inst).unwrap_err();
        assert!(matches!(err, Error::InvalidInstance(_)));
    }

    #[test]
    fn krivine_transform_of_identity_is_identity() {
        let g = DMatrix::identity(4, 4);
        let kg = krivine_gram(&g, &[false, false, true, true]).unwrap();
        // sinh(c) = 1 because c = arcsinh(1); off-diagonal sin(0) = sinh(0) = 0.
        for p in 0..4 {
            for q in 0..4 {
                let expect = if p == q { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(kg.k[(p, q)], expect, epsilon = 1e-15);
            }
        }
        assert!(kg.norm_deviation <= 1e-12);
        // Orthogonal rounding vectors ⇒ uncorrelated signs.
        let (corr, se) = sign_correlation(&kg, 0, 2, 40_000, 3).unwrap();
        assert!(corr.abs() <= 3.0 * se, "corr {corr} stderr {se}");
    }

    #[test]
    fn perfect_cross_correlation_becomes_sin_c() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let kg = krivine_gram(&g, &[false, true]).unwrap();
        let c = krivine_constant();
        assert_abs_diff_eq!(kg.k[(0, 1)], c.sin(), epsilon = 1e-15);
        assert!((0.7..0.8).contains(&kg.k[(0, 1)]));
        // The 2×2 transform is PSD: diag 1, off-diagonal sin(c) < 1.
        assert!(kg.factor.nrows() == 2);
        // Cross correlation realizes (2c/π)·G = 2c/π ≈ 0.561.
        let (corr, se) = sign_correlation(&kg, 0, 1, 60_000, 5).unwrap();
        let expect = 2.0 * c / PI;
        assert!(
            (corr - expect).abs() <= 3.0 * se,
            "corr {corr} vs {expect} (stderr {se})"
        );
    }

    #[test]
    fn random_bipartite_grams_stay_psd_and_linear_in_correlation() {
        let mut worst = f64::INFINITY;
        for trial in 0..100u64 {
            let mut rng = rng::stream(trial, 0x9a11, 0);
            let nv = 6;
            let dim = 4;
            let mut v = DMatrix::<f64>::zeros(nv, dim);
            for r in 0..nv {
                for c in 0..dim {
                    v[(r, c)] = rng.sample(StandardNormal);
                }
                let norm = v.row(r).norm();
                for c in 0..dim {
                    v[(r, c)] /= norm;
                }
            }
            let g = &v * v.transpose();
            let side: Vec<bool> = (0..nv).map(|x| x >= nv / 2).collect();
            let kg = krivine_gram(&g, &side).unwrap();
            let min_eig =
                kg.k.clone()
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
            worst = worst.min(min_eig);
        }
        assert!(worst >= -1e-9, "worst Krivine eigenvalue {worst}");

        // Linearity spot check on one random Gram: a cross pair's empirical
        // correlation tracks (2c/π)·G_uv.
        let mut rng = rng::stream(7, 0x9a12, 0);
        let mut v = DMatrix::<f64>::zeros(4, 3);
        for r in 0..4 {
            for c in 0..3 {
                v[(r, c)] = rng.sample(StandardNormal);
            }
            let norm = v.row(r).norm();
            for c in 0..3 {
                v[(r, c)] /= norm;
            }
        }
        let g = &v * v.transpose();
        let kg = krivine_gram(&g, &[false, false, true, true]).unwrap();
        let (corr, se) = sign_correlation(&kg, 0, 3, 80_000, 11).unwrap();
        let expect = 2.0 * krivine_constant() / PI * g[(0, 3)];
        assert!(
            (corr - expect).abs() <= 3.0 * se,
            "corr {corr} vs {expect} (stderr {se})"
        );
    }

    #[test]
    fn gram_argument_errors() {
        let g = DMatrix::identity(3, 3);
        assert!(matches!(
            krivine_gram(&g, &[false, true]),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 1.0]));
        assert!(matches!(
            krivine_gram(&bad, &[false, true, true]),
            Err(Error::Domain(_))
        ));
        // An indefinite "Gram" is rejected during factorization: sinh
        // amplifies the same-side entry 2 to sinh(2c) ≈ 2.84.
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            krivine_gram(&indef, &[false, false]),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn single_edge_pipeline_meets_the_certified_fraction() {
        let inst = zz_edges(&[(0, 1)], 2);
        let (state, report) =
            bipartite_pipeline(&inst, 40_000, 13, &TracelessOptions::default()).unwrap();
        assert!(report.converged);
        assert!(report.bipartite);
        assert_eq!(report.active_vertices, 2);
        // Relaxation value and exact optimum are both 1.
        assert_abs_diff_eq!(report.sdp_value, 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(report.lambda_max.unwrap(), 1.0, epsilon = 1e-9);
        // Expected correlation is -(2c/π)·1, so the mean product energy sits
        // at (2c/3π)·SDP: the guarantee is met with equality here.
        let guarantee = report.guarantee.unwrap();
        assert_abs_diff_eq!(
            guarantee,
            2.0 * krivine_constant() / (3.0 * PI),
            epsilon = 1e-15
        );
        assert!(
            report.mean_energy >= guarantee * report.lambda_max.unwrap() - 3.0 * report.stderr,
            "mean {} vs guarantee {}",
            report.mean_energy,
            guarantee
        );
        assert!(
            (report.mean_energy - guarantee).abs() <= 4.0 * report.stderr,
            "single-edge mean {} should sit at the guarantee {guarantee}",
            report.mean_energy
        );
        // Best sample hits the classical optimum 1, i.e. energy 1/3.
        assert_abs_diff_eq!(report.best_energy, 1.0 / 3.0, epsilon = 1e-12);
        // The returned state is pure with ±1/√3 coordinates.
        for t in &state.thetas {
            assert_abs_diff_eq!(t.norm(), 1.0, epsilon = 1e-12);
            for k in 0..3 {
                assert_abs_diff_eq!(t[k].abs(), 1.0 / 3f64.sqrt(), epsilon = 1e-12);
            }
        }
        // Its energy matches the classical identity: best_energy as a real
        // product state.
        let e = exact::product_energy(&inst, &state).unwrap();
        assert_abs_diff_eq!(e, report.best_energy, epsilon = 1e-12);
    }

    #[test]
    fn empty_instance_rounds_to_zero_energy() {
        let inst = Instance {
            n: 3,
            kind: pauli::InstanceKind::Traceless,
            terms: vec![],
        };
        let (state, report) =
            bipartite_pipeline(&inst, 100, 2, &TracelessOptions::default()).unwrap();
        assert_eq!(report.mean_energy, 0.0);
        assert_eq!(report.active_vertices, 0);
        assert_abs_diff_eq!(
            exact::product_energy(&inst, &state).unwrap(),
            0.0,
            epsilon = 0.0
        );
        for t in &state.thetas {
            assert_abs_diff_eq!(t.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn generic_pipeline_scales_classical_objective_by_one_third() {
        // Ferromagnetic Ising ring on 6 qubits.
        let mut inst = zz_edges(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)], 6);
        for term in &mut inst.terms {
            term.coeffs.alpha[3][3] = 1.0;
        }
        let (state, report) = generic_traceless_pipeline(
            &inst,
            &HyperplaneRounder,
            2_000,
            17,
            &TracelessOptions::default(),
        )
        .unwrap();
        assert!(report.guarantee.is_none());
        assert_eq!(report.rounder, "hyperplane");
        // Even cycle: still bipartite, though this path doesn't require it.
        assert!(report.bipartite);
        assert_abs_diff_eq!(
            report.mean_energy,
            report.mean_objective / 3.0,
            epsilon = 1e-15
        );
        // The best returned state's true energy equals one third of the
        // classical objective of its sign pattern.
        let e = exact::product_energy(&inst, &state).unwrap();
        assert_abs_diff_eq!(e, report.best_energy, epsilon = 1e-12);
        // The ring's classical optimum is 6; hyperplane rounding of the
        // rank-deficient optimum recovers it often, so the best of 2000
        // samples should find it.
        assert_abs_diff_eq!(report.best_energy, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn krivine_and_bipartite_paths_coincide() {
        let inst = zz_edges(&[(0, 2), (0, 3), (1, 2), (1, 3)], 4);
        let opts = TracelessOptions::default();
        let (_, via_bipartite) = bipartite_pipeline(&inst, 5_000, 23, &opts).unwrap();
        let (_, via_generic) =
            generic_traceless_pipeline(&inst, &KrivineRounder, 5_000, 23, &opts).unwrap();
        assert_eq!(
            via_bipartite.mean_energy.to_bits(),
            via_generic.mean_energy.to_bits()
        );
        assert_eq!(
            via_bipartite.best_sample_index,
            via_generic.best_sample_index
        );
        // Only the certification flag differs.
        assert!(via_bipartite.guarantee.is_some());
        assert!(via_generic.guarantee.is_none());
    }

    #[test]
    fn pipelines_are_seed_deterministic() {
        let inst = zz_edges(&[(0, 2), (0, 3), (1, 2), (1, 3)], 4);
        let opts = TracelessOptions::default();
        let (sa, ra) = bipartite_pipeline(&inst, 3_000, 31, &opts).unwrap();
        let (sb, rb) = bipartite_pipeline(&inst, 3_000, 31, &opts).unwrap();
        assert_eq!(ra.mean_energy.to_bits(), rb.mean_energy.to_bits());
        assert_eq!(ra.best_sample_index, rb.best_sample_index);
        for (x, y) in sa.thetas.iter().zip(&sb.thetas) {
            assert_eq!(x, y);
        }
        let (_, rc) = bipartite_pipeline(&inst, 3_000, 32, &opts).unwrap();
        assert_ne!(ra.mean_energy.to_bits(), rc.mean_energy.to_bits());
    }
}
