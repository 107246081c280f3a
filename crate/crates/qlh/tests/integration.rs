//! Cross-module integration: encodings feed the exact oracle, the
//! relaxations, and both rounding pipelines, and the outputs have to agree
//! with hand-computable physics.

use qlh::pauli;
use qlh::{exact, grothendieck, rounding, sdp};

/// Frustrated Heisenberg triangle: the top of the spectrum is the total-spin
/// 1/2 sector at 3/2, product states top out at 9/8 (pairwise angles 120°),
/// and the relaxation sits above the spectrum.
#[test]
fn heisenberg_triangle_sandwich() {
    let inst = pauli::encode_heisenberg(&[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], 3).unwrap();

    let lambda = exact::lambda_max(&inst).unwrap().lambda_max;
    assert!((lambda - 1.5).abs() <= 1e-9, "triangle lambda_max {lambda}");

    let (state, best) = exact::best_product(&inst, 48, 9).unwrap();
    assert!((best - 1.125).abs() <= 1e-6, "best product energy {best}");
    assert!((exact::product_energy(&inst, &state).unwrap() - best).abs() <= 1e-12);
    // The maximizer spreads the three Bloch vectors at mutual angle 120°.
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        let dot = state.thetas[a].dot(&state.thetas[b]);
        assert!((dot + 0.5).abs() <= 1e-5, "pair ({a},{b}) cosine {dot}");
    }

    let prog = sdp::build_moment_relaxation(&inst).unwrap();
    let sol = sdp::solve(&prog, sdp::DEFAULT_TOL, sdp::DEFAULT_MAX_ITER).unwrap();
    assert!(sol.converged);
    assert!(
        sol.objective >= lambda - 1e-5,
        "relaxation {} below lambda_max {lambda}",
        sol.objective
    );
    assert!(best <= lambda + 1e-9 && lambda <= sol.objective + 1e-5);
}

/// Two complementary clauses are simultaneously satisfiable, so the encoded
/// spectrum tops out at exactly 2.
#[test]
fn complementary_clause_pair_is_fully_satisfiable() {
    let clauses = [((0, false), (1, false)), ((0, true), (1, true))];
    let inst = pauli::encode_max2sat(&clauses, 2).unwrap();
    let lambda = exact::lambda_max(&inst).unwrap().lambda_max;
    assert!(
        (lambda - 2.0).abs() <= 1e-9,
        "clause pair lambda_max {lambda}"
    );
}

/// Singlet edge, full pipeline: relaxation value 1, exact value 1, and the
/// rounded product states recover half of it.
#[test]
fn singlet_edge_pipeline_halves_the_relaxation() {
    let inst = pauli::encode_heisenberg(&[(0, 1, 1.0)], 2).unwrap();
    let report =
        rounding::ratio_pipeline(&inst, 100_000, 5, &rounding::PipelineOptions::default()).unwrap();
    assert!(report.converged);
    assert!((report.sdp_value - 1.0).abs() <= 1e-4);
    assert!((report.lambda_max.unwrap() - 1.0).abs() <= 1e-9);
    for ratio in [report.ratio_vs_sdp.unwrap(), report.ratio_vs_exact.unwrap()] {
        assert!((0.49..=0.51).contains(&ratio), "singlet ratio {ratio}");
    }
    // With one edge the worst per-edge ratio is the global one.
    let worst = report.worst_edge_ratio().unwrap();
    assert!((worst - report.ratio_vs_sdp.unwrap()).abs() <= 1e-9);
    // Product states cannot beat the spectrum.
    assert!(report.best_energy <= report.lambda_max.unwrap() + 1e-9);
}

/// Random bipartite Ising instance through the Krivine pipeline: relaxation
/// above the spectrum, mean above the certified fraction, best sample
/// between the mean and the spectrum.
#[test]
fn bipartite_ising_krivine_sandwich() {
    let inst = pauli::random_bipartite_zz(6, 8, 4).unwrap();
    // Default solver tolerance leaves ~5e-5 of objective error on this
    // instance; tighten it so the sandwich check stays meaningful.
    let opts = grothendieck::TracelessOptions {
        tol: 1e-8,
        ..grothendieck::TracelessOptions::default()
    };
    let (state, report) = grothendieck::bipartite_pipeline(&inst, 20_000, 8, &opts).unwrap();
    assert!(report.converged);
    assert!(report.bipartite);

    let lambda = report.lambda_max.unwrap();
    assert!(
        report.sdp_value >= lambda - 1e-5,
        "unit-diagonal relaxation {} below lambda_max {lambda}",
        report.sdp_value
    );
    let floor = report.guarantee.unwrap() * lambda - 3.0 * report.stderr;
    assert!(
        report.mean_energy >= floor,
        "mean {} below certified floor {floor}",
        report.mean_energy
    );
    assert!(report.best_energy >= report.mean_energy);
    assert!(report.best_energy <= lambda + 1e-9);
    assert!((exact::product_energy(&inst, &state).unwrap() - report.best_energy).abs() <= 1e-12);
}
