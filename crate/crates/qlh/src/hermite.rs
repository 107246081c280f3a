//! Hermite/Gaussian analysis of the rounding ratio.
//!
//! The expected energy of a hyperplane-rounded edge reduces to Gaussian
//! expectations of the form `E[(p z₁z₁' + q z₂z₂' + r z₃z₃')/(‖z‖‖z'‖)]`
//! (quadratic part) and `E[t·x₁·sign(s)/‖x‖]` (1-local part), where the six
//! correlations `(a,b,c)` and the coefficients `(p,q,r,t,d)` come from a
//! singular-value *standard form* of the edge's moment data. This module
//! evaluates those expectations three ways — a truncated orthonormal-series
//! expansion with a rigorous remainder bracket, a hypergeometric series for
//! the 1-local term, and seeded Monte Carlo — and minimizes the resulting
//! ratio over the moment polytope to certify worst-case approximation
//! constants:
//!
//! * [`f_coeff`]/[`sign_coeff`]/[`gaussian_moment`] — closed-form expansion
//!   coefficients of `z₁/‖z‖` and `sign(z)` in normalized Hermite
//!   polynomials, plus the Gaussian moments `E[Π z_t^{b_t}/‖z‖]` they are
//!   built from.
//! * [`quad_expectation_series`] — truncated series with a bracket that
//!   provably contains the exact value; [`quad_expectation_mc`] — the Monte
//!   Carlo cross-check.
//! * [`linear_expectation`] — the 1-local term `(4d/3π)·₂F₁(½,½;5/2;d²)`.
//! * [`standard_form_quadratic`]/[`standard_form_linear`] — reduction of raw
//!   moment blocks to the canonical parameters.
//! * [`certify_bounds_quadratic`] — grid minimization of the certified ratio
//!   bracket over the moment simplex for strictly quadratic rank-k
//!   projectors.
//! * [`bound_general`] — exact vertex minimization of the coarse rational
//!   program that bounds the ratio when 1-local terms are present.

use crate::pauli::{Polytope3, TwoMoment};
use crate::rng::{self, SALT_GAUSSIAN};
use crate::sdp::GramVectors;
use crate::stats;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;
use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

/// Points where the ratio denominator is smaller than this are reported as
/// skipped rather than evaluated (the ratio is 0/0 there in exact
/// arithmetic).
pub const DENOMINATOR_TOL: f64 = 1e-9;

/// Slack allowed on polytope-membership checks of standard forms.
pub const POLYTOPE_TOL: f64 = 1e-7;

/// The hypergeometric series for the 1-local term stops once a term falls
/// below this threshold.
pub const SERIES_TERM_TOL: f64 = 1e-15;

/// Hard cap on hypergeometric series terms (defensive; the term ratio is
/// bounded away from 1 for every admissible argument).
pub const SERIES_MAX_TERMS: usize = 100_000;

/// Series truncation degree used for the point estimates ("observed" values)
/// in [`certify_bounds_quadratic`]. At this degree the neglected tail moves
/// the ratio by less than ~1e-3 anywhere on the simplex.
pub const OBSERVED_SERIES_DEGREE: usize = 61;

/// `n!` as a float. Exact for `n ≤ 22`, correctly rounded well past the
/// degrees used here (`n ≤ 170` before overflow).
fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// Double factorial `n!!` with the empty-product convention
/// `0!! = (-1)!! = 1` (and 1 for all `n ≤ 0`, which only arises through
/// those two cases in the formulas below).
fn double_factorial(n: i64) -> f64 {
    let mut r = 1.0;
    let mut m = n;
    while m > 1 {
        r *= m as f64;
        m -= 2;
    }
    r
}

/// Normalized Hermite polynomial `h_n(z)` (orthonormal for the standard
/// Gaussian weight: `E[h_m(z) h_n(z)] = δ_{mn}` for `z ~ N(0,1)`).
///
/// Evaluated by the stable three-term recurrence
/// `h_{n+1} = (z·h_n − √n·h_{n-1})/√(n+1)`; the unit tests pin it to the
/// explicit alternating-sum formula and to quadrature orthonormality.
pub fn hermite_poly(n: usize, z: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = z;
    for m in 1..n {
        let next = (z * cur - (m as f64).sqrt() * prev) / ((m + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Coefficient of `sign(z)` against `h_i(z)`: zero for even `i`, and for
/// `i = 2q+1`
/// `ĝ_i = √(i!)·(−1)^q / (2^{q−1/2} √π q! (1+2q))`.
pub fn sign_coeff(i: usize) -> f64 {
    if i % 2 == 0 {
        return 0.0;
    }
    let q = (i - 1) / 2;
    let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
    let pow = 2f64.powi(q as i32) / SQRT_2; // 2^{q - 1/2}
    factorial(i).sqrt() * sign / (pow * PI.sqrt() * factorial(q) * (1 + 2 * q) as f64)
}

/// Coefficient of `z₁/‖z‖` (three-dimensional standard Gaussian `z`) against
/// `h_i(z₁) h_j(z₂) h_k(z₃)`.
///
/// Zero unless `i` is odd and `j`, `k` are even; otherwise, with
/// `p = (i+j+k−1)/2`,
/// `f̂_{i,jk} = 2√(2/π)·√(i!j!k!)·(−1)^p / ((i−1)!!·j!!·k!!·(1+2p)(3+2p))`.
/// Symmetric under `j ↔ k`.
pub fn f_coeff(i: usize, j: usize, k: usize) -> f64 {
    if i % 2 == 0 || j % 2 == 1 || k % 2 == 1 {
        return 0.0;
    }
    let p = (i + j + k - 1) / 2;
    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
    let num = 2.0 * FRAC_2_PI.sqrt() * (factorial(i) * factorial(j) * factorial(k)).sqrt() * sign;
    let den = double_factorial(i as i64 - 1)
        * double_factorial(j as i64)
        * double_factorial(k as i64)
        * ((1 + 2 * p) * (3 + 2 * p)) as f64;
    num / den
}

/// Coefficient of `z₁/‖z‖` in `r` dimensions (`r` odd) against
/// `Π_t h_{μ_t}(z_t)`.
///
/// Zero unless `μ₁` is odd and every other entry is even; otherwise, with
/// `p = (Σμ − 1)/2`,
/// `√(2/π)·√(Πμ_t!)·(−1)^p/((μ₁−1)!!·μ₂!!···μ_r!!) ·
/// (r−1)!!/((2p+r)(2p+r−2)···(2p+1))`.
/// Reduces to [`f_coeff`] at `r = 3` and to [`sign_coeff`] at `r = 1`.
///
/// # Errors
/// `Domain` for even `r` (the closed form holds for odd dimension only);
/// `DimensionMismatch` when `mu.len() != r`.
pub fn f_coeff_general(mu: &[usize], r: usize) -> Result<f64> {
    if r % 2 == 0 {
        return Err(Error::Domain(format!(
            "normalized-direction Hermite coefficients are only available in odd dimension, got r = {r}"
        )));
    }
    if mu.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: mu.len(),
            context: "Hermite multi-index length",
        });
    }
    if mu[0] % 2 == 0 || mu[1..].iter().any(|&m| m % 2 == 1) {
        return Ok(0.0);
    }
    let total: usize = mu.iter().sum();
    let p = (total - 1) / 2;
    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
    let mut value = FRAC_2_PI.sqrt() * sign;
    value *= mu.iter().map(|&m| factorial(m)).product::<f64>().sqrt();
    value /= double_factorial(mu[0] as i64 - 1);
    for &m in &mu[1..] {
        value /= double_factorial(m as i64);
    }
    value *= double_factorial(r as i64 - 1);
    let mut x = (2 * p + r) as i64;
    while x >= (2 * p + 1) as i64 {
        value /= x as f64;
        x -= 2;
    }
    Ok(value)
}

/// Gaussian moment `E[Π_t z_t^{b_t} / ‖z‖]` for `z ~ N(0, 𝕀_r)`.
///
/// Zero when any exponent is odd. For even exponents the value is
/// `c_r · (Σb + r − 3)!! · Π(b_t − 1)!! / (Σb + r − 2)!!` with
/// `c_r = √(2/π)` for odd `r` and `√(π/2)` for even `r`.
///
/// Missing trailing exponents are treated as zero, so `b.len() ≤ r`.
///
/// # Errors
/// `Domain` when `r = 0`, or for the single divergent case `r = 1, Σb = 0`
/// (`E[1/|z|]` does not exist); `DimensionMismatch` when `b.len() > r`.
pub fn gaussian_moment(b: &[usize], r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::Domain(
            "gaussian moment needs dimension r ≥ 1".into(),
        ));
    }
    if b.len() > r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: b.len(),
            context: "more exponents than Gaussian coordinates",
        });
    }
    if b.iter().any(|&x| x % 2 == 1) {
        return Ok(0.0);
    }
    let total: usize = b.iter().sum();
    if total + r < 2 {
        return Err(Error::Domain(
            "E[1/|z|] diverges in one dimension (r = 1 with all exponents zero)".into(),
        ));
    }
    let c = if r % 2 == 1 {
        FRAC_2_PI.sqrt()
    } else {
        (PI / 2.0).sqrt()
    };
    let mut value = c * double_factorial(total as i64 + r as i64 - 3);
    for &x in b {
        value *= double_factorial(x as i64 - 1);
    }
    Ok(value / double_factorial(total as i64 + r as i64 - 2))
}

/// Fully symmetrized monomial family: all assignments of the exponents
/// `(i, j, k)` to the three variables with `i` on any variable and `{j,k}`
/// on the remaining two (6 terms, or 3 when `j = k`).
///
/// The exponent pair `(j, k)` is unordered; arguments are canonicalized.
pub fn p_poly(i: usize, j: usize, k: usize, a: f64, b: f64, c: f64) -> f64 {
    u_poly(i, j, k, a, b, c) + u_poly(i, j, k, b, a, c) + u_poly(i, j, k, c, a, b)
}

/// Single-axis slice of [`p_poly`]: the first variable carries exponent `i`
/// and the other two carry `{j, k}` in both orders (2 terms, or 1 when
/// `j = k`).
pub fn u_poly(i: usize, j: usize, k: usize, a: f64, b: f64, c: f64) -> f64 {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    if j == k {
        a.powi(i as i32) * b.powi(j as i32) * c.powi(j as i32)
    } else {
        a.powi(i as i32)
            * (b.powi(j as i32) * c.powi(k as i32) + b.powi(k as i32) * c.powi(j as i32))
    }
}

/// A finite set of series indices `(i, j, k)` (with `j ≤ k` canonical form)
/// used to truncate the quadratic-term expansion, together with the spectral
/// mass it captures.
#[derive(Clone, Debug)]
pub struct TruncationSet {
    /// Canonical indices paired with their squared coefficients.
    entries: Vec<(usize, usize, usize, f64)>,
    /// Captured mass `Σ 2^{1−δ_{jk}} f̂²_{i,jk}` (the full series carries
    /// total mass 1/3 per axis).
    mass: f64,
}

impl TruncationSet {
    /// Builds a set from explicit indices. Each `(j, k)` pair is
    /// canonicalized to `j ≤ k`.
    ///
    /// # Errors
    /// `Domain` if an index has zero coefficient by parity (`i` even or
    /// `j`/`k` odd — almost certainly a caller bug), or if two indices
    /// coincide after canonicalization (the captured mass would be double
    /// counted).
    pub fn explicit(indices: &[(usize, usize, usize)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut canonical = Vec::with_capacity(indices.len());
        for &(i, j, k) in indices {
            let (j, k) = if j <= k { (j, k) } else { (k, j) };
            if i % 2 == 0 || j % 2 == 1 {
                return Err(Error::Domain(format!(
                    "series index ({i},{j},{k}) has zero coefficient by parity"
                )));
            }
            if !seen.insert((i, j, k)) {
                return Err(Error::Domain(format!(
                    "duplicate series index ({i},{j},{k}) after canonicalization"
                )));
            }
            canonical.push((i, j, k));
        }
        Ok(Self::from_canonical(canonical))
    }

    /// All contributing indices with total degree `i + j + k ≤ max_degree`.
    pub fn up_to_degree(max_degree: usize) -> Self {
        let mut canonical = Vec::new();
        for i in (1..=max_degree).step_by(2) {
            for j in (0..=max_degree.saturating_sub(i)).step_by(2) {
                for k in (j..=max_degree.saturating_sub(i + j)).step_by(2) {
                    canonical.push((i, j, k));
                }
            }
        }
        Self::from_canonical(canonical)
    }

    /// The default three-term set `{(1,0,0), (1,0,2), (3,0,0)}` used for the
    /// certified brackets.
    pub fn q3() -> Self {
        Self::explicit(&[(1, 0, 0), (1, 0, 2), (3, 0, 0)]).expect("static index set is valid")
    }

    fn from_canonical(canonical: Vec<(usize, usize, usize)>) -> Self {
        let mut entries = Vec::with_capacity(canonical.len());
        let mut mass = 0.0;
        for (i, j, k) in canonical {
            let fsq = f_coeff(i, j, k).powi(2);
            let weight = if j == k { 1.0 } else { 2.0 };
            mass += weight * fsq;
            entries.push((i, j, k, fsq));
        }
        Self { entries, mass }
    }

    /// Canonical indices in the set.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.entries.iter().map(|&(i, j, k, _)| (i, j, k))
    }

    /// Captured per-axis spectral mass `Σ 2^{1−δ_{jk}} f̂²` (at most 1/3).
    pub fn captured_mass(&self) -> f64 {
        self.mass
    }

    /// Number of indices.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Whether the set is empty (an empty set gives a pure remainder
    /// bracket centered at 0).
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest single exponent appearing in the set.
    fn max_exponent(&self) -> usize {
        self.entries
            .iter()
            .map(|&(i, _, k, _)| i.max(k))
            .max()
            .unwrap_or(0)
    }
}

/// A closed interval guaranteed to contain an exact quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bracket {
    /// Lower end.
    pub lower: f64,
    /// Upper end.
    pub upper: f64,
}

impl Bracket {
    /// Builds a bracket from a center and a (nonnegative) half width.
    pub fn from_center(center: f64, half_width: f64) -> Self {
        let hw = half_width.abs();
        Self {
            lower: center - hw,
            upper: center + hw,
        }
    }

    /// Midpoint.
    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    /// Half the width.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    /// Whether `x` lies inside (inclusive).
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Whether two brackets overlap (inclusive).
    pub fn intersects(&self, other: &Bracket) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

/// Power table `x^0..=x^max` for the series evaluation.
fn powers(x: f64, max: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(max + 1);
    let mut cur = 1.0;
    for _ in 0..=max {
        t.push(cur);
        cur *= x;
    }
    t
}

/// Series center `Σ f̂²·(p·u(i,jk; a,b,c) + q·u(i,jk; b,a,c) + r·u(i,jk; c,a,b))`.
fn series_center(a: f64, b: f64, c: f64, p: f64, q: f64, r: f64, set: &TruncationSet) -> f64 {
    let maxe = set.max_exponent();
    let pa = powers(a, maxe);
    let pb = powers(b, maxe);
    let pc = powers(c, maxe);
    let mut center = 0.0;
    for &(i, j, k, fsq) in &set.entries {
        let (ta, tb, tc) = if j == k {
            (
                pa[i] * pb[j] * pc[j],
                pb[i] * pa[j] * pc[j],
                pc[i] * pa[j] * pb[j],
            )
        } else {
            (
                pa[i] * (pb[j] * pc[k] + pb[k] * pc[j]),
                pb[i] * (pa[j] * pc[k] + pa[k] * pc[j]),
                pc[i] * (pa[j] * pb[k] + pa[k] * pb[j]),
            )
        };
        center += fsq * (p * ta + q * tb + r * tc);
    }
    center
}

/// Truncated-series bracket for the quadratic Gaussian expectation
/// `E[(p z₁z₁' + q z₂z₂' + r z₃z₃')/(‖z‖‖z'‖)]` with per-coordinate
/// correlations `E[z_t z_t'] = (a,b,c)`.
///
/// The center sums the captured indices; the remainder of each single-axis
/// series has total mass `1/3 − captured`, every neglected term is bounded
/// by that mass times the axis coefficient, so the bracket half width is
/// `(|p|+|q|+|r|)·(1/3 − captured_mass)`. The exact expectation always lies
/// inside the bracket.
pub fn quad_expectation_series(
    a: f64,
    b: f64,
    c: f64,
    p: f64,
    q: f64,
    r: f64,
    set: &TruncationSet,
) -> Bracket {
    let center = series_center(a, b, c, p, q, r, set);
    let tail = (1.0 / 3.0 - set.captured_mass()).max(0.0);
    Bracket::from_center(center, (p.abs() + q.abs() + r.abs()) * tail)
}

/// Monte Carlo estimate of the quadratic Gaussian expectation (mean and
/// standard error).
///
/// Each sample draws independent `z, w ~ N(0, 𝕀₃)` and sets
/// `z'_t = d_t z_t + √(1−d_t²) w_t` with `d = (a,b,c)`, which realizes the
/// joint covariance exactly. Samples are indexed, so results are
/// bit-identical for every thread count.
///
/// # Errors
/// `Domain` if a correlation leaves `[−1, 1]`, is not finite, or
/// `samples = 0`.
#[allow(clippy::too_many_arguments)] // mirrors the series signature
pub fn quad_expectation_mc(
    a: f64,
    b: f64,
    c: f64,
    p: f64,
    q: f64,
    r: f64,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        if !v.is_finite() || v.abs() > 1.0 {
            return Err(Error::Domain(format!(
                "correlation {name} = {v} outside [-1, 1]"
            )));
        }
    }
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let d = [a, b, c];
    let spread = [
        (1.0 - a * a).max(0.0).sqrt(),
        (1.0 - b * b).max(0.0).sqrt(),
        (1.0 - c * c).max(0.0).sqrt(),
    ];
    let coeff = [p, q, r];
    let value = move |rng: &mut ChaCha8Rng| -> f64 {
        loop {
            let mut num = 0.0;
            let mut nz = 0.0;
            let mut nzp = 0.0;
            for t in 0..3 {
                let z: f64 = rng.sample(StandardNormal);
                let w: f64 = rng.sample(StandardNormal);
                let zp = d[t] * z + spread[t] * w;
                num += coeff[t] * z * zp;
                nz += z * z;
                nzp += zp * zp;
            }
            let den = (nz * nzp).sqrt();
            if den > 0.0 {
                return num / den;
            }
        }
    };
    Ok(stats::mc_mean_stderr(samples, |s| {
        value(&mut rng::stream(seed, SALT_GAUSSIAN, s))
    }))
}

/// The 1-local rounding term `E[x₁ sign(s)/‖x‖]` for a 3-dimensional
/// standard Gaussian `x` whose first coordinate has covariance `d` with the
/// standard Gaussian `s`; equal to `(4d/3π)·₂F₁(½, ½; 5/2; d²)`.
///
/// Evaluated by the hypergeometric power series (first term `d/6`, term
/// ratio `d²(q+½)²/((q+5/2)(q+1))`, overall scale `8/π`) summed until a term
/// drops below [`SERIES_TERM_TOL`]. At `|d| = 1` the series converges too
/// slowly, and the closed form `₂F₁(½,½;5/2;1) = 3π/8` gives exactly `d/2`.
///
/// # Errors
/// `Domain` when `|d| > 1` or `d` is not finite.
pub fn linear_expectation(d: f64) -> Result<f64> {
    if !d.is_finite() || d.abs() > 1.0 {
        return Err(Error::Domain(format!("covariance d = {d} outside [-1, 1]")));
    }
    if d.abs() == 1.0 {
        return Ok(0.5 * d);
    }
    let mut term = d / 6.0;
    let mut sum = term;
    let d2 = d * d;
    for q in 0..SERIES_MAX_TERMS {
        let qf = q as f64;
        term *= d2 * (qf + 0.5) * (qf + 0.5) / ((qf + 2.5) * (qf + 1.0));
        sum += term;
        if term.abs() < SERIES_TERM_TOL {
            break;
        }
    }
    Ok(8.0 / PI * sum)
}

/// The moment polytope of simultaneously attainable correlation diagonals:
/// the tetrahedron `S = conv{(−1,−1,−1), (−1,1,1), (1,−1,1), (1,1,−1)}`.
fn simplex() -> Polytope3 {
    Polytope3::s()
}

/// Representative extreme point of the rank-`k` projector diagonal polytope
/// used for ratio minimization — `(−1,−1,−1)`, `(2,0,0)`, `(1,1,1)` for
/// `k = 1, 2, 3`. Any other extreme point gives the same minimum (they are
/// related by coordinate permutations and double sign flips, which map the
/// simplex onto itself).
pub fn representative_vertex(k: u8) -> Result<Vector3<f64>> {
    match k {
        1 => Ok(Vector3::new(-1.0, -1.0, -1.0)),
        2 => Ok(Vector3::new(2.0, 0.0, 0.0)),
        3 => Ok(Vector3::new(1.0, 1.0, 1.0)),
        _ => Err(Error::Domain(format!("projector rank {k} not in 1..=3"))),
    }
}

/// How [`ratio_quadratic`] evaluates the Gaussian expectation.
#[derive(Clone, Debug)]
pub enum RatioMethod {
    /// Truncated series with rigorous remainder bracket.
    Series(TruncationSet),
    /// Seeded Monte Carlo.
    Mc {
        /// Number of samples.
        samples: u64,
        /// Stream seed.
        seed: u64,
    },
}

/// Result of a pointwise ratio evaluation.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum RatioOutcome {
    /// A bracket guaranteed to contain the exact ratio.
    Bracket(Bracket),
    /// A Monte Carlo estimate with its standard error.
    Estimate {
        /// Sample mean of the ratio.
        value: f64,
        /// Standard error of the mean.
        stderr: f64,
    },
    /// The denominator vanishes at this point (0/0 in exact arithmetic).
    Skipped,
}

impl RatioOutcome {
    /// Certified lower end (bracket) or point estimate (MC); `None` when
    /// skipped.
    pub fn lower(&self) -> Option<f64> {
        match self {
            RatioOutcome::Bracket(b) => Some(b.lower),
            RatioOutcome::Estimate { value, .. } => Some(*value),
            RatioOutcome::Skipped => None,
        }
    }
}

/// The per-edge ratio `(k + E)/(k + ap + bq + cr)` for a strictly quadratic
/// rank-`k` projector at simplex point `(a,b,c)`, with the projector diagonal
/// fixed to the representative extreme point of its polytope.
///
/// # Errors
/// `Domain` for an invalid rank or MC parameters.
pub fn ratio_quadratic(
    k: u8,
    a: f64,
    b: f64,
    c: f64,
    method: &RatioMethod,
) -> Result<RatioOutcome> {
    let rep = representative_vertex(k)?;
    let (p, q, r) = (rep.x, rep.y, rep.z);
    let den = f64::from(k) + a * p + b * q + c * r;
    if den.abs() < DENOMINATOR_TOL {
        return Ok(RatioOutcome::Skipped);
    }
    match method {
        RatioMethod::Series(set) => {
            let e = quad_expectation_series(a, b, c, p, q, r, set);
            let (lo, hi) = (
                (f64::from(k) + e.lower) / den,
                (f64::from(k) + e.upper) / den,
            );
            Ok(RatioOutcome::Bracket(Bracket {
                lower: lo.min(hi),
                upper: lo.max(hi),
            }))
        }
        RatioMethod::Mc { samples, seed } => {
            let (mean, se) = quad_expectation_mc(a, b, c, p, q, r, *samples, *seed)?;
            Ok(RatioOutcome::Estimate {
                value: (f64::from(k) + mean) / den,
                stderr: se / den.abs(),
            })
        }
    }
}

/// The three rank-tagged numerator polynomials built from the default
/// truncation set, in the exact algebraic form whose extreme values are the
/// certified constants:
///
/// * `which = 1`: `Σ_Q f̂²·p_{i,jk}(a,b,c) + 3·rem`
/// * `which = 2`: `Σ_Q f̂²·u_{i,jk}(a,b,c) − rem` (single axis)
/// * `which = 3`: `Σ_Q f̂²·p_{i,jk}(a,b,c) − 3·rem`
///
/// where `rem = 1/3 − captured mass of Q₃`. They satisfy
/// `(1 − q₁(−1,−1,−1))/4 = 22/(15π)`, `(1 + q₂(1,0,0))/2 = 1/3 + 24/(25π)`,
/// and `(3 + q₃(1/3,1/3,1/3))/4 = 1/2 + 388/(405π)`.
///
/// # Errors
/// `Domain` unless `which ∈ {1, 2, 3}`.
pub fn q_function(which: u8, a: f64, b: f64, c: f64) -> Result<f64> {
    let set = TruncationSet::q3();
    let rem = 1.0 / 3.0 - set.captured_mass();
    match which {
        1 | 3 => {
            let mut s = 0.0;
            for &(i, j, k, fsq) in &set.entries {
                s += fsq * p_poly(i, j, k, a, b, c);
            }
            Ok(if which == 1 {
                s + 3.0 * rem
            } else {
                s - 3.0 * rem
            })
        }
        2 => {
            let mut s = 0.0;
            for &(i, j, k, fsq) in &set.entries {
                s += fsq * u_poly(i, j, k, a, b, c);
            }
            Ok(s - rem)
        }
        _ => Err(Error::Domain(format!(
            "q-function index {which} not in 1..=3"
        ))),
    }
}

/// Closed-form certified ratio constant for strictly quadratic rank-`k`
/// projectors: `22/(15π)`, `1/3 + 24/(25π)`, `1/2 + 388/(405π)`.
pub fn certified_quadratic_constant(k: u8) -> Result<f64> {
    match k {
        1 => Ok(22.0 / (15.0 * PI)),
        2 => Ok(1.0 / 3.0 + 24.0 / (25.0 * PI)),
        3 => Ok(0.5 + 388.0 / (405.0 * PI)),
        _ => Err(Error::Domain(format!("projector rank {k} not in 1..=3"))),
    }
}

/// Numerically observed (not certified) worst-case ratio for strictly
/// quadratic rank-`k` projectors: `0.498`, `0.653`, `0.821`. Informational.
pub fn conjectured_quadratic_minimum(k: u8) -> Result<f64> {
    match k {
        1 => Ok(0.498),
        2 => Ok(0.653),
        3 => Ok(0.821),
        _ => Err(Error::Domain(format!("projector rank {k} not in 1..=3"))),
    }
}

/// Report of [`certify_bounds_quadratic`].
#[derive(Clone, Debug, Serialize)]
pub struct QuadraticCertification {
    /// Projector rank.
    pub rank: u8,
    /// Minimum over the grid of the certified lower bracket end; the
    /// worst-case ratio is at least this value at every grid point.
    pub certified_min: f64,
    /// Grid point attaining `certified_min`.
    pub certified_argmin: [f64; 3],
    /// Minimum of the high-degree series point estimate (the numerically
    /// observed worst case, a conjecture probe — not certified).
    pub observed_min: f64,
    /// Grid point attaining `observed_min`.
    pub observed_argmin: [f64; 3],
    /// Truncation degree of the observed-value series.
    pub observed_series_degree: usize,
    /// Barycentric lattice density.
    pub grid_density: usize,
    /// Total points evaluated (lattice plus the appended exact minimizer).
    pub grid_points: usize,
    /// Points skipped because the ratio denominator vanishes there.
    pub skipped_points: usize,
    /// Monte Carlo ratio estimate at `observed_argmin`.
    pub mc_at_observed_argmin: f64,
    /// Standard error of that estimate.
    pub mc_stderr: f64,
    /// Monte Carlo sample count.
    pub mc_samples: u64,
    /// Seed used for the Monte Carlo cross-check.
    pub seed: u64,
}

/// Barycentric lattice of density `g` over the simplex `S`, in
/// lexicographic weight order.
fn simplex_grid(density: usize) -> Vec<[f64; 3]> {
    const V: [[f64; 3]; 4] = [
        [-1.0, -1.0, -1.0],
        [-1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0],
    ];
    let g = density;
    let mut pts = Vec::new();
    for n1 in 0..=g {
        for n2 in 0..=g - n1 {
            for n3 in 0..=g - n1 - n2 {
                let n4 = g - n1 - n2 - n3;
                let lam = [n1, n2, n3, n4].map(|n| n as f64 / g as f64);
                let mut p = [0.0; 3];
                for (l, v) in lam.iter().zip(V.iter()) {
                    for (pc, vc) in p.iter_mut().zip(v.iter()) {
                        *pc += l * vc;
                    }
                }
                pts.push(p);
            }
        }
    }
    pts
}

/// Grid minimization of the strictly-quadratic rank-`k` ratio over the
/// simplex of attainable correlation diagonals.
///
/// Every lattice point gets (a) a certified bracket from the default
/// three-term truncation — `certified_min` is the least lower end, and the
/// exact minimizer of the bracketed bound is appended to the lattice so the
/// reported value agrees with [`certified_quadratic_constant`] to float
/// precision — and (b) a degree-[`OBSERVED_SERIES_DEGREE`] series point
/// estimate whose minimum probes the true (conjectured) worst case. The
/// observed argmin is cross-checked by Monte Carlo with `mc_samples`
/// samples.
///
/// Runs in parallel; results are deterministic for every thread count.
///
/// # Errors
/// `Domain` for rank outside 1..=3, `grid_density = 0`, or
/// `mc_samples = 0`.
pub fn certify_bounds_quadratic(
    k: u8,
    grid_density: usize,
    mc_samples: u64,
    seed: u64,
) -> Result<QuadraticCertification> {
    if grid_density == 0 {
        return Err(Error::Domain("grid density must be at least 1".into()));
    }
    if mc_samples == 0 {
        return Err(Error::Domain("need at least one Monte Carlo sample".into()));
    }
    let rep = representative_vertex(k)?;
    let (p, q, r) = (rep.x, rep.y, rep.z);
    let kf = f64::from(k);

    let mut points = simplex_grid(grid_density);
    // Exact minimizer of the certified bound for this rank; appending it
    // makes certified_min land exactly on the closed-form constant even when
    // it is off-lattice.
    points.push(match k {
        1 => [-1.0, -1.0, -1.0],
        2 => [1.0, 0.0, 0.0],
        _ => [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    });

    let bracket_set = TruncationSet::q3();
    let observed_set = TruncationSet::up_to_degree(OBSERVED_SERIES_DEGREE);
    let tail = (1.0 / 3.0 - bracket_set.captured_mass()).max(0.0);
    let coeff_sum = p.abs() + q.abs() + r.abs();

    // (certified lower end, observed estimate) per point; None when skipped.
    let evals: Vec<Option<(f64, f64)>> = points
        .par_iter()
        .map(|&[a, b, c]| {
            let den = kf + a * p + b * q + c * r;
            if den.abs() < DENOMINATOR_TOL {
                return None;
            }
            let center = series_center(a, b, c, p, q, r, &bracket_set);
            let lo = (kf + center - coeff_sum * tail) / den;
            let obs = (kf + series_center(a, b, c, p, q, r, &observed_set)) / den;
            Some((lo, obs))
        })
        .collect();

    let mut certified: Option<(f64, usize)> = None;
    let mut observed: Option<(f64, usize)> = None;
    let mut skipped = 0usize;
    for (idx, eval) in evals.iter().enumerate() {
        match eval {
            None => skipped += 1,
            Some((lo, obs)) => {
                if certified.is_none_or(|(best, _)| *lo < best) {
                    certified = Some((*lo, idx));
                }
                if observed.is_none_or(|(best, _)| *obs < best) {
                    observed = Some((*obs, idx));
                }
            }
        }
    }
    let (certified_min, ci) = certified.ok_or_else(|| {
        Error::Invariant("every grid point was skipped; the grid is degenerate".into())
    })?;
    let (observed_min, oi) = observed.expect("observed minimum exists whenever certified does");

    let [a, b, c] = points[oi];
    let (mc_mean, mc_se) = quad_expectation_mc(a, b, c, p, q, r, mc_samples, seed)?;
    let den = kf + a * p + b * q + c * r;

    Ok(QuadraticCertification {
        rank: k,
        certified_min,
        certified_argmin: points[ci],
        observed_min,
        observed_argmin: points[oi],
        observed_series_degree: OBSERVED_SERIES_DEGREE,
        grid_density,
        grid_points: points.len(),
        skipped_points: skipped,
        mc_at_observed_argmin: (kf + mc_mean) / den,
        mc_stderr: mc_se / den.abs(),
        mc_samples,
        seed,
    })
}

/// One choice of envelope constants for the two 1-local terms, with the
/// vertex minimum it certifies.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnvelopeAssignment {
    /// Constant multiplying the first 1-local coordinate.
    pub c_i: f64,
    /// Constant multiplying the second 1-local coordinate.
    pub c_j: f64,
    /// Minimum of the rational objective over the polytope vertices.
    pub minimum: f64,
    /// Vertex attaining the minimum.
    pub argmin: [f64; 3],
}

/// Report of [`bound_general`].
#[derive(Clone, Debug, Serialize)]
pub struct GeneralBound {
    /// Projector rank.
    pub rank: u8,
    /// Headline certified constant: the minimum over the two assignments
    /// that give the two 1-local terms *different* envelope constants
    /// (`2/π − 1/4`, `16/(9π)`, `3/8 + 11/(9π)` for ranks 1, 2, 3).
    pub value: f64,
    /// Minimum when each 1-local term instead uses the envelope constant
    /// matching the sign of its own coordinate at every vertex (`1/2` on a
    /// nonpositive coordinate, `4/(3π)` on a nonnegative one) — the most
    /// conservative per-vertex choice. Lower than `value` for rank 1, equal
    /// for ranks 2 and 3.
    pub matched_min: f64,
    /// Vertex minima for all four fixed assignments of the two constants.
    pub assignments: Vec<EnvelopeAssignment>,
    /// Vertices of the coarse constraint polytope.
    pub vertices: Vec<[f64; 3]>,
    /// Vertices at which the objective denominator vanishes (excluded from
    /// every minimum).
    pub skipped_vertices: usize,
}

/// Certified ratio bound for general (not strictly quadratic) rank-`k`
/// projectors, by exact vertex minimization of the coarse rational program
/// in the three aggregate variables `v₁ = ap+bq+cr`, `v₂ = t_i d_i`,
/// `v₃ = t_j d_j`:
///
/// ```text
/// minimize  (k + (8/9π)·v₁ − 3(1/3 − 8/9π) + c_i·v₂ + c_j·v₃) / (k + v₁ + v₂ + v₃)
/// subject to  −k ≤ v₁ ≤ 4−k,  −k ≤ v₁+v₂+v₃ ≤ 4−k,  |v₂| ≤ ℓ,  |v₃| ≤ ℓ
/// ```
///
/// with `ℓ = 1` for `k ∈ {1,3}` and `ℓ = 2` for `k = 2`. The numerator uses
/// the degree-1 series truncation of the quadratic term and a linear
/// envelope of the 1-local term whose slope is `4/(3π)` on one side of the
/// origin and `1/2` on the other; `c_i, c_j` range over those two constants.
/// Vertices are enumerated exactly (all facet triples), so the reported
/// minima are exact up to float rounding.
///
/// # Errors
/// `Domain` for rank outside 1..=3.
pub fn bound_general(k: u8) -> Result<GeneralBound> {
    if !(1..=3).contains(&k) {
        return Err(Error::Domain(format!("projector rank {k} not in 1..=3")));
    }
    let kf = f64::from(k);
    let l = if k == 2 { 2.0 } else { 1.0 };
    // Facets a·v ≤ b of the coarse polytope.
    let facets: [(Vector3<f64>, f64); 8] = [
        (Vector3::new(1.0, 0.0, 0.0), 4.0 - kf),
        (Vector3::new(-1.0, 0.0, 0.0), kf),
        (Vector3::new(1.0, 1.0, 1.0), 4.0 - kf),
        (Vector3::new(-1.0, -1.0, -1.0), kf),
        (Vector3::new(0.0, 1.0, 0.0), l),
        (Vector3::new(0.0, -1.0, 0.0), l),
        (Vector3::new(0.0, 0.0, 1.0), l),
        (Vector3::new(0.0, 0.0, -1.0), l),
    ];

    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    for x in 0..facets.len() {
        for y in x + 1..facets.len() {
            for z in y + 1..facets.len() {
                let m = Matrix3::from_rows(&[
                    facets[x].0.transpose(),
                    facets[y].0.transpose(),
                    facets[z].0.transpose(),
                ]);
                if m.determinant().abs() < 1e-12 {
                    continue;
                }
                let rhs = Vector3::new(facets[x].1, facets[y].1, facets[z].1);
                let v = m.try_inverse().expect("determinant checked") * rhs;
                let feasible = facets.iter().all(|(a, b)| a.dot(&v) <= b + 1e-9);
                if feasible && !vertices.iter().any(|w| (w - v).amax() < 1e-9) {
                    vertices.push(v);
                }
            }
        }
    }

    const SECANT: f64 = 0.5;
    let origin_slope = 4.0 / (3.0 * PI);
    let quad_slope = 8.0 / (9.0 * PI);
    let remainder = 3.0 * (1.0 / 3.0 - quad_slope);
    let objective = |v: &Vector3<f64>, ci: f64, cj: f64| -> Option<f64> {
        let den = kf + v.x + v.y + v.z;
        if den.abs() < DENOMINATOR_TOL {
            return None;
        }
        Some((kf + quad_slope * v.x - remainder + ci * v.y + cj * v.z) / den)
    };

    let mut assignments = Vec::new();
    for (ci, cj) in [
        (SECANT, SECANT),
        (SECANT, origin_slope),
        (origin_slope, SECANT),
        (origin_slope, origin_slope),
    ] {
        let mut best: Option<(f64, Vector3<f64>)> = None;
        for v in &vertices {
            if let Some(val) = objective(v, ci, cj) {
                if best.is_none_or(|(b, _)| val < b) {
                    best = Some((val, *v));
                }
            }
        }
        let (minimum, arg) =
            best.ok_or_else(|| Error::Invariant("all polytope vertices were skipped".into()))?;
        assignments.push(EnvelopeAssignment {
            c_i: ci,
            c_j: cj,
            minimum,
            argmin: [arg.x, arg.y, arg.z],
        });
    }

    let value = assignments[1].minimum.min(assignments[2].minimum);

    let matched = |x: f64| if x >= 0.0 { origin_slope } else { SECANT };
    let mut matched_min = f64::INFINITY;
    let mut skipped = 0usize;
    for v in &vertices {
        match objective(v, matched(v.y), matched(v.z)) {
            Some(val) => matched_min = matched_min.min(val),
            None => skipped += 1,
        }
    }

    Ok(GeneralBound {
        rank: k,
        value,
        matched_min,
        assignments,
        vertices: vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
        skipped_vertices: skipped,
    })
}

/// Closed-form constants reported by [`bound_general`]: `2/π − 1/4`,
/// `16/(9π)`, `3/8 + 11/(9π)`.
pub fn certified_general_constant(k: u8) -> Result<f64> {
    match k {
        1 => Ok(2.0 / PI - 0.25),
        2 => Ok(16.0 / (9.0 * PI)),
        3 => Ok(3.0 / 8.0 + 11.0 / (9.0 * PI)),
        _ => Err(Error::Domain(format!("projector rank {k} not in 1..=3"))),
    }
}

/// Standard form of a quadratic moment pair.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuadStandardForm {
    /// Signed singular values of the cross-moment block; a point of the
    /// simplex `S`.
    pub abc: [f64; 3],
    /// Diagonal of the rotated projector block; a point of the rank polytope
    /// when the projector has that rank.
    pub pqr: [f64; 3],
}

/// Rotation-free core of the quadratic standard form.
fn quad_form_unchecked(cq: &Matrix3<f64>, mq: &Matrix3<f64>) -> QuadStandardForm {
    let (l, s, n) = crate::pauli::special_svd(mq);
    let rotated = l.transpose() * cq * n;
    QuadStandardForm {
        abc: [s.x, s.y, s.z],
        pqr: [rotated[(0, 0)], rotated[(1, 1)], rotated[(2, 2)]],
    }
}

/// Reduces a projector quadratic block `Cq` and a cross-moment block `Mq`
/// to the six standard-form parameters via the sign-adjusted SVD
/// `Mq = L·diag(a,b,c)·Nᵀ` (`L, N ∈ SO(3)`), `(p,q,r) = diag(Lᵀ Cq N)`.
///
/// The pairing `ap + bq + cr = Tr[Cq Mqᵀ]` is checked to 1e−12 (relative),
/// `[a,b,c]` must lie in the simplex `S`, and — when `rank` is given —
/// `[p,q,r]` must lie in the rank's diagonal polytope, both within
/// [`POLYTOPE_TOL`].
///
/// # Errors
/// `Invariant` on pairing or polytope violations; `Domain` for an invalid
/// rank.
pub fn standard_form_quadratic(
    cq: &Matrix3<f64>,
    mq: &Matrix3<f64>,
    rank: Option<u8>,
) -> Result<QuadStandardForm> {
    let form = quad_form_unchecked(cq, mq);
    let paired: f64 = form.abc.iter().zip(&form.pqr).map(|(x, y)| x * y).sum();
    let direct = cq.component_mul(mq).sum();
    let scale = 1.0 + cq.norm() * mq.norm();
    if (paired - direct).abs() > 1e-12 * scale {
        return Err(Error::Invariant(format!(
            "standard form broke the pairing: ap+bq+cr = {paired:.15e} vs Tr[Cq Mqᵀ] = {direct:.15e}"
        )));
    }
    let abc = Vector3::from(form.abc);
    let slack = simplex().max_facet_slack(&abc);
    if slack > POLYTOPE_TOL {
        return Err(Error::Invariant(format!(
            "moment singular values {:?} leave the simplex by {slack:.3e}",
            form.abc
        )));
    }
    if let Some(k) = rank {
        let poly = Polytope3::for_rank(k)?;
        let pqr = Vector3::from(form.pqr);
        let slack = poly.max_facet_slack(&pqr);
        if slack > POLYTOPE_TOL {
            return Err(Error::Invariant(format!(
                "projector diagonal {:?} leaves the rank-{k} polytope by {slack:.3e}",
                form.pqr
            )));
        }
    }
    Ok(form)
}

/// Standard form of one 1-local term.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearStandardForm {
    /// Covariance `‖Vᵀv₀‖ ∈ [0, 1]` between the scalar direction and the
    /// qubit's vector triple.
    pub d: f64,
    /// Signed magnitude of the 1-local coefficient along the correlated
    /// direction.
    pub t: f64,
    /// Set when `d ≈ 0`: the rotation is undefined, `t` falls back to
    /// `‖w‖`, and the term contributes exactly zero regardless.
    pub degenerate: bool,
}

/// Reduces a 1-local term to `(d, t)`: `d = ‖Vᵀv₀‖` and `t` the first
/// coordinate of `Uw` for any rotation `U` taking `Vᵀv₀` to `d·e₁`.
///
/// Because `U` is orthogonal, `(Uw)₁ = (Uᵀe₁)·w = (Vᵀv₀)·w / d` — the
/// residual freedom of rotations about `e₁` never reaches the first
/// coordinate, so no explicit rotation is constructed. The identity
/// `v₀ᵀVw = d·t` is exact by construction.
///
/// # Errors
/// `DimensionMismatch` unless `V` is `dim×3` with `dim = len(v₀)`;
/// `Domain` when `‖v₀‖ ≠ 1` or the columns of `V` are not orthonormal
/// (tolerance 1e−4, wide enough for first-order solver output).
pub fn standard_form_linear(
    v: &DMatrix<f64>,
    v0: &DVector<f64>,
    w: &Vector3<f64>,
) -> Result<LinearStandardForm> {
    if v.ncols() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: v.ncols(),
            context: "vector-triple matrix columns",
        });
    }
    if v.nrows() != v0.len() {
        return Err(Error::DimensionMismatch {
            expected: v.nrows(),
            got: v0.len(),
            context: "scalar-direction vector length",
        });
    }
    if (v0.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::Domain(format!(
            "scalar direction must be a unit vector, got norm {:.6}",
            v0.norm()
        )));
    }
    let gram = v.transpose() * v;
    if (gram - Matrix3::identity()).amax() > 1e-4 {
        return Err(Error::Domain(
            "vector triple does not have orthonormal columns".into(),
        ));
    }
    let m = v.transpose() * v0;
    let m = Vector3::new(m[0], m[1], m[2]);
    let d = m.norm();
    if d < 1e-12 {
        return Ok(LinearStandardForm {
            d: 0.0,
            t: w.norm(),
            degenerate: true,
        });
    }
    Ok(LinearStandardForm {
        d: d.min(1.0),
        t: m.dot(w) / d,
        degenerate: false,
    })
}

/// Complete standard form of one instance term against a Gram-vector
/// solution: the six quadratic parameters plus both 1-local pairs, with
/// `t ≥ 0` normalized by flipping the sign of the associated `d`.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeStandardForm {
    /// Declared projector rank, when known.
    pub rank: Option<u8>,
    /// Simplex point from the cross-moment block.
    pub abc: [f64; 3],
    /// Rotated projector diagonal.
    pub pqr: [f64; 3],
    /// 1-local magnitude on the first qubit (`≥ 0`).
    pub t_i: f64,
    /// Signed covariance for the first qubit.
    pub d_i: f64,
    /// 1-local magnitude on the second qubit (`≥ 0`).
    pub t_j: f64,
    /// Signed covariance for the second qubit.
    pub d_j: f64,
    /// Degenerate flags from the two linear reductions.
    pub degenerate_i: bool,
    /// See `degenerate_i`.
    pub degenerate_j: bool,
}

impl EdgeStandardForm {
    /// The aggregate coordinates fed to the coarse bound:
    /// `(ap+bq+cr, t_i d_i, t_j d_j)`.
    pub fn aggregates(&self) -> [f64; 3] {
        let v1: f64 = self.abc.iter().zip(&self.pqr).map(|(x, y)| x * y).sum();
        [v1, self.t_i * self.d_i, self.t_j * self.d_j]
    }
}

/// Builds the standard form of the term on qubits `(i, j)` with moment table
/// `gamma`, from the Gram vectors of a solved relaxation.
///
/// `check_tol` scales the feasibility checks: polytope membership of both
/// diagonals and the aggregate interval constraints
/// `−k ≤ v₁ ≤ 4−k`, `−k ≤ v₁+v₂+v₃ ≤ 4−k`, `|v₂|,|v₃| ≤ ℓ(k)` (the latter
/// only when `rank` is known). Pass a tolerance compatible with how tightly
/// the relaxation was solved.
///
/// # Errors
/// `Domain` for out-of-range qubit indices; `Invariant` when a check fails.
pub fn edge_standard_form(
    gram: &GramVectors,
    i: usize,
    j: usize,
    gamma: &TwoMoment,
    rank: Option<u8>,
    check_tol: f64,
) -> Result<EdgeStandardForm> {
    let n = gram.n();
    if i >= n || j >= n || i == j {
        return Err(Error::Domain(format!(
            "term qubits ({i}, {j}) invalid for {n} qubits"
        )));
    }
    let triple = |q: usize| -> DMatrix<f64> {
        let mut m = DMatrix::zeros(gram.dim, 3);
        for k in 0..3 {
            m.set_column(k, &gram.v[q][k]);
        }
        m
    };
    let vi = triple(i);
    let vj = triple(j);
    let mq = vi.transpose() * &vj;
    let mq = Matrix3::from_fn(|r, c| mq[(r, c)]);
    let form = quad_form_unchecked(&gamma.r, &mq);

    let lin_i = standard_form_linear(&vi, &gram.v0, &gamma.u)?;
    let lin_j = standard_form_linear(&vj, &gram.v0, &gamma.v)?;
    // Normalize to nonnegative magnitudes; (t, d) → (−t, −d) leaves both the
    // term value t·b(d) and the aggregate t·d unchanged.
    let fix = |lsf: LinearStandardForm| -> (f64, f64) {
        if lsf.t < 0.0 {
            (-lsf.t, -lsf.d)
        } else {
            (lsf.t, lsf.d)
        }
    };
    let (t_i, d_i) = fix(lin_i);
    let (t_j, d_j) = fix(lin_j);

    let out = EdgeStandardForm {
        rank,
        abc: form.abc,
        pqr: form.pqr,
        t_i,
        d_i,
        t_j,
        d_j,
        degenerate_i: lin_i.degenerate,
        degenerate_j: lin_j.degenerate,
    };

    let slack = simplex().max_facet_slack(&Vector3::from(form.abc));
    if slack > check_tol {
        return Err(Error::Invariant(format!(
            "cross-moment singular values {:?} leave the simplex by {slack:.3e}",
            form.abc
        )));
    }
    if let Some(k) = rank {
        let poly = Polytope3::for_rank(k)?;
        let slack = poly.max_facet_slack(&Vector3::from(form.pqr));
        if slack > check_tol {
            return Err(Error::Invariant(format!(
                "projector diagonal {:?} leaves the rank-{k} polytope by {slack:.3e}",
                form.pqr
            )));
        }
        let kf = f64::from(k);
        let l = if k == 2 { 2.0 } else { 1.0 };
        let [v1, v2, v3] = out.aggregates();
        let checks = [
            ("quadratic aggregate", v1, -kf, 4.0 - kf),
            ("total aggregate", v1 + v2 + v3, -kf, 4.0 - kf),
            ("first 1-local aggregate", v2, -l, l),
            ("second 1-local aggregate", v3, -l, l),
        ];
        for (name, val, lo, hi) in checks {
            if val < lo - check_tol || val > hi + check_tol {
                return Err(Error::Invariant(format!(
                    "{name} {val:.6} outside [{lo}, {hi}] for rank {k}"
                )));
            }
        }
    }
    Ok(out)
}
