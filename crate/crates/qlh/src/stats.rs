//! Deterministic parallel Monte Carlo aggregation.
//!
//! Samples are partitioned into fixed-size chunks by index; chunks are
//! evaluated in parallel, each producing partial sums sequentially, and the
//! partial results are folded in chunk order. Because the chunk boundaries
//! and the fold order depend only on the sample count, the aggregate is
//! bit-identical for every thread count (a two-level blocked summation, which
//! also keeps rounding error small at these sample sizes).

use rayon::prelude::*;

/// Chunk size for blocked Monte Carlo aggregation.
pub const CHUNK: u64 = 1024;

/// Mean and standard error of `f(index)` over `samples` evaluations.
pub fn mc_mean_stderr(samples: u64, f: impl Fn(u64) -> f64 + Sync) -> (f64, f64) {
    assert!(samples >= 1, "need at least one sample");
    let chunks = samples.div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * CHUNK;
            let hi = (lo + CHUNK).min(samples);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for s in lo..hi {
                let v = f(s);
                sum += v;
                sumsq += v * v;
            }
            (sum, sumsq)
        })
        .collect();
    let (sum, sumsq) = partials
        .iter()
        .fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    summarize(sum, sumsq, samples)
}

/// Converts raw power sums into `(mean, stderr)`.
///
/// The variance estimate is the unbiased sample variance clamped at zero
/// (the power-sum form can go marginally negative for constant data).
pub fn summarize(sum: f64, sumsq: f64, count: u64) -> (f64, f64) {
    let n = count as f64;
    let mean = sum / n;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Per-component mean and standard error of a vector-valued sample function.
///
/// `f(index, out)` must fill `out` (length `dim`) with the sample's values.
/// Returns `(means, stderrs)`.
pub fn mc_mean_stderr_vec(
    samples: u64,
    dim: usize,
    f: impl Fn(u64, &mut [f64]) + Sync,
) -> (Vec<f64>, Vec<f64>) {
    assert!(samples >= 1, "need at least one sample");
    let chunks = samples.div_ceil(CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * CHUNK;
            let hi = (lo + CHUNK).min(samples);
            let mut sum = vec![0.0; dim];
            let mut sumsq = vec![0.0; dim];
            let mut buf = vec![0.0; dim];
            for s in lo..hi {
                f(s, &mut buf);
                for (d, v) in buf.iter().enumerate() {
                    sum[d] += v;
                    sumsq[d] += v * v;
                }
            }
            (sum, sumsq)
        })
        .collect();
    let mut sum = vec![0.0; dim];
    let mut sumsq = vec![0.0; dim];
    for (s, q) in &partials {
        for d in 0..dim {
            sum[d] += s[d];
            sumsq[d] += q[d];
        }
    }
    let mut means = vec![0.0; dim];
    let mut errs = vec![0.0; dim];
    for d in 0..dim {
        let (m, e) = summarize(sum[d], sumsq[d], samples);
        means[d] = m;
        errs[d] = e;
    }
    (means, errs)
}
