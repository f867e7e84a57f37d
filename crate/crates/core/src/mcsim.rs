//! Finite-N eigenvalue sampling from tridiagonal (Gaussian) and
//! bidiagonal-squared (Laguerre) beta-ensemble models, rescaled to the
//! weights e^{-x^2} (beta = 2, 4), e^{-x^2/2} (beta = 1), x^alpha e^{-x}
//! (beta = 2, 4) and x^{alpha/2} e^{-x/2} (beta = 1).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{EdgeScaling, EnsembleKind, Family};
use crate::testfn::TestFunction;

pub const MIN_SAMPLES: usize = 100;
/// Largest |lambda| * N * max|F| accepted by [`estimate_mgf`].
pub const MGF_OVERFLOW_GUARD: f64 = 500.0;
const BOOTSTRAP_RESAMPLES: usize = 200;
/// Stream index reserved for bootstrap resampling.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSample {
    pub kind: EnsembleKind,
    pub n: usize,
    /// ascending
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub variance: f64,
    pub stderr_mean: f64,
    pub stderr_var: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Generator for sample `index` of a run: one ChaCha8 stream per index,
/// so the result does not depend on how samples are split across workers.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn chi<R: Rng>(rng: &mut R, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 0.0;
    }
    let g = Gamma::new(0.5 * dof, 2.0).expect("positive shape");
    g.sample(rng).sqrt()
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (e[i] couples i and i+1), by implicit QL; ascending.
pub fn tridiagonal_eigenvalues(mut d: Vec<f64>, off: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    if off.len() + 1 != n {
        return Err(Error::InvalidParameter("off-diagonal must have length n - 1".into()));
    }
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Singular("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = if g.abs() > 1e100 { g.abs() } else { (g * g + 1.0).sqrt() };
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(d)
}

fn check_sampling(kind: EnsembleKind, n: usize) -> Result<()> {
    kind.validate_n(n)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("sampling needs N >= 2, got {n}")));
    }
    Ok(())
}

fn draw<R: Rng>(kind: EnsembleKind, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let beta = kind.beta.value();
    match kind.family {
        Family::Gaussian => {
            // native density prod |D|^beta e^{-sum l^2 / 2}
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let d: Vec<f64> = (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * 2f64.sqrt() * s
                })
                .collect();
            let e: Vec<f64> = (1..n).map(|i| chi(rng, beta * (n - i) as f64) * s).collect();
            let lam = tridiagonal_eigenvalues(d, &e)?;
            // e^{-x^2} for beta = 2, 4; the native weight for beta = 1
            let scale = if kind.beta == crate::kernel::Beta::One { 1.0 } else { s };
            Ok(lam.into_iter().map(|l| l * scale).collect())
        }
        Family::Laguerre => {
            // native density prod |D|^beta prod l^{a-p} e^{-l/2}, p = 1 + beta (N-1)/2
            let p = 1.0 + beta * (n as f64 - 1.0) / 2.0;
            let (a, scale) = match kind.beta {
                crate::kernel::Beta::One => (kind.alpha / 2.0 + p, 1.0),
                _ => (kind.alpha + p, 0.5),
            };
            let diag: Vec<f64> = (0..n).map(|i| chi(rng, 2.0 * a - beta * i as f64)).collect();
            let sub: Vec<f64> = (0..n - 1).map(|i| chi(rng, beta * (n - 1 - i) as f64)).collect();
            let d: Vec<f64> = (0..n)
                .map(|i| diag[i] * diag[i] + if i > 0 { sub[i - 1] * sub[i - 1] } else { 0.0 })
                .collect();
            let e: Vec<f64> = (0..n - 1).map(|i| diag[i] * sub[i]).collect();
            let lam = tridiagonal_eigenvalues(d, &e)?;
            Ok(lam.into_iter().map(|l| (l * scale).max(f64::MIN_POSITIVE)).collect())
        }
    }
}

/// One draw from the ensemble, deterministic in `seed`.
pub fn sample_eigenvalues(kind: EnsembleKind, n: usize, seed: u64) -> Result<EigenSample> {
    sample_indexed(kind, n, seed, 0)
}

/// Draw number `index` of the run seeded by `seed`.
pub fn sample_indexed(kind: EnsembleKind, n: usize, seed: u64, index: u64) -> Result<EigenSample> {
    check_sampling(kind, n)?;
    let mut rng = sample_rng(seed, index);
    Ok(EigenSample { kind, n, eigenvalues: draw(kind, n, &mut rng)? })
}

/// sum_j F(stat_scale (x_j - center)).
pub fn scaled_statistic(sample: &EigenSample, f: &TestFunction) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let sc = EdgeScaling::new(sample.kind, sample.n)?;
    let vals: Vec<f64> = sample.eigenvalues.iter().map(|&x| f.eval(sc.to_edge(x))).collect();
    Ok(pairwise_sum(&vals))
}

/// Deterministic pairwise reduction.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Edge-scaled statistic of every draw, in draw order.
pub fn sample_statistics(kind: EnsembleKind, n: usize, f: &TestFunction, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    check_sampling(kind, n)?;
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = sample_indexed(kind, n, seed, i)?;
            scaled_statistic(&s, f)
        })
        .collect()
}

/// sum_j F(x_j - sqrt(2N)) over unscaled GUE draws, in draw order.
pub fn shifted_gue_statistics(n: usize, f: &TestFunction, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    let kind = EnsembleKind::gue();
    check_sampling(kind, n)?;
    let center = (2.0 * n as f64).sqrt();
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = sample_indexed(kind, n, seed, i)?;
            let vals: Vec<f64> = s.eigenvalues.iter().map(|&x| f.eval(x - center)).collect();
            Ok(pairwise_sum(&vals))
        })
        .collect()
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!("n_samples must be >= {MIN_SAMPLES}, got {n_samples}")));
    }
    Ok(())
}

/// Mean, variance and their standard errors from a list of values.
pub fn moments_of(values: &[f64], seed: u64) -> MomentEstimate {
    let n = values.len();
    let nf = n as f64;
    let mean = pairwise_sum(values) / nf;
    let dev2: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let dev4: Vec<f64> = dev2.iter().map(|d| d * d).collect();
    let m2 = pairwise_sum(&dev2) / nf;
    let m4 = pairwise_sum(&dev4) / nf;
    let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
    let stderr_mean = (variance / nf).sqrt();
    let var_of_var = if n > 3 { (m4 - (nf - 3.0) / (nf - 1.0) * variance * variance) / nf } else { 0.0 };
    let mut stderr_var = var_of_var.max(0.0).sqrt();
    if n < 1000 {
        stderr_var *= 1.5;
    }
    MomentEstimate { mean, variance, stderr_mean, stderr_var, n_samples: n, seed }
}

pub fn estimate_moments(kind: EnsembleKind, n: usize, f: &TestFunction, n_samples: usize, seed: u64) -> Result<MomentEstimate> {
    check_samples(n_samples)?;
    let vals = sample_statistics(kind, n, f, n_samples, seed)?;
    Ok(moments_of(&vals, seed))
}

fn log_mean_exp(vals: &[f64], lambda: f64) -> f64 {
    let a: Vec<f64> = vals.iter().map(|s| -lambda * s).collect();
    let top = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<f64> = a.iter().map(|v| (v - top).exp()).collect();
    top + (pairwise_sum(&terms) / vals.len() as f64).ln()
}

fn check_mgf(n: usize, f: &TestFunction, lambda: f64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
    }
    let worst = lambda.abs() * n as f64 * f.sup_abs();
    if worst > MGF_OVERFLOW_GUARD {
        return Err(Error::Range(format!(
            "|lambda| * N * max|F| = {worst:.1} exceeds {MGF_OVERFLOW_GUARD}"
        )));
    }
    Ok(())
}

/// log of the empirical mean of exp(-lambda * statistic).
pub fn estimate_mgf(kind: EnsembleKind, n: usize, f: &TestFunction, lambda: f64, n_samples: usize, seed: u64) -> Result<f64> {
    Ok(estimate_mgf_with_stderr(kind, n, f, lambda, n_samples, seed)?.0)
}

/// As [`estimate_mgf`], with a bootstrap standard error.
pub fn estimate_mgf_with_stderr(
    kind: EnsembleKind,
    n: usize,
    f: &TestFunction,
    lambda: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_samples(n_samples)?;
    check_mgf(n, f, lambda)?;
    if lambda == 0.0 {
        return Ok((0.0, 0.0));
    }
    let vals = sample_statistics(kind, n, f, n_samples, seed)?;
    Ok(mgf_from_values(&vals, lambda, seed))
}

/// log-MGF of a list of statistic values and its bootstrap standard error.
pub fn mgf_from_values(vals: &[f64], lambda: f64, seed: u64) -> (f64, f64) {
    let value = log_mean_exp(vals, lambda);
    let mut rng = sample_rng(seed, BOOTSTRAP_STREAM);
    let n = vals.len();
    let mut reps = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut buf = vec![0.0; n];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for b in buf.iter_mut() {
            *b = vals[rng.random_range(0..n)];
        }
        reps.push(log_mean_exp(&buf, lambda));
    }
    let m = moments_of(&reps, seed);
    (value, m.variance.sqrt())
}

/// Counts of edge-scaled eigenvalues in equal bins over `range`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_samples: usize,
}

pub fn edge_histogram(
    kind: EnsembleKind,
    n: usize,
    n_samples: usize,
    seed: u64,
    range: (f64, f64),
    bins: usize,
) -> Result<EdgeHistogram> {
    check_sampling(kind, n)?;
    if bins == 0 || !(range.0 < range.1) {
        return Err(Error::InvalidParameter("histogram needs bins >= 1 and an increasing range".into()));
    }
    let sc = EdgeScaling::new(kind, n)?;
    let width = (range.1 - range.0) / bins as f64;
    let per: Vec<Vec<u64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = sample_indexed(kind, n, seed, i)?;
            let mut c = vec![0u64; bins];
            for &x in &s.eigenvalues {
                let xi = sc.to_edge(x);
                if xi >= range.0 && xi < range.1 {
                    let b = (((xi - range.0) / width) as usize).min(bins - 1);
                    c[b] += 1;
                }
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; bins];
    for c in per {
        for (t, v) in counts.iter_mut().zip(c) {
            *t += v;
        }
    }
    let edges = (0..=bins).map(|i| range.0 + width * i as f64).collect();
    Ok(EdgeHistogram { edges, counts, n_samples })
}

/// Raw samples as CSV rows (sample_index, eigenvalue_rank, value).
pub fn samples_to_csv(samples: &[EigenSample]) -> String {
    let mut out = String::from("sample_index,eigenvalue_rank,value\n");
    for (i, s) in samples.iter().enumerate() {
        for (r, v) in s.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{i},{r},{v:?}\n"));
        }
    }
    out
}
