//! Large-window asymptotics of log det(I + K fhat) for fhat(x) = f(x / gamma),
//! the mean and variance of sum F(x_j - sqrt(2N)) in GUE, and the Coulomb-fluid
//! forms S1, S2 of the same quantities.
//!
//! Throughout, f = exp(-lambda F) - 1, so log(1 + f) = -lambda F.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fredholm::{logdet_airy, NystromGrid};
use crate::quad::{gauss_legendre, integrate_1d, integrate_1d_fallible, Interval, QuadratureSpec};
use crate::testfn::TestFunction;

/// Largest frequency tried before the cosine-energy integral is declared divergent.
const MAX_FREQUENCY: f64 = 512.0;
/// Right end of the Fredholm window; K(x, x) is below 1e-16 past it.
const KERNEL_RIGHT_CUT: f64 = 8.0;
/// Target panel width of the Fredholm grid in the Airy variable.
const FREDHOLM_PANEL_WIDTH: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BWResult {
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
    pub logdet_prediction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BwRow {
    pub gamma: f64,
    pub logdet: f64,
    pub predicted: f64,
    pub residual: f64,
}

/// Fredholm values over a gamma list with the least-squares fit of
/// logdet ~ c1 gamma^{3/2} + c2.
#[derive(Debug, Clone, PartialEq)]
pub struct BwScan {
    pub c1: f64,
    pub c2: f64,
    pub c1_fit: f64,
    pub c2_fit: f64,
    pub rows: Vec<BwRow>,
}

/// log(1 + f(x)), rejecting nodes where exp(-lambda F) underflows to 0.
fn log_one_plus_f(f: &TestFunction, lambda: f64, x: f64) -> Result<f64> {
    let w = (-lambda * f.eval(x)).exp_m1();
    if !(1.0 + w > 0.0) || !w.is_finite() {
        return Err(Error::LogDomain { x });
    }
    Ok(w.ln_1p())
}

/// sqrt of the extent of the left half-line on which F(-x) is not negligible.
fn left_reach(f: &TestFunction) -> Option<f64> {
    match f.effective_support() {
        Some((lo, _)) if lo < 0.0 => Some((-lo).sqrt()),
        _ => None,
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
    }
    Ok(())
}

/// Integral over (0, inf) of sqrt(x) g(-x), through x = u^2.
fn sqrt_moment<G: FnMut(f64) -> Result<f64>>(mut g: G, reach: f64, spec: &QuadratureSpec) -> Result<f64> {
    let r = integrate_1d_fallible(|u| Ok(2.0 * u * u * g(-u * u)?), Interval::new(0.0, reach), spec)?;
    Ok(r.value)
}

pub fn bw_c1(f: &TestFunction, lambda: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_lambda(lambda)?;
    let Some(reach) = left_reach(f) else { return Ok(0.0) };
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(sqrt_moment(|x| log_one_plus_f(f, lambda, x), reach, spec)? / PI)
}

/// Weights for (1/pi) int_0^Y cos(x y) g(y) dy, resolved for |x| <= x_max.
struct CosineTransform {
    y: Vec<f64>,
    wg: Vec<f64>,
}

impl CosineTransform {
    fn build<G: FnMut(f64) -> Result<f64>>(g: &mut G, reach: f64, x_max: f64, refine: usize, npp: usize) -> Result<Self> {
        let width = 0.25f64.min(1.0 / x_max.max(1.0)) / refine as f64;
        let panels = (reach / width).ceil().max(1.0) as usize;
        let rule = gauss_legendre(npp);
        let h = reach / panels as f64;
        let mut y = Vec::with_capacity(panels * npp);
        let mut wg = Vec::with_capacity(panels * npp);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let yy = mid + 0.5 * h * t;
                let v = g(yy)?;
                if v != 0.0 {
                    y.push(yy);
                    wg.push(0.5 * h * w * v / PI);
                }
            }
        }
        Ok(CosineTransform { y, wg })
    }

    fn eval(&self, x: f64) -> f64 {
        self.y.iter().zip(&self.wg).map(|(&y, &w)| w * (x * y).cos()).sum()
    }

    /// 1/2 int_0^{x_max} x G(x)^2 dx.
    fn energy(&self, x_max: f64, npp: usize) -> f64 {
        let panels = (x_max / 0.25).ceil() as usize;
        let rule = gauss_legendre(npp);
        let h = x_max / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            let mut s = 0.0;
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let x = mid + 0.5 * h * t;
                let g = self.eval(x);
                s += w * x * g * g;
            }
            total += 0.5 * h * s;
        }
        0.5 * total
    }
}

/// 1/2 int_0^inf x G(x)^2 dx with G the cosine transform of g on (0, reach).
/// The frequency cut doubles until the value settles; each cut is checked
/// against a run at twice the node density.
fn cosine_energy<G: FnMut(f64) -> Result<f64>>(mut g: G, reach: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let npp = spec.nodes_per_panel;
    let mut prev: Option<f64> = None;
    let mut x_max = 8.0;
    let mut last = 0.0;
    let mut last_err = f64::INFINITY;
    while x_max <= MAX_FREQUENCY {
        let coarse = CosineTransform::build(&mut g, reach, x_max, 1, npp)?.energy(x_max, npp);
        let fine = CosineTransform::build(&mut g, reach, x_max, 2, npp)?.energy(x_max, npp);
        let tol = spec.abs_tol.max(spec.rel_tol * fine.abs());
        let cut_err = prev.map_or(f64::INFINITY, |p| (fine - p).abs());
        last = fine;
        last_err = cut_err.max((fine - coarse).abs());
        if last_err <= tol {
            return Ok(fine);
        }
        prev = Some(fine);
        x_max *= 2.0;
    }
    Err(Error::NonConvergence { estimate: last, err_estimate: last_err, panels: 0 })
}

/// G(x) = (1/pi) int_0^inf cos(x y) log(1 + f(-y^2)) dy.
pub fn bw_g(f: &TestFunction, lambda: f64, x: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_lambda(lambda)?;
    spec.validate()?;
    let Some(reach) = left_reach(f) else { return Ok(0.0) };
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let mut g = |y: f64| log_one_plus_f(f, lambda, -y * y);
    let npp = spec.nodes_per_panel;
    let coarse = CosineTransform::build(&mut g, reach, x.abs(), 1, npp)?.eval(x);
    let fine = CosineTransform::build(&mut g, reach, x.abs(), 2, npp)?.eval(x);
    let scale = CosineTransform::build(&mut g, reach, 0.0, 1, npp)?.wg.iter().map(|w| w.abs()).sum::<f64>();
    if (fine - coarse).abs() > spec.abs_tol.max(spec.rel_tol * scale) {
        return Err(Error::NonConvergence { estimate: fine, err_estimate: (fine - coarse).abs(), panels: 0 });
    }
    Ok(fine)
}

pub fn bw_c2(f: &TestFunction, lambda: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_lambda(lambda)?;
    let Some(reach) = left_reach(f) else { return Ok(0.0) };
    if lambda == 0.0 {
        return Ok(0.0);
    }
    cosine_energy(|y| log_one_plus_f(f, lambda, -y * y), reach, spec)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    Ok(())
}

/// 2^{3/4} N^{1/4}; exact under N -> 16 N.
fn mean_prefactor(n: usize) -> f64 {
    2f64.powf(0.75) * (n as f64).sqrt().sqrt()
}

/// Large-N mean of sum F(x_j - sqrt(2N)) over GUE eigenvalues (weight e^{-x^2}).
pub fn shift_mean(f: &TestFunction, n: usize, spec: &QuadratureSpec) -> Result<f64> {
    check_n(n)?;
    let Some(reach) = left_reach(f) else { return Ok(0.0) };
    Ok(mean_prefactor(n) / PI * sqrt_moment(|x| Ok(f.eval(x)), reach, spec)?)
}

/// Large-N variance of the same statistic; independent of N.
pub fn shift_variance(f: &TestFunction, spec: &QuadratureSpec) -> Result<f64> {
    let Some(reach) = left_reach(f) else { return Ok(0.0) };
    Ok(2.0 * cosine_energy(|y| Ok(f.eval(-y * y)), reach, spec)?)
}

pub fn coulomb_s1(f: &TestFunction, lambda: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(-0.5 * lambda * lambda * shift_variance(f, spec)?)
}

pub fn coulomb_s2(f: &TestFunction, lambda: f64, n: usize, spec: &QuadratureSpec) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    Ok(lambda * shift_mean(f, n, spec)?)
}

/// S1 at finite N without the edge reduction: -(lambda^2 / 2) times the
/// semicircle-law variance 1/4 sum_k k a_k^2, where a_k are the Chebyshev
/// coefficients of h(theta) = F(b cos(theta) - b), b = sqrt(2N).
pub fn coulomb_s1_finite_n(f: &TestFunction, lambda: f64, n: usize, spec: &QuadratureSpec) -> Result<f64> {
    check_lambda(lambda)?;
    check_n(n)?;
    spec.validate()?;
    if lambda == 0.0 || f.is_zero() {
        return Ok(0.0);
    }
    let b = (2.0 * n as f64).sqrt();
    let variance_at = |m: usize| -> f64 {
        let pts: Vec<(f64, f64)> = (0..m)
            .filter_map(|j| {
                let c = (PI * (j as f64 + 0.5) / m as f64).cos();
                let h = f.eval(b * c - b);
                (h != 0.0).then_some((c, h))
            })
            .collect();
        // T_k(c) by the three-term recurrence, one column per node
        let mut t_prev: Vec<f64> = vec![1.0; pts.len()];
        let mut t_cur: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let mut total = 0.0;
        for k in 1..m {
            let a_k = 2.0 / m as f64 * pts.iter().zip(&t_cur).map(|(p, t)| p.1 * t).sum::<f64>();
            total += k as f64 * a_k * a_k;
            for (i, p) in pts.iter().enumerate() {
                let next = 2.0 * p.0 * t_cur[i] - t_prev[i];
                t_prev[i] = t_cur[i];
                t_cur[i] = next;
            }
        }
        0.25 * total
    };
    let mut m = 256;
    let mut prev = variance_at(m);
    loop {
        m *= 2;
        let cur = variance_at(m);
        if (cur - prev).abs() <= spec.abs_tol.max(spec.rel_tol * cur.abs()) {
            return Ok(-0.5 * lambda * lambda * cur);
        }
        if m >= 1 << 15 {
            return Err(Error::NonConvergence { estimate: cur, err_estimate: (cur - prev).abs(), panels: m });
        }
        prev = cur;
    }
}

/// S2 at finite N: (lambda/pi) int_{-b}^{b} sqrt(b^2 - x^2) F(x - b) dx with
/// x = b cos(theta).
pub fn coulomb_s2_finite_n(f: &TestFunction, lambda: f64, n: usize, spec: &QuadratureSpec) -> Result<f64> {
    check_lambda(lambda)?;
    check_n(n)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let Some(reach) = left_reach(f) else { return Ok(0.0) };
    let b = (2.0 * n as f64).sqrt();
    // F(-b(1 - cos theta)) vanishes once b(1 - cos theta) > reach^2
    let theta_max = if reach * reach >= 2.0 * b { PI } else { (1.0 - reach * reach / b).acos() };
    let r = integrate_1d(
        |t| {
            let s = t.sin();
            s * s * f.eval(-b * (1.0 - t.cos()))
        },
        Interval::new(0.0, theta_max),
        spec,
    )?;
    Ok(lambda / PI * b * b * r.value)
}

pub fn basor_widom(f: &TestFunction, lambda: f64, gamma: f64, spec: &QuadratureSpec) -> Result<BWResult> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let c1 = bw_c1(f, lambda, spec)?;
    let c2 = bw_c2(f, lambda, spec)?;
    Ok(BWResult { c1, c2, gamma, logdet_prediction: c1 * gamma.powf(1.5) + c2 })
}

/// Nystrom grid covering the support of f(x / gamma) up to where K(x, x) dies.
pub fn bw_grid(f: &TestFunction, gamma: f64, refine: usize) -> Result<NystromGrid> {
    let (lo, hi) = f
        .effective_support()
        .ok_or_else(|| Error::InvalidParameter("test function is identically zero".into()))?;
    let a = (gamma * lo).min(-2.0);
    let b = (gamma * hi).clamp(a + 1.0, KERNEL_RIGHT_CUT);
    let panels = ((b - a) / FREDHOLM_PANEL_WIDTH).ceil() as usize * refine.max(1);
    NystromGrid::composite(a, b, panels, 12)
}

/// log det(I + K fhat) with fhat(x) = exp(-lambda F(x / gamma)) - 1.
pub fn bw_logdet(f: &TestFunction, lambda: f64, gamma: f64, grid: &NystromGrid) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 0.0 || f.is_zero() {
        return Ok(0.0);
    }
    for &x in &grid.nodes {
        log_one_plus_f(f, lambda, x / gamma)?;
    }
    logdet_airy(|x| (-lambda * f.eval(x / gamma)).exp_m1(), grid)
}

/// Least-squares fit of (x, y) pairs to y = p x + q.
fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn bw_scan(f: &TestFunction, lambda: f64, gammas: &[f64], spec: &QuadratureSpec) -> Result<BwScan> {
    if gammas.len() < 2 {
        return Err(Error::InvalidParameter("the gamma scan needs at least two values".into()));
    }
    let mut sorted = gammas.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("gamma values must be distinct".into()));
    }
    let mut rows = Vec::with_capacity(gammas.len());
    let mut c = (0.0, 0.0);
    for &gamma in gammas {
        let pred = basor_widom(f, lambda, gamma, spec)?;
        c = (pred.c1, pred.c2);
        let logdet = if f.is_zero() { 0.0 } else { bw_logdet(f, lambda, gamma, &bw_grid(f, gamma, 1)?)? };
        rows.push(BwRow { gamma, logdet, predicted: pred.logdet_prediction, residual: logdet - pred.logdet_prediction });
    }
    let (c1_fit, c2_fit) = if lambda == 0.0 || f.is_zero() {
        (0.0, 0.0)
    } else {
        line_fit(&rows.iter().map(|r| (r.gamma.powf(1.5), r.logdet)).collect::<Vec<_>>())
    };
    Ok(BwScan { c1: c.0, c2: c.1, c1_fit, c2_fit, rows })
}
