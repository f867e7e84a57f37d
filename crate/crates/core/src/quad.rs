//! Deterministic quadrature: globally adaptive composite Gauss-Legendre and
//! double-exponential (tanh-sinh family) rules, plus iterated 2D integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    GaussLegendre,
    DoubleExponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rule: Rule,
    pub nodes_per_panel: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Replaces -inf for the Gauss-Legendre rule.
    pub left_cut: f64,
    /// Replaces +inf for the Gauss-Legendre rule.
    pub right_cut: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rule: Rule::GaussLegendre,
            nodes_per_panel: 12,
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            left_cut: -60.0,
            right_cut: 60.0,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tol(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_cuts(mut self, left: f64, right: f64) -> Self {
        self.left_cut = left;
        self.right_cut = right;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_panel < 4 || self.nodes_per_panel > 64 {
            return Err(Error::InvalidParameter(format!(
                "nodes_per_panel must lie in [4, 64], got {}",
                self.nodes_per_panel
            )));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.left_cut < self.right_cut) {
            return Err(Error::InvalidParameter("left_cut must be below right_cut".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err_estimate: f64,
    pub panels_used: usize,
}

/// Closed or (half-)infinite interval; use `f64::INFINITY` for open ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn real_line() -> Self {
        Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: Interval,
    pub y: Interval,
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn build_gauss(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Cached n-point Gauss-Legendre rule, 1 <= n <= 128.
pub fn gauss_legendre(n: usize) -> &'static GaussRule {
    static CACHE: [OnceLock<GaussRule>; 129] = [const { OnceLock::new() }; 129];
    assert!((1..=128).contains(&n), "gauss_legendre supports 1..=128 nodes");
    CACHE[n].get_or_init(|| build_gauss(n))
}

/// Composite Gauss-Legendre nodes and weights on [lo, hi] with equal panels.
pub fn panel_rule(lo: f64, hi: f64, panels: usize, nodes_per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let g = gauss_legendre(nodes_per_panel);
    let h = (hi - lo) / panels as f64;
    let mut xs = Vec::with_capacity(panels * nodes_per_panel);
    let mut ws = Vec::with_capacity(panels * nodes_per_panel);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        let mid = a + 0.5 * h;
        for (t, w) in g.nodes.iter().zip(&g.weights) {
            xs.push(mid + 0.5 * h * t);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Pairwise summation in index order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    abs: f64,
    halves: [(f64, f64); 2],
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gl_panel<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64, g: &GaussRule) -> Result<(f64, f64)> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    let mut sa = 0.0;
    for (t, w) in g.nodes.iter().zip(&g.weights) {
        let v = f(mid + half * t)?;
        s += w * v;
        sa += w * v.abs();
    }
    Ok((s * half, sa * half))
}

fn make_panel<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    a: f64,
    b: f64,
    coarse: f64,
    g: &GaussRule,
) -> Result<Panel> {
    let m = 0.5 * (a + b);
    let left = gl_panel(f, a, m, g)?;
    let right = gl_panel(f, m, b, g)?;
    let value = left.0 + right.0;
    Ok(Panel {
        a,
        b,
        value,
        abs: left.1 + right.1,
        halves: [left, right],
        err: (value - coarse).abs(),
    })
}

const MAX_PANELS: usize = 40_000;

/// Globally adaptive composite Gauss-Legendre on a finite interval.
fn adaptive_gl<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, err_estimate: 0.0, panels_used: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let g = gauss_legendre(spec.nodes_per_panel);
    let n0 = ((hi - lo) / 2.0).ceil().clamp(2.0, 1024.0) as usize;
    let h = (hi - lo) / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(2 * n0);
    for i in 0..n0 {
        let pa = lo + i as f64 * h;
        let pb = if i + 1 == n0 { hi } else { lo + (i + 1) as f64 * h };
        let coarse = gl_panel(&mut f, pa, pb, g)?.0;
        heap.push(make_panel(&mut f, pa, pb, coarse, g)?);
    }
    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let abs_total: f64 = heap.iter().map(|p| p.abs).sum();
        let err: f64 = heap.iter().map(|p| p.err).sum();
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs()).max(64.0 * f64::EPSILON * abs_total);
        if !total.is_finite() {
            return Err(Error::NonConvergence { estimate: total, err_estimate: f64::INFINITY, panels: heap.len() });
        }
        if err <= tol {
            break;
        }
        if heap.len() >= MAX_PANELS {
            return Err(Error::NonConvergence { estimate: sign * total, err_estimate: err, panels: heap.len() });
        }
        let worst = heap.pop().expect("non-empty panel set");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            return Err(Error::NonConvergence { estimate: sign * total, err_estimate: err, panels: heap.len() + 1 });
        }
        heap.push(make_panel(&mut f, worst.a, m, worst.halves[0].0, g)?);
        heap.push(make_panel(&mut f, m, worst.b, worst.halves[1].0, g)?);
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let values: Vec<f64> = panels.iter().map(|p| p.value).collect();
    let err = pairwise_sum(&panels.iter().map(|p| p.err).collect::<Vec<_>>());
    Ok(QuadResult { value: sign * pairwise_sum(&values), err_estimate: err, panels_used: panels.len() })
}

/// Variable map x = phi(t) for the double-exponential rule.
#[derive(Clone, Copy)]
enum DeMap {
    Finite { c: f64, d: f64 },
    Right { a: f64 },
    Left { b: f64 },
    Whole,
}

impl DeMap {
    /// (x, dx/dt); None when the node collapses onto an endpoint.
    fn eval(&self, t: f64) -> Option<(f64, f64)> {
        let s = FRAC_PI_2 * t.sinh();
        let ds = FRAC_PI_2 * t.cosh();
        match *self {
            DeMap::Finite { c, d } => {
                // 1 - tanh|s| = 2 / (1 + e^{2|s|}) keeps precision near the ends
                let e = (2.0 * s.abs()).exp();
                let comp = 2.0 / (1.0 + e);
                let x = if s >= 0.0 { c + d * (1.0 - comp) } else { c - d * (1.0 - comp) };
                let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
                let w = d * ds * sech2;
                if d * comp == 0.0 || x <= c - d || x >= c + d || w == 0.0 {
                    None
                } else {
                    Some((x, w))
                }
            }
            DeMap::Right { a } => {
                let e = s.exp();
                let x = a + e;
                if x == a || !x.is_finite() {
                    None
                } else {
                    Some((x, e * ds))
                }
            }
            DeMap::Left { b } => {
                let e = s.exp();
                let x = b - e;
                if x == b || !x.is_finite() {
                    None
                } else {
                    Some((x, e * ds))
                }
            }
            DeMap::Whole => {
                let x = s.sinh();
                if !x.is_finite() {
                    None
                } else {
                    Some((x, s.cosh() * ds))
                }
            }
        }
    }
}

fn double_exponential<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, err_estimate: 0.0, panels_used: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let map = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => DeMap::Finite { c: 0.5 * (lo + hi), d: 0.5 * (hi - lo) },
        (true, false) => DeMap::Right { a: lo },
        (false, true) => DeMap::Left { b: hi },
        (false, false) => DeMap::Whole,
    };
    let t_max = match map {
        DeMap::Finite { .. } => 6.5,
        _ => 4.5,
    };
    let mut eval = |t: f64| -> Result<(f64, f64)> {
        match map.eval(t) {
            Some((x, w)) => {
                let v = f(x)?;
                Ok((v * w, (v * w).abs()))
            }
            None => Ok((0.0, 0.0)),
        }
    };
    // level 0: step 1/2
    let mut h = 0.5;
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let k_max = (t_max / h) as i64;
    for k in -k_max..=k_max {
        let (v, av) = eval(k as f64 * h)?;
        sum += v;
        abs_sum += av;
    }
    let mut prev = sum * h;
    let mut points = (2 * k_max + 1) as usize;
    for level in 1..=10 {
        h *= 0.5;
        let k_max = (t_max / h) as i64;
        let mut k = -k_max;
        if k % 2 == 0 {
            k += 1;
        }
        while k <= k_max {
            let (v, av) = eval(k as f64 * h)?;
            sum += v;
            abs_sum += av;
            points += 1;
            k += 2;
        }
        let cur = sum * h;
        let err = (cur - prev).abs();
        let tol = spec.abs_tol.max(spec.rel_tol * cur.abs()).max(64.0 * f64::EPSILON * abs_sum * h);
        if !cur.is_finite() {
            return Err(Error::NonConvergence { estimate: cur, err_estimate: f64::INFINITY, panels: points });
        }
        if level >= 3 && err <= tol {
            return Ok(QuadResult { value: sign * cur, err_estimate: err, panels_used: points });
        }
        prev = cur;
    }
    Err(Error::NonConvergence { estimate: sign * prev, err_estimate: f64::NAN, panels: points })
}

fn truncate(domain: Interval, spec: &QuadratureSpec) -> (f64, f64) {
    let lo = if domain.lo.is_finite() { domain.lo } else { spec.left_cut };
    let hi = if domain.hi.is_finite() { domain.hi } else { spec.right_cut };
    (lo, hi)
}

pub(crate) fn integrate_1d_fallible<F: FnMut(f64) -> Result<f64>>(
    f: F,
    domain: Interval,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    spec.validate()?;
    if domain.lo > domain.hi {
        let r = integrate_1d_fallible(f, Interval::new(domain.hi, domain.lo), spec)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }
    match spec.rule {
        Rule::GaussLegendre => {
            let (lo, hi) = truncate(domain, spec);
            if lo >= hi {
                return Ok(QuadResult { value: 0.0, err_estimate: 0.0, panels_used: 0 });
            }
            adaptive_gl(f, lo, hi, spec)
        }
        Rule::DoubleExponential => double_exponential(f, domain.lo, domain.hi, spec),
    }
}

/// Integral of `f` over `domain`.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, domain: Interval, spec: &QuadratureSpec) -> Result<QuadResult> {
    integrate_1d_fallible(|x| Ok(f(x)), domain, spec)
}

fn inner_spec(spec: &QuadratureSpec) -> QuadratureSpec {
    QuadratureSpec { abs_tol: spec.abs_tol * 0.1, rel_tol: spec.rel_tol * 0.1, ..*spec }
}

/// Iterated integral of `f(x, y)` over a rectangle.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(f: F, domain: Rect, spec: &QuadratureSpec) -> Result<QuadResult> {
    let inner = inner_spec(spec);
    let mut inner_err = 0.0f64;
    let mut inner_panels = 0;
    let outer = integrate_1d_fallible(
        |x| {
            let r = integrate_1d(|y| f(x, y), domain.y, &inner)?;
            inner_err = inner_err.max(r.err_estimate);
            inner_panels += r.panels_used;
            Ok(r.value)
        },
        domain.x,
        spec,
    )?;
    let (lo, hi) = truncate(domain.x, spec);
    let width = if spec.rule == Rule::GaussLegendre { hi - lo } else { 1.0 };
    Ok(QuadResult {
        value: outer.value,
        err_estimate: outer.err_estimate + inner_err * width.abs(),
        panels_used: outer.panels_used + inner_panels,
    })
}

/// Integral of sgn(y - x) f(x, y) over a rectangle, splitting each inner
/// integral at the diagonal.
pub fn sign_weighted_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    domain: Rect,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let inner = inner_spec(spec);
    let mut inner_err = 0.0f64;
    let mut inner_panels = 0;
    let outer = integrate_1d_fallible(
        |x| {
            let split = x.clamp(domain.y.lo, domain.y.hi);
            let below = integrate_1d(|y| f(x, y), Interval::new(domain.y.lo, split), &inner)?;
            let above = integrate_1d(|y| f(x, y), Interval::new(split, domain.y.hi), &inner)?;
            inner_err = inner_err.max(below.err_estimate + above.err_estimate);
            inner_panels += below.panels_used + above.panels_used;
            Ok(above.value - below.value)
        },
        domain.x,
        spec,
    )?;
    let (lo, hi) = truncate(domain.x, spec);
    let width = if spec.rule == Rule::GaussLegendre { hi - lo } else { 1.0 };
    Ok(QuadResult {
        value: outer.value,
        err_estimate: outer.err_estimate + inner_err * width.abs(),
        panels_used: outer.panels_used + inner_panels,
    })
}
