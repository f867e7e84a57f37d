//! Airy kernel, its L-transform, finite-N Hermite/Laguerre kernels and the
//! edge-scaled versions of those kernels.

use std::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quad::{integrate_1d, integrate_1d_fallible, Interval, QuadratureSpec};
use crate::specfun::{airy_all, airy_primitive, log_gamma, AiryValues};

/// Below this separation kernels switch to their diagonal-safe branch.
pub const DIAGONAL_DELTA: f64 = 1e-4;

// ---------------------------------------------------------------------------
// ensembles

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Laguerre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Beta {
    One,
    Two,
    Four,
}

impl Beta {
    pub fn value(self) -> f64 {
        match self {
            Beta::One => 1.0,
            Beta::Two => 2.0,
            Beta::Four => 4.0,
        }
    }
}

/// One of the six ensembles: weight family, symmetry class and the Laguerre
/// exponent (ignored for the Gaussian family).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleKind {
    pub family: Family,
    pub beta: Beta,
    pub alpha: f64,
}

impl EnsembleKind {
    pub fn gue() -> Self {
        EnsembleKind { family: Family::Gaussian, beta: Beta::Two, alpha: 0.0 }
    }
    pub fn gse() -> Self {
        EnsembleKind { family: Family::Gaussian, beta: Beta::Four, alpha: 0.0 }
    }
    pub fn goe() -> Self {
        EnsembleKind { family: Family::Gaussian, beta: Beta::One, alpha: 0.0 }
    }
    pub fn lue(alpha: f64) -> Self {
        EnsembleKind { family: Family::Laguerre, beta: Beta::Two, alpha }
    }
    pub fn lse(alpha: f64) -> Self {
        EnsembleKind { family: Family::Laguerre, beta: Beta::Four, alpha }
    }
    pub fn loe(alpha: f64) -> Self {
        EnsembleKind { family: Family::Laguerre, beta: Beta::One, alpha }
    }

    /// Parses "gue", "gse", "goe", "lue", "lse", "loe" (case-insensitive).
    pub fn parse(name: &str, alpha: f64) -> Result<Self> {
        let k = match name.to_ascii_lowercase().as_str() {
            "gue" => Self::gue(),
            "gse" => Self::gse(),
            "goe" => Self::goe(),
            "lue" => Self::lue(alpha),
            "lse" => Self::lse(alpha),
            "loe" => Self::loe(alpha),
            other => return Err(Error::InvalidParameter(format!("unknown ensemble '{other}'"))),
        };
        k.validate()?;
        Ok(k)
    }

    pub fn name(&self) -> &'static str {
        match (self.family, self.beta) {
            (Family::Gaussian, Beta::Two) => "GUE",
            (Family::Gaussian, Beta::Four) => "GSE",
            (Family::Gaussian, Beta::One) => "GOE",
            (Family::Laguerre, Beta::Two) => "LUE",
            (Family::Laguerre, Beta::Four) => "LSE",
            (Family::Laguerre, Beta::One) => "LOE",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == Family::Laguerre {
            let (ok, bound) = match self.beta {
                Beta::Two => (self.alpha > -1.0, "> -1"),
                Beta::Four => (self.alpha > 0.0, "> 0"),
                Beta::One => (self.alpha > -2.0, "> -2"),
            };
            if !ok || !self.alpha.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "alpha must be {bound} for {}, got {}",
                    self.name(),
                    self.alpha
                )));
            }
        }
        Ok(())
    }

    /// Checks N against the ensemble (N >= 1; orthogonal ensembles need even N).
    pub fn validate_n(&self, n: usize) -> Result<()> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidParameter("matrix size N must be at least 1".into()));
        }
        if self.beta == Beta::One && n % 2 == 1 {
            return Err(Error::InvalidParameter(format!("{} requires even N, got {n}", self.name())));
        }
        Ok(())
    }
}

/// Affine map between the spectrum edge and the Airy coordinate:
/// xi = stat_scale * (x - center).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeScaling {
    pub center: f64,
    pub stat_scale: f64,
}

impl EdgeScaling {
    pub fn new(kind: EnsembleKind, n: usize) -> Result<Self> {
        kind.validate()?;
        if n == 0 {
            return Err(Error::InvalidParameter("matrix size N must be at least 1".into()));
        }
        let nf = n as f64;
        let a = kind.alpha;
        let (center, stat_scale) = match (kind.family, kind.beta) {
            (Family::Gaussian, Beta::Two) | (Family::Gaussian, Beta::One) => {
                ((2.0 * nf).sqrt(), 2f64.sqrt() * nf.powf(1.0 / 6.0))
            }
            (Family::Gaussian, Beta::Four) => ((4.0 * nf).sqrt(), 2f64.powf(2.0 / 3.0) * nf.powf(1.0 / 6.0)),
            (Family::Laguerre, Beta::Two) => {
                (4.0 * nf + 2.0 * a + 2.0, 2f64.powf(-4.0 / 3.0) * nf.powf(-1.0 / 3.0))
            }
            (Family::Laguerre, Beta::Four) => (8.0 * nf + 2.0 * a, 2f64.powf(-5.0 / 3.0) * nf.powf(-1.0 / 3.0)),
            (Family::Laguerre, Beta::One) => {
                (4.0 * nf + 2.0 * a + 4.0, 2f64.powf(-4.0 / 3.0) * nf.powf(-1.0 / 3.0))
            }
        };
        Ok(EdgeScaling { center, stat_scale })
    }

    /// Edge coordinate of a spectral point.
    pub fn to_edge(&self, x: f64) -> f64 {
        self.stat_scale * (x - self.center)
    }

    /// Spectral point of an edge coordinate.
    pub fn from_edge(&self, xi: f64) -> f64 {
        self.center + xi / self.stat_scale
    }
}

// ---------------------------------------------------------------------------
// Airy kernel

fn kernel_from_values(x: f64, vx: &AiryValues, y: f64, vy: &AiryValues) -> f64 {
    if x == y {
        return vx.aip * vx.aip - x * vx.ai * vx.ai;
    }
    if (x - y).abs() < DIAGONAL_DELTA {
        return kernel_near_diagonal(x, y);
    }
    (vx.ai * vy.aip - vy.ai * vx.aip) / (x - y)
}

// second-order expansion about the midpoint
fn kernel_near_diagonal(x: f64, y: f64) -> f64 {
    let m = 0.5 * (x + y);
    let d = 0.5 * (y - x);
    let v = airy_all(m);
    let (f0, f1) = (v.ai, v.aip);
    let f2 = m * f0;
    let f3 = f0 + m * f1;
    let (g0, g1, g2, g3) = (f1, f2, f3, 2.0 * f1 + m * m * f0);
    let lead = -(f0 * g1 - f1 * g0);
    let second = (f0 * g3 - f3 * g0) / 6.0 + (f2 * g1 - f1 * g2) / 2.0;
    lead - d * d * second
}

/// K(x, y) = [Ai(x)Ai'(y) - Ai(y)Ai'(x)] / (x - y).
pub fn airy_kernel(x: f64, y: f64) -> f64 {
    kernel_from_values(x, &airy_all(x), y, &airy_all(y))
}

/// Airy kernel from precomputed Airy values.
pub fn airy_kernel_with(x: f64, vx: &AiryValues, y: f64, vy: &AiryValues) -> f64 {
    kernel_from_values(x, vx, y, vy)
}

/// Where Ai(s) has dropped below 1e-18 relative to O(1).
const AIRY_RIGHT_CUT: f64 = 16.0;

fn kernel_quad_spec() -> QuadratureSpec {
    QuadratureSpec::default().with_tol(1e-14, 1e-13)
}

/// Integral of Ai(x+t)Ai(y+t) over t >= 0.
pub fn airy_kernel_factorized(x: f64, y: f64) -> Result<f64> {
    let t_max = (AIRY_RIGHT_CUT - x.min(y)).max(1.0);
    let r = integrate_1d(
        |t| {
            crate::specfun::airy_ai(x + t) * crate::specfun::airy_ai(y + t)
        },
        Interval::new(0.0, t_max),
        &kernel_quad_spec(),
    )?;
    Ok(r.value)
}

/// L(x, y) = -integral of Ai(y+t) B(x+t) over t >= 0.
pub fn l_function(x: f64, y: f64) -> Result<f64> {
    let t_max = (AIRY_RIGHT_CUT - y).max(1.0);
    let r = integrate_1d_fallible(
        |t| {
            let b = 2.0 * airy_primitive(x + t) - 1.0;
            Ok(crate::specfun::airy_ai(y + t) * b)
        },
        Interval::new(0.0, t_max),
        &kernel_quad_spec(),
    )?;
    Ok(-r.value)
}

/// L on the diagonal has the closed form -(1 - B(x)^2)/4.
pub fn l_diagonal(x: f64) -> f64 {
    let b = airy_all(x).b();
    -(1.0 - b * b) / 4.0
}

/// Matrix L(xs[i], ys[j]) from one shared t-rule, as a product of two
/// sampled factor matrices.
pub fn l_matrix(xs: &[f64], ys: &[f64]) -> DMatrix<f64> {
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = (AIRY_RIGHT_CUT - y_min).max(1.0);
    let panels = (t_max / 0.5).ceil() as usize;
    let (ts, ws) = crate::quad::panel_rule(0.0, t_max, panels, 16);
    let bx = DMatrix::from_fn(xs.len(), ts.len(), |i, k| ws[k] * airy_all(xs[i] + ts[k]).b());
    let ay = DMatrix::from_fn(ys.len(), ts.len(), |j, k| crate::specfun::airy_ai(ys[j] + ts[k]));
    -(bx * ay.transpose())
}

// ---------------------------------------------------------------------------
// wavefunctions

const RESCALE_AT: f64 = 1e150;
const RESCALE_BY: f64 = 1e-150;
const RESCALE_LOG: f64 = 150.0 * std::f64::consts::LN_10;

#[derive(Debug, Clone, Copy)]
enum WaveFamily {
    Hermite,
    Laguerre { a: f64 },
}

/// Normalized three-term recurrence for phi_j(x), carried as
/// mantissa * exp(log_scale) so that large j neither overflows nor underflows.
#[derive(Debug, Clone)]
struct Wave {
    family: WaveFamily,
    x: f64,
    j: usize,
    prev: f64,
    cur: f64,
    log_scale: f64,
}

impl Wave {
    fn hermite(x: f64) -> Self {
        Wave {
            family: WaveFamily::Hermite,
            x,
            j: 0,
            prev: 0.0,
            cur: PI.powf(-0.25),
            log_scale: -0.5 * x * x,
        }
    }

    /// Orthonormal x^{a/2} e^{-x/2} L_j^{(a)}(x) on (0, inf).
    fn laguerre(a: f64, x: f64) -> Result<Self> {
        if !(a > -1.0) {
            return Err(Error::InvalidParameter(format!("Laguerre parameter must exceed -1, got {a}")));
        }
        let half = 0.5 * a;
        let lg = log_gamma(a + 1.0)?;
        let (cur, log_scale) = if x > 0.0 {
            (1.0, -0.5 * lg + half * x.ln() - 0.5 * x)
        } else if half.fract() == 0.0 {
            // integer power: x^{a/2} is defined for x <= 0
            let m = half as i32;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            if x == 0.0 {
                (if m == 0 { 1.0 } else { 0.0 }, -0.5 * lg)
            } else {
                (sign, -0.5 * lg + half * (-x).ln() - 0.5 * x)
            }
        } else {
            return Err(Error::Domain(format!(
                "Laguerre wavefunction with alpha/2 = {half} is undefined at x = {x}"
            )));
        };
        Ok(Wave { family: WaveFamily::Laguerre { a }, x, j: 0, prev: 0.0, cur, log_scale })
    }

    fn advance(&mut self) {
        let j = self.j as f64;
        let next = match self.family {
            WaveFamily::Hermite => {
                (2.0 / (j + 1.0)).sqrt() * self.x * self.cur - (j / (j + 1.0)).sqrt() * self.prev
            }
            WaveFamily::Laguerre { a } => {
                ((2.0 * j + a + 1.0 - self.x) * self.cur - (j * (j + a)).sqrt() * self.prev)
                    / ((j + 1.0) * (j + a + 1.0)).sqrt()
            }
        };
        self.prev = self.cur;
        self.cur = next;
        self.j += 1;
        if self.cur.abs() > RESCALE_AT {
            self.cur *= RESCALE_BY;
            self.prev *= RESCALE_BY;
            self.log_scale += RESCALE_LOG;
        }
    }

    fn value(&self) -> f64 {
        scaled(self.cur, self.log_scale)
    }
}

fn scaled(m: f64, log_scale: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else {
        m * log_scale.exp()
    }
}

/// Wavefunction values phi_{n}, phi_{n-1}, phi_{n-2} sharing one log scale.
#[derive(Debug, Clone, Copy)]
struct TopThree {
    m: [f64; 3],
    log_scale: f64,
}

fn top_three(mut w: Wave, n: usize) -> TopThree {
    let mut m = [0.0; 3];
    // m[0] = phi_n, m[1] = phi_{n-1}, m[2] = phi_{n-2}
    let mut before_prev = 0.0;
    let mut log_at_bp = w.log_scale;
    while w.j < n {
        before_prev = w.prev;
        log_at_bp = w.log_scale;
        w.advance();
    }
    // rescaling may have happened on the last step
    let adj = (log_at_bp - w.log_scale).exp();
    m[0] = w.cur;
    m[1] = w.prev;
    m[2] = if n >= 2 { before_prev * adj } else { 0.0 };
    TopThree { m, log_scale: w.log_scale }
}

/// Orthonormal Hermite function phi_j(x) = H_j(x) e^{-x^2/2} / (pi^{1/4} 2^{j/2} sqrt(j!)).
pub fn phi_hermite(j: usize, x: f64) -> f64 {
    let mut w = Wave::hermite(x);
    while w.j < j {
        w.advance();
    }
    w.value()
}

/// Orthonormal Laguerre function sqrt(j!/Gamma(j+alpha+1)) L_j^{(alpha)}(x) x^{alpha/2} e^{-x/2}.
pub fn phi_laguerre(j: usize, alpha: f64, x: f64) -> Result<f64> {
    let mut w = Wave::laguerre(alpha, x)?;
    while w.j < j {
        w.advance();
    }
    Ok(w.value())
}

/// Sum_{j<n} phi_j(x) phi_j(y) accumulated term by term.
fn direct_sum(mut wx: Wave, mut wy: Wave, n: usize) -> f64 {
    let mut sum = 0.0;
    let mut factor = (wx.log_scale + wy.log_scale).exp();
    let mut last_log = wx.log_scale + wy.log_scale;
    for j in 0..n {
        if j > 0 {
            wx.advance();
            wy.advance();
            let l = wx.log_scale + wy.log_scale;
            if l != last_log {
                factor = l.exp();
                last_log = l;
            }
        }
        sum += wx.cur * wy.cur * factor;
    }
    sum
}

fn hermite_cd(n: usize, x: f64, y: f64) -> f64 {
    let nf = n as f64;
    if x == y {
        let t = top_three(Wave::hermite(x), n);
        let [p0, p1, p2] = t.m;
        let v = nf * p1 * p1 - (nf * (nf - 1.0)).sqrt() * p0 * p2;
        return v * (2.0 * t.log_scale).exp();
    }
    if (x - y).abs() < DIAGONAL_DELTA {
        return direct_sum(Wave::hermite(x), Wave::hermite(y), n);
    }
    let tx = top_three(Wave::hermite(x), n);
    let ty = top_three(Wave::hermite(y), n);
    let num = tx.m[0] * ty.m[1] - tx.m[1] * ty.m[0];
    (nf / 2.0).sqrt() * num * (tx.log_scale + ty.log_scale).exp() / (x - y)
}

fn laguerre_cd(n: usize, a: f64, x: f64, y: f64) -> Result<f64> {
    let nf = n as f64;
    let c = (nf * (nf + a)).sqrt();
    if x == y {
        let t = top_three(Wave::laguerre(a, x)?, n);
        let [p0, p1, p2] = t.m;
        let inner = p0 * p1 - c * p1 * p1 + ((nf - 1.0) * (nf + a - 1.0)).max(0.0).sqrt() * p0 * p2;
        return Ok(-c / x * inner * (2.0 * t.log_scale).exp());
    }
    if (x - y).abs() < DIAGONAL_DELTA {
        return Ok(direct_sum(Wave::laguerre(a, x)?, Wave::laguerre(a, y)?, n));
    }
    let tx = top_three(Wave::laguerre(a, x)?, n);
    let ty = top_three(Wave::laguerre(a, y)?, n);
    let num = tx.m[0] * ty.m[1] - tx.m[1] * ty.m[0];
    Ok(-c * num * (tx.log_scale + ty.log_scale).exp() / (x - y))
}

/// Hermite kernel Sum_{j<N} phi_j(x) phi_j(y) by the Christoffel-Darboux formula.
pub fn cd_kernel_hermite(n: usize, x: f64, y: f64) -> f64 {
    assert!(n >= 1, "cd_kernel_hermite needs N >= 1");
    hermite_cd(n, x, y)
}

/// Hermite kernel by direct summation.
pub fn sum_kernel_hermite(n: usize, x: f64, y: f64) -> f64 {
    direct_sum(Wave::hermite(x), Wave::hermite(y), n)
}

fn check_positive(x: f64, y: f64) -> Result<()> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::Domain(format!("Laguerre kernels need positive arguments, got ({x}, {y})")));
    }
    Ok(())
}

/// Laguerre kernel Sum_{j<N} phi_j(x) phi_j(y) by the Christoffel-Darboux formula.
pub fn cd_kernel_laguerre(n: usize, alpha: f64, x: f64, y: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    check_positive(x, y)?;
    laguerre_cd(n, alpha, x, y)
}

/// Laguerre kernel by direct summation.
pub fn sum_kernel_laguerre(n: usize, alpha: f64, x: f64, y: f64) -> Result<f64> {
    check_positive(x, y)?;
    Ok(direct_sum(Wave::laguerre(alpha, x)?, Wave::laguerre(alpha, y)?, n))
}

/// S_N^{(4)}(x, y) = x Sum_{j=0}^{2N} phi_j(x) phi_j(y) with the weight
/// x^{alpha/2 - 1} e^{-x/2} wavefunctions, by direct summation.
pub fn s_kernel_lse(n: usize, alpha: f64, x: f64, y: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be > 0 for LSE, got {alpha}")));
    }
    check_positive(x, y)?;
    let s = direct_sum(Wave::laguerre(alpha - 1.0, x)?, Wave::laguerre(alpha - 1.0, y)?, 2 * n + 1);
    Ok((x / y).sqrt() * s)
}

/// S_N^{(1)}(x, y) = x Sum_{j<N} phi_j(x) phi_j(y) with the weight
/// x^{alpha/2} e^{-x/2} wavefunctions, by direct summation.
pub fn s_kernel_loe(n: usize, alpha: f64, x: f64, y: f64) -> Result<f64> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::InvalidParameter(format!("LOE kernel needs even N >= 2, got {n}")));
    }
    if !(alpha > -2.0) {
        return Err(Error::InvalidParameter(format!("alpha must be > -2 for LOE, got {alpha}")));
    }
    check_positive(x, y)?;
    let s = direct_sum(Wave::laguerre(alpha + 1.0, x)?, Wave::laguerre(alpha + 1.0, y)?, n);
    Ok((x / y).sqrt() * s)
}

// ---------------------------------------------------------------------------
// edge scaling

/// Which finite-N kernel realizes the ensemble's edge, as (family, size, parameter).
#[derive(Debug, Clone, Copy)]
enum EdgeKernel {
    Hermite(usize),
    /// sqrt(x/y) times the Laguerre kernel with this many terms and parameter
    Laguerre { terms: usize, a: f64, tilt: bool },
}

fn edge_kernel(kind: EnsembleKind, n: usize) -> Result<EdgeKernel> {
    kind.validate_n(n)?;
    Ok(match (kind.family, kind.beta) {
        (Family::Gaussian, Beta::Two) | (Family::Gaussian, Beta::One) => EdgeKernel::Hermite(n),
        (Family::Gaussian, Beta::Four) => EdgeKernel::Hermite(2 * n + 1),
        (Family::Laguerre, Beta::Two) => EdgeKernel::Laguerre { terms: n, a: kind.alpha, tilt: false },
        (Family::Laguerre, Beta::Four) => EdgeKernel::Laguerre { terms: 2 * n + 1, a: kind.alpha - 1.0, tilt: true },
        (Family::Laguerre, Beta::One) => EdgeKernel::Laguerre { terms: n, a: kind.alpha + 1.0, tilt: true },
    })
}

/// Finite-N kernel of the ensemble in edge coordinates; tends to the Airy kernel.
pub fn scaled_edge_kernel(kind: EnsembleKind, n: usize, x: f64, y: f64) -> Result<f64> {
    let sc = EdgeScaling::new(kind, n)?;
    let (u, v) = (sc.from_edge(x), sc.from_edge(y));
    let pref = 1.0 / sc.stat_scale;
    let k = match (kind.family, kind.beta) {
        (Family::Gaussian, Beta::Four) => cd_kernel_hermite(2 * n + 1, u, v),
        (Family::Gaussian, _) => {
            kind.validate_n(n)?;
            cd_kernel_hermite(n, u, v)
        }
        (Family::Laguerre, Beta::Two) => cd_kernel_laguerre(n, kind.alpha, u, v)?,
        (Family::Laguerre, Beta::Four) => s_kernel_lse(n, kind.alpha, u, v)?,
        (Family::Laguerre, Beta::One) => s_kernel_loe(n, kind.alpha, u, v)?,
    };
    Ok(pref * k)
}

/// Edge-scaled finite-N kernel on a node set, row-major `m x m`.
/// Wavefunctions are computed once per node and paired by the
/// Christoffel-Darboux formula.
pub fn scaled_kernel_matrix(kind: EnsembleKind, n: usize, nodes: &[f64]) -> Result<DMatrix<f64>> {
    let sc = EdgeScaling::new(kind, n)?;
    let ek = edge_kernel(kind, n)?;
    let pref = 1.0 / sc.stat_scale;
    let us: Vec<f64> = nodes.iter().map(|&x| sc.from_edge(x)).collect();
    let m = nodes.len();
    let mut out = DMatrix::zeros(m, m);
    match ek {
        EdgeKernel::Hermite(terms) => {
            let tops: Vec<TopThree> = us.iter().map(|&u| top_three(Wave::hermite(u), terms)).collect();
            let c = (terms as f64 / 2.0).sqrt();
            for i in 0..m {
                for j in 0..m {
                    let v = if i == j || (us[i] - us[j]).abs() < DIAGONAL_DELTA {
                        hermite_cd(terms, us[i], us[j])
                    } else {
                        let (a, b) = (&tops[i], &tops[j]);
                        c * (a.m[0] * b.m[1] - a.m[1] * b.m[0]) * (a.log_scale + b.log_scale).exp() / (us[i] - us[j])
                    };
                    out[(i, j)] = pref * v;
                }
            }
        }
        EdgeKernel::Laguerre { terms, a, tilt } => {
            for &u in &us {
                if !(u > 0.0) {
                    return Err(Error::Domain(format!("edge window maps to non-positive Laguerre argument {u}")));
                }
            }
            let tops = us
                .iter()
                .map(|&u| Ok(top_three(Wave::laguerre(a, u)?, terms)))
                .collect::<Result<Vec<_>>>()?;
            let nf = terms as f64;
            let c = (nf * (nf + a)).sqrt();
            for i in 0..m {
                for j in 0..m {
                    let v = if i == j || (us[i] - us[j]).abs() < DIAGONAL_DELTA {
                        laguerre_cd(terms, a, us[i], us[j])?
                    } else {
                        let (p, q) = (&tops[i], &tops[j]);
                        -c * (p.m[0] * q.m[1] - p.m[1] * q.m[0]) * (p.log_scale + q.log_scale).exp() / (us[i] - us[j])
                    };
                    let t = if tilt { (us[i] / us[j]).sqrt() } else { 1.0 };
                    out[(i, j)] = pref * t * v;
                }
            }
        }
    }
    Ok(out)
}

/// Edge-scaled orthonormal wavefunctions phi_0..phi_{N-1} of the unitary
/// kernel at each node, times sqrt(1/stat_scale): rows are nodes.
pub fn scaled_wavefunctions(kind: EnsembleKind, n: usize, nodes: &[f64]) -> Result<DMatrix<f64>> {
    let sc = EdgeScaling::new(kind, n)?;
    let ek = edge_kernel(kind, n)?;
    let root = (1.0 / sc.stat_scale).sqrt();
    let (terms, tilt_a) = match ek {
        EdgeKernel::Hermite(t) => (t, None),
        EdgeKernel::Laguerre { terms, a, tilt } => {
            if tilt {
                return Err(Error::InvalidParameter("wavefunction basis only for unitary-type kernels".into()));
            }
            (terms, Some(a))
        }
    };
    let mut out = DMatrix::zeros(nodes.len(), terms);
    for (i, &x) in nodes.iter().enumerate() {
        let u = sc.from_edge(x);
        let mut w = match tilt_a {
            None => Wave::hermite(u),
            Some(a) => {
                if !(u > 0.0) {
                    return Err(Error::Domain(format!("edge window maps to non-positive Laguerre argument {u}")));
                }
                Wave::laguerre(a, u)?
            }
        };
        for j in 0..terms {
            if j > 0 {
                w.advance();
            }
            out[(i, j)] = root * w.value();
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// epsilon transform and wavefunction limits

/// (eps phi)(x) = (1/2)(integral of phi over (-inf, x] - integral over [x, inf)),
/// with phi negligible outside `support`.
pub fn eps_transform<F: Fn(f64) -> f64>(phi: F, x: f64, support: (f64, f64), spec: &QuadratureSpec) -> Result<f64> {
    let (lo, hi) = support;
    let left = if x > lo { integrate_1d(&phi, Interval::new(lo, x.min(hi)), spec)?.value } else { 0.0 };
    let right = if x < hi { integrate_1d(&phi, Interval::new(x.max(lo), hi), spec)?.value } else { 0.0 };
    Ok(0.5 * (left - right))
}

/// Integral of phi_n (Hermite) over the real line: zero for odd n and
/// sqrt(2) pi^{1/4} sqrt(n!) / (2^{n/2} (n/2)!) for even n.
pub fn hermite_wave_integral(n: usize) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let k = (n / 2) as f64;
    let nf = n as f64;
    let l = 0.5 * LN_2 + 0.25 * PI.ln() + 0.5 * libm::lgamma(nf + 1.0) - k * LN_2 - libm::lgamma(k + 1.0);
    l.exp()
}

/// Integral over (0, inf) of phi_n^{(a)}(x) / sqrt(x), the Laguerre
/// wavefunction with weight x^{(a-1)/2} e^{-x/2}: zero for odd n.
pub fn laguerre_half_wave_integral(n: usize, a: f64) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let k = (n / 2) as f64;
    let nf = n as f64;
    let h = 0.5 * (a + 1.0);
    let l = 0.5 * (libm::lgamma(nf + 1.0) - libm::lgamma(nf + a + 1.0)) + h * LN_2 + libm::lgamma(k + h)
        - libm::lgamma(k + 1.0);
    l.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveLimit {
    PhiTop,
    PhiNext,
    EpsTop,
    EpsNext,
}

/// Finite-N scaled wavefunction (or its eps-transform) at edge coordinate `x`,
/// paired with the limit stated for it: `(value, predicted_limit)`.
///
/// "top" is the highest-index wavefunction of the kernel (phi_{2N+1} for the
/// symplectic ensembles, phi_N for the orthogonal ones), "next" the one below.
pub fn edge_wavefunction_limit(kind: EnsembleKind, which: WaveLimit, n: usize, x: f64) -> Result<(f64, f64)> {
    let (value, _, predicted) = wave_limit_parts(kind, which, n, x)?;
    Ok((value, predicted))
}

/// As [`edge_wavefunction_limit`], but the prediction for the eps-transforms
/// keeps the constant that separates even and odd index: c AI(x) for even,
/// c (AI(x) - 1) for odd index, with c twice the stated B prefactor.
pub fn edge_eps_limit_with_offset(kind: EnsembleKind, which: WaveLimit, n: usize, x: f64) -> Result<(f64, f64)> {
    let (value, offset, predicted) = wave_limit_parts(kind, which, n, x)?;
    Ok((value, predicted + offset))
}

fn wave_limit_parts(kind: EnsembleKind, which: WaveLimit, n: usize, x: f64) -> Result<(f64, f64, f64)> {
    kind.validate_n(n)?;
    if n < 10 {
        return Err(Error::InvalidParameter(format!("wavefunction limits need N >= 10, got {n}")));
    }
    let nf = n as f64;
    let sc = EdgeScaling::new(kind, n)?;
    let u = sc.from_edge(x);
    let top = matches!(which, WaveLimit::PhiTop | WaveLimit::EpsTop);
    let eps = matches!(which, WaveLimit::EpsTop | WaveLimit::EpsNext);
    // (index, phi prefactor with sign, B prefactor with sign)
    let (index, phi_pref, b_pref, laguerre_a) = match (kind.family, kind.beta) {
        (Family::Gaussian, Beta::Four) => {
            let idx = if top { 2 * n + 1 } else { 2 * n };
            (idx, 2f64.powf(1.0 / 6.0) * nf.powf(-1.0 / 12.0), 2f64.powf(-1.5) * nf.powf(-0.25), None)
        }
        (Family::Gaussian, Beta::One) => {
            let idx = if top { n } else { n - 1 };
            (idx, 2f64.powf(0.25) * nf.powf(-1.0 / 12.0), 2f64.powf(-1.25) * nf.powf(-0.25), None)
        }
        (Family::Laguerre, Beta::Four) => {
            let idx = if top { 2 * n + 1 } else { 2 * n };
            let s = if top { -1.0 } else { 1.0 };
            (
                idx,
                s * 2f64.powf(-13.0 / 6.0) * nf.powf(-5.0 / 6.0),
                s * 2f64.powf(-1.5) * nf.powf(-0.5),
                Some(kind.alpha - 1.0),
            )
        }
        (Family::Laguerre, Beta::One) => {
            let idx = if top { n } else { n - 1 };
            let s = if top { 1.0 } else { -1.0 };
            (idx, s * 2f64.powf(-4.0 / 3.0) * nf.powf(-5.0 / 6.0), s * 0.5 * nf.powf(-0.5), Some(kind.alpha + 1.0))
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "{} has no wavefunction limit theorem; use GSE, GOE, LSE or LOE",
                kind.name()
            )))
        }
    };
    // Laguerre wavefunctions in the x^{alpha/2} normalisation carry an extra 1/sqrt(x)
    let phi = |t: f64| -> f64 {
        match laguerre_a {
            None => phi_hermite(index, t),
            Some(a) => {
                if t <= 0.0 {
                    0.0
                } else {
                    phi_laguerre(index, a, t).unwrap_or(0.0) / t.sqrt()
                }
            }
        }
    };
    let v = airy_all(x);
    if !eps {
        return Ok((phi(u), 0.0, phi_pref * v.ai));
    }
    let total = match laguerre_a {
        None => hermite_wave_integral(index),
        Some(a) => laguerre_half_wave_integral(index, a),
    };
    let hi = sc.from_edge(x.max(0.0) + 24.0);
    let spec = QuadratureSpec::default().with_tol(1e-15, 1e-12);
    let tail = integrate_1d(phi, Interval::new(u, hi), &spec)?.value;
    let value = 0.5 * total - tail;
    let offset = if index % 2 == 0 { b_pref } else { -b_pref };
    Ok((value, offset, b_pref * v.b()))
}

/// Sup over a tensor grid of |scaled_edge_kernel - airy_kernel|.
pub fn edge_kernel_sup_error(kind: EnsembleKind, n: usize, grid: &[f64]) -> Result<f64> {
    let k = scaled_kernel_matrix(kind, n, grid)?;
    let vals: Vec<AiryValues> = grid.iter().map(|&x| airy_all(x)).collect();
    let mut sup = 0.0f64;
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let a = kernel_from_values(grid[i], &vals[i], grid[j], &vals[j]);
            sup = sup.max((k[(i, j)] - a).abs());
        }
    }
    Ok(sup)
}

/// Edge grid for rate checks: [-4, 2] in steps of 1/2.
pub fn default_rate_grid() -> Vec<f64> {
    (0..13).map(|i| -4.0 + 0.5 * i as f64).collect()
}

/// Least-squares slope of log(err) against log(N).
pub fn rate_slope(ns: &[usize], errs: &[f64]) -> Result<f64> {
    if ns.len() != errs.len() || ns.len() < 2 {
        return Err(Error::InvalidParameter("a rate fit needs at least two (N, error) pairs".into()));
    }
    if errs.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Domain("rate fit needs positive finite errors".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct N values".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{airy_ai, airy_ai_prime, airy_zero, b_function};
    use crate::quad::Rect;

    #[test]
    fn airy_kernel_values() {
        let k00 = airy_kernel(0.0, 0.0);
        assert!((k00 - airy_ai_prime(0.0).powi(2)).abs() < 1e-16);
        assert!((k00 - 0.066_987_483_4).abs() < 1e-9);
        assert_eq!(airy_kernel(1.0, 2.0), airy_kernel(2.0, 1.0));
        let f = airy_kernel_factorized(-1.0, 0.5).unwrap();
        assert!((f - airy_kernel(-1.0, 0.5)).abs() < 1e-8);
        assert!((airy_kernel_factorized(0.0, 0.0).unwrap() - k00).abs() < 1e-8);
        assert!((airy_kernel_factorized(3.0, -3.0).unwrap() - airy_kernel(3.0, -3.0)).abs() < 1e-8);
        let k55 = airy_kernel_factorized(5.0, 5.0).unwrap();
        assert!(k55 > 0.0 && k55 < airy_ai(5.0).powi(2));
    }

    #[test]
    fn diagonal_branch_matches_quotient() {
        for &x in &[-7.3, -2.0, 0.0, 1.7, 5.0] {
            // both branches at the switch distance
            let y = x + DIAGONAL_DELTA;
            let quotient = airy_kernel(x, y);
            let taylor = kernel_near_diagonal(x, y);
            assert!((quotient - taylor).abs() < 1e-10, "x={x}: {quotient} {taylor}");
            let d = airy_kernel(x, x + 1e-7);
            assert!((d - airy_kernel(x, x)).abs() < 1e-7);
        }
    }

    #[test]
    fn factorized_sup_gap() {
        let mut sup = 0.0f64;
        for i in 0..15 {
            for j in 0..15 {
                let x = -6.0 + 10.0 * i as f64 / 14.0;
                let y = -6.0 + 10.0 * j as f64 / 14.0;
                sup = sup.max((airy_kernel(x, y) - airy_kernel_factorized(x, y).unwrap()).abs());
            }
        }
        assert!(sup < 1e-8, "{sup}");
    }

    #[test]
    fn l_function_limits_and_diagonal() {
        let l = l_function(15.0, 0.0).unwrap();
        assert!((l - (airy_primitive(0.0) - 1.0)).abs() < 1e-6);
        for &x in &[-5.0, -1.0, 0.0, 2.5] {
            assert!((l_function(x, x).unwrap() - l_diagonal(x)).abs() < 1e-11);
        }
        let xs = [-3.0, -0.5, 1.0, 4.0];
        let ys = [-6.0, 0.0, 2.0];
        let m = l_matrix(&xs, &ys);
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                assert!((m[(i, j)] - l_function(x, y).unwrap()).abs() < 1e-12);
            }
        }
    }

    /// Eq (1.6) evaluated directly: the conditionally convergent left integral
    /// is Cesaro-averaged over truncation points with a smooth window.
    fn l_direct(x: f64, y: f64) -> f64 {
        let spec = QuadratureSpec::default().with_tol(1e-11, 1e-11);
        let right = integrate_1d(|z| airy_kernel(y, z), Interval::new(x, 20.0), &spec).unwrap().value;
        let (z1, z2) = (150.0, 450.0);
        let taper = |z: f64| {
            if z >= -z1 {
                1.0
            } else {
                let s = (z + z2) / (z2 - z1);
                s - (2.0 * PI * s).sin() / (2.0 * PI)
            }
        };
        let left = integrate_1d(|z| airy_kernel(y, z) * taper(z), Interval::new(-z2, x), &spec).unwrap().value;
        right - left
    }

    #[test]
    fn l_function_matches_direct_definition() {
        for &(x, y) in &[(0.0, 0.0), (2.0, -1.0), (-1.5, 0.5)] {
            let a = l_function(x, y).unwrap();
            let b = l_direct(x, y);
            assert!((a - b).abs() < 1e-4, "({x},{y}): {a} vs {b}");
        }
    }

    #[test]
    fn l_derivative_identities() {
        // d/dx L(x,y) = -2 K(y,x), d/dy L(x,y) = 2K(x,y) + Ai(y)B(x)
        let h = 1e-4;
        for &(x, y) in &[(0.3, -0.7), (-2.0, 1.0)] {
            let dx = (l_function(x + h, y).unwrap() - l_function(x - h, y).unwrap()) / (2.0 * h);
            let dy = (l_function(x, y + h).unwrap() - l_function(x, y - h).unwrap()) / (2.0 * h);
            assert!((dx + 2.0 * airy_kernel(y, x)).abs() < 1e-7);
            assert!((dy - 2.0 * airy_kernel(x, y) - airy_ai(y) * b_function(x)).abs() < 1e-7);
        }
    }

    #[test]
    fn airy_kernel_is_psd() {
        let nodes: Vec<f64> = (0..12).map(|i| -6.0 + 10.0 * i as f64 / 11.0).collect();
        let m = DMatrix::from_fn(12, 12, |i, j| airy_kernel(nodes[i], nodes[j]));
        let e = m.symmetric_eigen();
        assert!(e.eigenvalues.min() >= -1e-9);
    }

    fn reproduce(x: f64, y: f64) -> f64 {
        // oscillatory left tail: smooth Cesaro taper for the oscillating part
        // and the phase-averaged envelope added back for the mean part
        let spec = QuadratureSpec::default().with_tol(1e-12, 1e-12);
        let (z1, z2) = (400.0, 1200.0);
        let taper = |z: f64| {
            if z >= -z1 {
                1.0
            } else {
                let s = (z + z2) / (z2 - z1);
                s - (2.0 * PI * s).sin() / (2.0 * PI)
            }
        };
        let body = integrate_1d(|z| airy_kernel(x, z) * airy_kernel(z, y) * taper(z), Interval::new(-z2, 20.0), &spec)
            .unwrap()
            .value;
        let (ax, ay, bx, by) = (airy_ai(x), airy_ai(y), airy_ai_prime(x), airy_ai_prime(y));
        let mean = |s: f64| (ax * ay * s.sqrt() + bx * by / s.sqrt()) / (2.0 * PI * (x + s) * (y + s));
        let upper = integrate_1d(|s| mean(s) * (1.0 - taper(-s)), Interval::new(z1, z2), &spec).unwrap().value;
        let beyond = integrate_1d(|s| mean(s), Interval::new(z2, f64::INFINITY), &QuadratureSpec { rule: crate::quad::Rule::DoubleExponential, ..spec }).unwrap().value;
        body + upper + beyond
    }

    #[test]
    fn reproducing_property() {
        for &(x, y) in &[(0.0, 0.0), (1.0, -1.0)] {
            let r = reproduce(x, y);
            assert!((r - airy_kernel(x, y)).abs() < 1e-6, "({x},{y}) {r} vs {}", airy_kernel(x, y));
        }
    }

    #[test]
    fn hermite_wavefunctions() {
        assert!((phi_hermite(0, 0.0) - PI.powf(-0.25)).abs() < 1e-16);
        let spec = QuadratureSpec::default().with_cuts(-20.0, 20.0);
        for j in [0usize, 5, 50] {
            let r = integrate_1d(|x| phi_hermite(j, x).powi(2), Interval::real_line(), &spec).unwrap();
            assert!((r.value - 1.0).abs() < 1e-8, "j={j}");
        }
        // explicit H_3 = 8x^3 - 12x
        let x: f64 = 0.7;
        let h3 = (8.0 * x.powi(3) - 12.0 * x) * (-x * x / 2.0).exp() / (PI.powf(0.25) * (8.0f64 * 6.0).sqrt());
        assert!((phi_hermite(3, x) - h3).abs() < 1e-15);
        // far from the origin for huge j stays finite
        let v = phi_hermite(1_000_000, 1414.0);
        assert!(v.is_finite());
        assert!(phi_hermite(200, 60.0).abs() < 1e-100);
    }

    #[test]
    fn hermite_edge_profile() {
        // phi_n(sqrt(2n+1) + 2^{-1/2} n^{-1/6} t) ~ 2^{1/4} n^{-1/12} Ai(t)
        let gap = |n: usize, t: f64| {
            let nf = n as f64;
            let x = (2.0 * nf + 1.0).sqrt() + t / (2f64.sqrt() * nf.powf(1.0 / 6.0));
            let pred = 2f64.powf(0.25) * nf.powf(-1.0 / 12.0) * airy_ai(t);
            (phi_hermite(n, x) - pred).abs() / (2f64.powf(0.25) * nf.powf(-1.0 / 12.0))
        };
        let (g1, g2) = (gap(400, -1.0), gap(3200, -1.0));
        assert!(g1 < 0.02, "{g1}");
        // the relative gap shrinks like n^{-2/3}
        let ratio = g1 / g2;
        assert!(ratio > 2.0 && ratio < 8.0, "{ratio}");
    }

    #[test]
    fn laguerre_wavefunctions() {
        assert!((phi_laguerre(0, 0.0, 1.3).unwrap() - (-0.65f64).exp()).abs() < 1e-16);
        let spec = QuadratureSpec::default();
        for a in [0.5, 2.0] {
            for j in [0usize, 5, 50] {
                let r = integrate_1d(
                    |x| phi_laguerre(j, a, x).unwrap().powi(2),
                    Interval::new(0.0, 400.0),
                    &spec,
                )
                .unwrap();
                assert!((r.value - 1.0).abs() < 1e-8, "j={j} a={a}");
            }
        }
        assert!(phi_laguerre(2, 0.5, -1.0).is_err());
        assert!(phi_laguerre(2, 2.0, -1.0).is_ok());
        assert!(phi_laguerre(3, 0.0, 0.0).is_ok());
    }

    #[test]
    fn laguerre_edge_profile() {
        // phi_n^{(a)}(4n+2a+2 + 2(2n)^{1/3} t) ~ (-1)^n (2n)^{-1/3} Ai(t)
        let prof = |n: usize, t: f64, a: f64| {
            let nf = n as f64;
            let x = 4.0 * nf + 2.0 * a + 2.0 + 2f64.powf(4.0 / 3.0) * nf.powf(1.0 / 3.0) * t;
            let v = phi_laguerre(n, a, x).unwrap();
            // (2n)^{1/3} phi tends to (-1)^n Ai(t)
            let s = (2.0 * nf).powf(1.0 / 3.0);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            (s * v * sign - airy_ai(t)).abs()
        };
        let (g1, g2) = (prof(100, 0.5, 1.0), prof(800, 0.5, 1.0));
        assert!(g1 < 0.05, "{g1}");
        assert!(g2 < g1);
    }

    #[test]
    fn hermite_cd_equals_sum() {
        assert!((cd_kernel_hermite(1, 0.4, -1.1) - phi_hermite(0, 0.4) * phi_hermite(0, -1.1)).abs() < 1e-16);
        let direct: f64 = (0..3).map(|j| phi_hermite(j, 0.3) * phi_hermite(j, -0.2)).sum();
        assert!((cd_kernel_hermite(3, 0.3, -0.2) - direct).abs() < 1e-12);
        for n in 1..=20 {
            for &(x, y) in &[(0.3, -0.2), (1.5, 1.5), (-2.0, 3.0), (4.0, 4.00001), (0.0, 5.5)] {
                let a = cd_kernel_hermite(n, x, y);
                let b = sum_kernel_hermite(n, x, y);
                assert!((a - b).abs() < 1e-12, "n={n} ({x},{y}) {a} {b}");
            }
        }
    }

    #[test]
    fn laguerre_cd_equals_sum() {
        let p0 = |x: f64| phi_laguerre(0, 0.7, x).unwrap();
        assert!((cd_kernel_laguerre(1, 0.7, 2.0, 3.0).unwrap() - p0(2.0) * p0(3.0)).abs() < 1e-15);
        let a = cd_kernel_laguerre(4, 1.0, 2.0, 3.5).unwrap();
        let b: f64 = (0..4).map(|j| phi_laguerre(j, 1.0, 2.0).unwrap() * phi_laguerre(j, 1.0, 3.5).unwrap()).sum();
        assert!((a - b).abs() < 1e-12);
        for n in 1..=20 {
            for &alpha in &[-0.5, 0.0, 0.5, 2.0] {
                for &(x, y) in &[(2.0, 3.5), (0.3, 0.3), (10.0, 1.0), (7.0, 7.00002)] {
                    let a = cd_kernel_laguerre(n, alpha, x, y).unwrap();
                    let b = sum_kernel_laguerre(n, alpha, x, y).unwrap();
                    assert!((a - b).abs() < 1e-12, "n={n} a={alpha} ({x},{y}) {a} {b}");
                }
            }
        }
        assert!(cd_kernel_laguerre(3, 0.5, -1.0, 2.0).is_err());
    }

    #[test]
    fn kernel_traces() {
        let spec = QuadratureSpec::default().with_cuts(-12.0, 12.0);
        let t = integrate_1d(|x| cd_kernel_hermite(10, x, x), Interval::real_line(), &spec).unwrap();
        assert!((t.value - 10.0).abs() < 1e-8);
        let t = integrate_1d(|x| cd_kernel_laguerre(10, 0.5, x, x).unwrap(), Interval::new(0.0, 150.0), &spec).unwrap();
        assert!((t.value - 10.0).abs() < 1e-8);
    }

    #[test]
    fn s_kernels_unrolled() {
        // alpha = 1: weight-(alpha-1) = 0 Laguerre functions L_j e^{-x/2}
        let l = |j: usize, x: f64| {
            let p = match j {
                0 => 1.0,
                1 => 1.0 - x,
                _ => (x * x - 4.0 * x + 2.0) / 2.0,
            };
            p * (-x / 2.0).exp()
        };
        let (x, y) = (1.3, 0.6);
        let want = x * (0..3).map(|j| l(j, x) * l(j, y) / (x * y).sqrt()).sum::<f64>();
        assert!((s_kernel_lse(1, 1.0, x, y).unwrap() - want).abs() < 1e-14);
        assert!((s_kernel_lse(2, 1.5, x, y).unwrap() - s_kernel_lse(2, 1.5, y, x).unwrap()).abs() > 1e-6);

        // N = 2, alpha = 0: parameter-1 functions sqrt(j!/(j+1)!) L_j^{(1)} x^{1/2} e^{-x/2}
        let l1 = |j: usize, x: f64| {
            let p = if j == 0 { 1.0 } else { (2.0 - x) / 2f64.sqrt() };
            p * x.sqrt() * (-x / 2.0).exp()
        };
        let want = x * (0..2).map(|j| l1(j, x) * l1(j, y) / (x * y).sqrt()).sum::<f64>();
        assert!((s_kernel_loe(2, 0.0, x, y).unwrap() - want).abs() < 1e-14);
        assert!(s_kernel_loe(3, 0.0, x, y).is_err());
        for &x in &[0.1, 1.0, 5.0, 30.0] {
            assert!(s_kernel_loe(4, 0.5, x, x).unwrap() > 0.0);
        }
        assert!(s_kernel_lse(2, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn kernel_matrix_matches_pointwise() {
        let nodes = [-2.0, -0.5, 0.0, 1.2, 2.0];
        for kind in [
            EnsembleKind::gue(),
            EnsembleKind::gse(),
            EnsembleKind::lue(0.5),
            EnsembleKind::lse(1.5),
            EnsembleKind::loe(0.5),
        ] {
            let m = scaled_kernel_matrix(kind, 40, &nodes).unwrap();
            for i in 0..nodes.len() {
                for j in 0..nodes.len() {
                    let p = scaled_edge_kernel(kind, 40, nodes[i], nodes[j]).unwrap();
                    assert!((m[(i, j)] - p).abs() < 1e-11, "{} {i} {j}", kind.name());
                }
            }
        }
    }

    #[test]
    fn scaled_kernel_near_airy() {
        let g = scaled_edge_kernel(EnsembleKind::gue(), 100, 0.0, 0.0).unwrap();
        assert!((g - airy_kernel(0.0, 0.0)).abs() < 0.1 * 100f64.powf(-1.0 / 3.0));
        let l = scaled_edge_kernel(EnsembleKind::lue(0.0), 100, 1.0, -1.0).unwrap();
        assert!((l - airy_kernel(1.0, -1.0)).abs() < 100f64.powf(-1.0 / 3.0));
        let e1 = (scaled_edge_kernel(EnsembleKind::lue(0.0), 100, 1.0, -1.0).unwrap() - airy_kernel(1.0, -1.0)).abs();
        let e2 = (scaled_edge_kernel(EnsembleKind::lue(0.0), 800, 1.0, -1.0).unwrap() - airy_kernel(1.0, -1.0)).abs();
        let r = e1 / e2;
        assert!((1.5..=3.0).contains(&r), "ratio {r}");
    }

    #[test]
    fn ensemble_validation() {
        assert!(EnsembleKind::lue(-1.0).validate().is_err());
        assert!(EnsembleKind::lse(0.0).validate().is_err());
        assert!(EnsembleKind::loe(-1.5).validate().is_ok());
        assert!(EnsembleKind::goe().validate_n(7).is_err());
        assert!(EnsembleKind::parse("LOE", 1.0).is_ok());
        assert!(EnsembleKind::parse("xyz", 1.0).is_err());
    }

    #[test]
    fn eps_of_airy_and_even() {
        let spec = QuadratureSpec::default();
        for &x in &[-3.0, 0.0, 1.5] {
            let e = eps_transform(airy_ai, x, (-60.0, 20.0), &spec).unwrap();
            // the truncated left tail is of order 60^{-3/4}/sqrt(pi) times a phase
            let cut = airy_primitive(-60.0);
            assert!((e - 0.5 * b_function(x) + 0.5 * cut).abs() < 1e-9, "x={x}");
        }
        let even = eps_transform(|t| (-t * t).exp(), 0.0, (-10.0, 10.0), &spec).unwrap();
        assert!(even.abs() < 1e-12, "{even}");
    }

    #[test]
    fn wave_integrals_closed_forms() {
        let spec = QuadratureSpec::default().with_cuts(-25.0, 25.0);
        for n in [0usize, 2, 3, 10, 24] {
            let q = integrate_1d(|x| phi_hermite(n, x), Interval::real_line(), &spec).unwrap().value;
            assert!((q - hermite_wave_integral(n)).abs() < 1e-10, "n={n}");
        }
        for &a in &[1.0, 2.5] {
            for n in [0usize, 1, 4, 9, 12] {
                let q = integrate_1d(
                    |x| phi_laguerre(n, a, x).unwrap() / x.sqrt(),
                    Interval::new(0.0, 200.0),
                    &spec,
                )
                .unwrap()
                .value;
                assert!((q - laguerre_half_wave_integral(n, a)).abs() < 1e-9, "n={n} a={a}");
            }
        }
        // the closed-form route of eps agrees with direct quadrature
        let n = 20;
        let direct = eps_transform(|t| phi_hermite(n, t), 1.3, (-15.0, 15.0), &spec).unwrap();
        let tail = integrate_1d(|t| phi_hermite(n, t), Interval::new(1.3, 15.0), &spec).unwrap().value;
        assert!((direct - (0.5 * hermite_wave_integral(n) - tail)).abs() < 1e-12);
    }

    #[test]
    fn wave_limit_signs_and_zero_anchor() {
        let z = airy_zero(1);
        for kind in [EnsembleKind::gse(), EnsembleKind::goe(), EnsembleKind::lse(1.0), EnsembleKind::loe(1.0)] {
            for w in [WaveLimit::PhiTop, WaveLimit::PhiNext] {
                let (_, p) = edge_wavefunction_limit(kind, w, 50, z).unwrap();
                assert!(p.abs() < 1e-15);
            }
        }
        let (vt, pt) = edge_wavefunction_limit(EnsembleKind::lse(1.0), WaveLimit::PhiTop, 100, 0.0).unwrap();
        let (vn, pn) = edge_wavefunction_limit(EnsembleKind::lse(1.0), WaveLimit::PhiNext, 100, 0.0).unwrap();
        assert!(pt < 0.0 && pn > 0.0 && vt < 0.0 && vn > 0.0);
        assert!(edge_wavefunction_limit(EnsembleKind::gue(), WaveLimit::PhiTop, 50, 0.0).is_err());
    }

    #[test]
    fn phi_limits_shrink() {
        for kind in [EnsembleKind::gse(), EnsembleKind::goe(), EnsembleKind::lse(1.0), EnsembleKind::loe(1.0)] {
            let rel = |n: usize| {
                let (v, p) = edge_wavefunction_limit(kind, WaveLimit::PhiTop, n, 0.0).unwrap();
                ((v - p) / p).abs()
            };
            let (a, b) = (rel(50), rel(400));
            assert!(b < a, "{}: {a} {b}", kind.name());
            assert!(b < 0.25, "{}: {b}", kind.name());
        }
    }

    #[test]
    fn eps_limits_carry_parity_offset() {
        for kind in [EnsembleKind::gse(), EnsembleKind::goe(), EnsembleKind::lse(1.0), EnsembleKind::loe(1.0)] {
            for w in [WaveLimit::EpsTop, WaveLimit::EpsNext] {
                let (v, p) = edge_wavefunction_limit(kind, w, 200, 0.5).unwrap();
                let (_, q) = edge_eps_limit_with_offset(kind, w, 200, 0.5).unwrap();
                // corrected limit is much closer than the stated one
                assert!((v - q).abs() < 0.2 * (v - p).abs(), "{} {:?}: {v} {p} {q}", kind.name(), w);
            }
        }
    }

    #[test]
    fn sup_error_rate_small_sweep() {
        let grid = default_rate_grid();
        let e1 = edge_kernel_sup_error(EnsembleKind::gse(), 25, &grid).unwrap();
        let e2 = edge_kernel_sup_error(EnsembleKind::gse(), 200, &grid).unwrap();
        assert!(e2 < e1);
    }

    #[test]
    fn rect_type_used() {
        let _ = Rect { x: Interval::new(0.0, 1.0), y: Interval::new(0.0, 1.0) };
    }

    #[test]
    fn rate_slope_of_power_law() {
        let ns = [50usize, 100, 200, 400];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-1.0 / 3.0)).collect();
        assert!((rate_slope(&ns, &errs).unwrap() + 1.0 / 3.0).abs() < 1e-12);
        assert!(rate_slope(&ns[..1], &errs[..1]).is_err());
    }
}
