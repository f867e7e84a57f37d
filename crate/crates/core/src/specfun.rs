//! Airy function family on the real line.
//!
//! Inside `[-12, 12]` values come from a table of (Ai, Ai', AI) on a uniform
//! grid, built once by Taylor-stepping the Airy ODE, and a local Taylor
//! expansion about the nearest node. Outside that band the Poincare
//! asymptotic expansions are used; the primitive is obtained there by
//! repeated integration by parts.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Ai(0) = 3^{-2/3} / Gamma(2/3).
pub const AI_AT_ZERO: f64 = 0.355_028_053_887_817_239_26;
/// Ai'(0) = -3^{-1/3} / Gamma(1/3).
pub const AIP_AT_ZERO: f64 = -0.258_819_403_792_806_798_41;

const TABLE_LO: f64 = -14.0;
const TABLE_HI: f64 = 14.0;
const STEP: f64 = 0.125;
const SWITCH: f64 = 12.0;
const UNDERFLOW_CUT: f64 = 120.0;

/// Ai, Ai' and AI(x) = integral of Ai over (-inf, x], evaluated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryValues {
    pub ai: f64,
    pub aip: f64,
    pub prim: f64,
}

impl AiryValues {
    /// B(x) = 2 AI(x) - 1.
    pub fn b(&self) -> f64 {
        2.0 * self.prim - 1.0
    }
}

struct Table {
    ai: Vec<f64>,
    aip: Vec<f64>,
    prim: Vec<f64>,
}

fn node(k: usize) -> f64 {
    TABLE_LO + k as f64 * STEP
}

/// Taylor step of y'' = x y from `x0` by `h`.
/// Returns (y(x0+h), y'(x0+h), integral of y over [x0, x0+h]).
fn taylor_step(x0: f64, y: f64, yp: f64, h: f64) -> (f64, f64, f64) {
    let mut a = [0.0f64; 72];
    a[0] = y;
    a[1] = yp;
    let scale = y.abs() + yp.abs() * h.abs() + f64::MIN_POSITIVE;
    let mut val = y + yp * h;
    let mut der = yp;
    let mut int = y * h + 0.5 * yp * h * h;
    let mut hn = h; // h^{n-1}
    let mut quiet = 0;
    for n in 2..a.len() {
        let prev3 = if n >= 3 { a[n - 3] } else { 0.0 };
        a[n] = (x0 * a[n - 2] + prev3) / ((n - 1) as f64 * n as f64);
        let dn = n as f64 * a[n] * hn;
        hn *= h;
        let t = a[n] * hn;
        val += t;
        der += dn;
        int += t * h / (n as f64 + 1.0);
        if t.abs() <= 1e-19 * scale && dn.abs() * h.abs() <= 1e-19 * scale {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    (val, der, int)
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

fn build_table() -> Table {
    let n = ((TABLE_HI - TABLE_LO) / STEP).round() as usize + 1;
    let zero = (-TABLE_LO / STEP).round() as usize;
    let mut ai = vec![0.0; n];
    let mut aip = vec![0.0; n];
    let mut prim = vec![0.0; n];

    ai[zero] = AI_AT_ZERO;
    aip[zero] = AIP_AT_ZERO;
    prim[zero] = 2.0 / 3.0;
    // oscillatory side: march left from the exact values at 0
    for k in (0..zero).rev() {
        let (y, yp, int) = taylor_step(node(k + 1), ai[k + 1], aip[k + 1], -STEP);
        ai[k] = y;
        aip[k] = yp;
        prim[k] = prim[k + 1] + int;
    }
    // decaying side: march from the right end so that Ai is the growing solution
    let top = n - 1;
    let right = asymptotic(node(top));
    ai[top] = right.ai;
    aip[top] = right.aip;
    prim[top] = right.prim;
    for k in (zero + 1..top).rev() {
        let (y, yp, int) = taylor_step(node(k + 1), ai[k + 1], aip[k + 1], -STEP);
        ai[k] = y;
        aip[k] = yp;
        prim[k] = prim[k + 1] + int;
    }
    Table { ai, aip, prim }
}

fn from_table(x: f64) -> AiryValues {
    let t = table();
    let k = ((x - TABLE_LO) / STEP).round().clamp(0.0, (t.ai.len() - 1) as f64) as usize;
    let x0 = node(k);
    let h = x - x0;
    if h == 0.0 {
        return AiryValues { ai: t.ai[k], aip: t.aip[k], prim: t.prim[k] };
    }
    let (ai, aip, int) = taylor_step(x0, t.ai[k], t.aip[k], h);
    AiryValues { ai, aip, prim: t.prim[k] + int }
}

/// Sums of the two asymptotic series in powers of 1/zeta, with signs
/// `sign^k`. Stops at the smallest term.
fn asym_series(zeta: f64, sign: f64) -> (f64, f64) {
    let mut u = 1.0f64;
    let mut su = 1.0;
    let mut sv = 1.0;
    let mut p = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -u * (6.0 * kf + 1.0) / (6.0 * kf - 1.0);
        p *= sign / zeta;
        let tu = u * p;
        if tu.abs() > last || tu.abs() < 1e-18 {
            break;
        }
        last = tu.abs();
        su += tu;
        sv += v * p;
    }
    (su, sv)
}

/// Oscillatory-side series split by parity: returns
/// (even u, odd u, even v, odd v) with alternating signs as in DLMF 9.7.9-10.
fn asym_series_split(zeta: f64) -> (f64, f64, f64, f64) {
    let (mut ue, mut uo, mut ve, mut vo) = (1.0, 0.0, 1.0, 0.0);
    let mut u = 1.0f64;
    let mut p = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60usize {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -u * (6.0 * kf + 1.0) / (6.0 * kf - 1.0);
        p /= zeta;
        let tu = u * p;
        if tu.abs() > last || tu.abs() < 1e-18 {
            break;
        }
        last = tu.abs();
        // (-1)^{floor(k/2)}
        let s = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            ue += s * tu;
            ve += s * v * p;
        } else {
            uo += s * tu;
            vo += s * v * p;
        }
    }
    (ue, uo, ve, vo)
}

/// Asymptotic branch, valid for |x| >= 10 or so.
fn asymptotic(x: f64) -> AiryValues {
    let sqpi = PI.sqrt();
    if x > 0.0 {
        if x > UNDERFLOW_CUT {
            return AiryValues { ai: 0.0, aip: 0.0, prim: 1.0 };
        }
        let zeta = 2.0 / 3.0 * x * x.sqrt();
        let q = x.powf(0.25);
        let e = (-zeta).exp();
        let (su, sv) = asym_series(zeta, -1.0);
        let ai = e / (2.0 * sqpi * q) * su;
        let aip = -q * e / (2.0 * sqpi) * sv;
        let prim = 1.0 - right_tail(x, ai, aip);
        AiryValues { ai, aip, prim }
    } else {
        let z = -x;
        let zeta = 2.0 / 3.0 * z * z.sqrt();
        let q = z.powf(0.25);
        let (s, c) = zeta.sin_cos();
        let cosp = (c + s) * FRAC_1_SQRT_2;
        let sinp = (s - c) * FRAC_1_SQRT_2;
        let (ue, uo, ve, vo) = asym_series_split(zeta);
        let ai = (cosp * ue + sinp * uo) / (sqpi * q);
        let aip = q / sqpi * (sinp * ve - cosp * vo);
        let prim = left_primitive(z, ai, aip);
        AiryValues { ai, aip, prim }
    }
}

/// Integral of Ai over [x, inf) for large positive x by integration by parts.
fn right_tail(x: f64, ai: f64, aip: f64) -> f64 {
    let mut d = 1.0f64;
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for k in 0..40 {
        let kf = k as f64;
        if k > 0 {
            d *= (3.0 * kf - 2.0) * (3.0 * kf - 1.0);
        }
        let t = d * (-aip / x.powi(3 * k + 1) - (3.0 * kf + 1.0) * ai / x.powi(3 * k + 2));
        if t.abs() > last {
            break;
        }
        last = t.abs();
        sum += t;
        if t.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// AI(-z) = integral of Ai(-s) over s in [z, inf), large z.
fn left_primitive(z: f64, ai: f64, aip: f64) -> f64 {
    // g(s) = Ai(-s), g'(s) = -Ai'(-s)
    let g = ai;
    let gp = -aip;
    let mut c = 1.0f64;
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for k in 0..40 {
        let kf = k as f64;
        if k > 0 {
            c *= -(3.0 * kf - 2.0) * (3.0 * kf - 1.0);
        }
        let t = c * (gp / z.powi(3 * k + 1) + (3.0 * kf + 1.0) * g / z.powi(3 * k + 2));
        if t.abs() > last {
            break;
        }
        last = t.abs();
        sum += t;
        if t.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Ai, Ai' and AI at `x` in one pass.
pub fn airy_all(x: f64) -> AiryValues {
    if x.is_nan() {
        return AiryValues { ai: f64::NAN, aip: f64::NAN, prim: f64::NAN };
    }
    if x.abs() <= SWITCH {
        from_table(x)
    } else {
        asymptotic(x)
    }
}

pub fn airy_ai(x: f64) -> f64 {
    airy_all(x).ai
}

pub fn airy_ai_prime(x: f64) -> f64 {
    airy_all(x).aip
}

/// AI(x), the integral of Ai over (-inf, x].
pub fn airy_primitive(x: f64) -> f64 {
    airy_all(x).prim
}

/// B(x) = AI(x) - (1 - AI(x)).
pub fn b_function(x: f64) -> f64 {
    airy_all(x).b()
}

/// k-th zero of Ai (k >= 1), counted from the right.
pub fn airy_zero(k: usize) -> f64 {
    let k = k.max(1) as f64;
    let t = 3.0 * PI / 8.0 * (4.0 * k - 1.0);
    let mut x = -t.powf(2.0 / 3.0) * (1.0 + 5.0 / 48.0 / (t * t));
    for _ in 0..50 {
        let v = airy_all(x);
        let dx = v.ai / v.aip;
        x -= dx;
        if dx.abs() < 1e-15 * x.abs() {
            break;
        }
    }
    x
}

/// Natural log of the Gamma function for positive arguments.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires a finite positive argument, got {x}")));
    }
    Ok(libm::lgamma(x))
}

#[cfg(test)]
pub(crate) fn positive_side_at_zero() -> (f64, f64, f64) {
    // re-run the right-hand march down to 0 to compare with the exact anchors
    let n = ((TABLE_HI - TABLE_LO) / STEP).round() as usize;
    let zero = (-TABLE_LO / STEP).round() as usize;
    let v = asymptotic(node(n));
    let (mut ai, mut aip, mut prim) = (v.ai, v.aip, v.prim);
    for k in (zero..n).rev() {
        let (y, yp, int) = taylor_step(node(k + 1), ai, aip, -STEP);
        ai = y;
        aip = yp;
        prim += int;
    }
    (ai, aip, prim)
}
