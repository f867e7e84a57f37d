//! Leading-order mean and variance of edge-scaled linear statistics
//! sum_j F(stat_scale (x_j - center)) for the six ensembles.
//!
//! Every formula is a list of [`IntegralTerm`]s with exact rational
//! coefficients, walked by one evaluator on a composite Gauss-Legendre
//! grid over the support of F. The grid is refined by doubling until two
//! successive levels agree to the requested tolerance.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{airy_kernel_with, l_matrix, Beta, EnsembleKind};
use crate::quad::{gauss_legendre, QuadratureSpec};
use crate::specfun::{airy_all, AiryValues};
use crate::testfn::TestFunction;

pub const REMAINDER_CAVEAT: &str = "leading order only; the O(N^-1/3) remainder is not included";

/// Largest |lambda| * max|F| accepted by [`mgf_log_asymptotic`].
pub const MGF_LAMBDA_GUARD: f64 = 5.0;

const MAX_REFINEMENTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: i64,
    pub den: i64,
}

impl Ratio {
    pub const fn new(num: i64, den: i64) -> Self {
        Ratio { num, den }
    }
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Which power of F attaches to a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    F,
    Fp,
    F2,
    FFp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor1 {
    /// K(x, x)
    KDiag,
    /// L(x, x)
    LDiag,
    /// Ai(x) B(x)
    AiB,
    /// B(x)^2
    B2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor2 {
    /// K(x,y)^2
    KSq,
    /// K(x,y) L(x,y)
    KL,
    /// K(x,y) Ai(x) B(y)
    KAixBy,
    /// K(x,y) B(x) B(y)
    KBB,
    /// L(x,y) L(y,x)
    LLt,
    /// L(x,y) Ai(y) B(x)
    LAiyBx,
    /// L(x,y) B(x) B(y)
    LBB,
    /// Ai(x) Ai(y) B(x) B(y)
    AiAiBB,
    /// Ai(x) B(x) B(y)^2
    AiBxB2y,
    /// B(x)^2 B(y)^2
    B2B2,
    /// sgn(y - x) K(x,y)
    SignK,
    /// B(x) sgn(y - x) Ai(y)
    SignAi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TermBody {
    One { factor: Factor1, slot: Slot },
    Two { factor: Factor2, x: Slot, y: Slot },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralTerm {
    pub name: &'static str,
    pub coefficient: Ratio,
    pub body: TermBody,
}

impl IntegralTerm {
    pub fn dimension(&self) -> usize {
        match self.body {
            TermBody::One { .. } => 1,
            TermBody::Two { .. } => 2,
        }
    }

    /// The two unitary terms are shared by all ensembles; everything else
    /// is a beta = 1, 4 correction.
    pub fn is_correction(&self) -> bool {
        !matches!(self.name, "K_diag_F" | "K_diag_F2" | "K2_FF")
    }
}

#[derive(Debug, Clone)]
pub struct TermCatalog {
    pub mean: Vec<IntegralTerm>,
    pub variance: Vec<IntegralTerm>,
}

const fn one(name: &'static str, num: i64, den: i64, factor: Factor1, slot: Slot) -> IntegralTerm {
    IntegralTerm { name, coefficient: Ratio::new(num, den), body: TermBody::One { factor, slot } }
}

const fn two(name: &'static str, num: i64, den: i64, factor: Factor2, x: Slot, y: Slot) -> IntegralTerm {
    IntegralTerm { name, coefficient: Ratio::new(num, den), body: TermBody::Two { factor, x, y } }
}

use Factor1::*;
use Factor2::*;
use Slot::*;

/// Term lists by symmetry class; Laguerre ensembles share their Gaussian
/// partner's list.
pub fn term_catalog(beta: Beta) -> TermCatalog {
    match beta {
        Beta::Two => TermCatalog {
            mean: vec![one("K_diag_F", 1, 1, KDiag, F)],
            variance: vec![one("K_diag_F2", 1, 1, KDiag, F2), two("K2_FF", -1, 1, KSq, F, F)],
        },
        Beta::Four => TermCatalog {
            mean: vec![
                one("K_diag_F", 1, 2, KDiag, F),
                one("L_diag_Fprime", -1, 8, LDiag, Fp),
                one("AiB_F", 1, 8, AiB, F),
                one("B2_Fprime", 1, 32, B2, Fp),
            ],
            variance: vec![
                one("K_diag_F2", 1, 2, KDiag, F2),
                two("K2_FF", -1, 2, KSq, F, F),
                one("L_diag_FFprime", -1, 4, LDiag, FFp),
                one("AiB_F2", 1, 8, AiB, F2),
                one("B2_FFprime", 1, 16, B2, FFp),
                two("K_L_FprimeF", 1, 4, KL, Fp, F),
                two("K_AiB_FF", -1, 4, KAixBy, F, F),
                two("K_BB_FFprime", -1, 16, KBB, F, Fp),
                two("L_Lt_FprimeFprime", -1, 32, LLt, Fp, Fp),
                two("L_AiB_FprimeF", 1, 16, LAiyBx, Fp, F),
                two("L_BB_FprimeFprime", 1, 64, LBB, Fp, Fp),
                two("AiAi_BB_FF", -1, 32, AiAiBB, F, F),
                two("AiB_B2_FFprime", -1, 64, AiBxB2y, F, Fp),
                two("B2_B2_FprimeFprime", -1, 512, B2B2, Fp, Fp),
            ],
        },
        Beta::One => TermCatalog {
            mean: vec![
                one("K_diag_F", 1, 1, KDiag, F),
                one("L_diag_Fprime", -1, 4, LDiag, Fp),
                one("AiB_F", 1, 4, AiB, F),
                one("B2_Fprime", 1, 16, B2, Fp),
            ],
            variance: vec![
                one("K_diag_F2", 2, 1, KDiag, F2),
                two("K2_FF", -2, 1, KSq, F, F),
                one("L_diag_FFprime", -1, 2, LDiag, FFp),
                two("sign_K_FprimeF", -1, 2, SignK, Fp, F),
                one("AiB_F2", 1, 2, AiB, F2),
                two("sign_Ai_BFprime_F", -1, 8, SignAi, Fp, F),
                one("B2_FFprime", 1, 8, B2, FFp),
                two("AiB_B2_FFprime", -1, 16, AiBxB2y, F, Fp),
                two("K_AiB_FF", -1, 1, KAixBy, F, F),
                two("K_BB_FprimeF", -1, 4, KBB, Fp, F),
                two("L_Lt_FprimeFprime", -1, 8, LLt, Fp, Fp),
                two("L_AiB_FprimeF", 1, 4, LAiyBx, Fp, F),
                two("L_BB_FprimeFprime", 1, 16, LBB, Fp, Fp),
                two("AiAi_BB_FF", -1, 8, AiAiBB, F, F),
                two("K_L_FprimeF", 1, 1, KL, Fp, F),
                two("B2_B2_FprimeFprime", -1, 128, B2B2, Fp, Fp),
            ],
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentFormulaResult {
    pub mean: f64,
    pub variance: f64,
    /// coefficient-weighted value of every term, by name
    pub per_term_values: BTreeMap<String, f64>,
    pub quad_err: f64,
    pub caveat: &'static str,
}

// ---------------------------------------------------------------------------
// evaluator

struct Grid {
    func: TestFunction,
    panels: usize,
    npp: usize,
    lo: f64,
    width: f64,
    x: Vec<f64>,
    w: Vec<f64>,
    airy: Vec<AiryValues>,
    f: Vec<f64>,
    fp: Vec<f64>,
    k: OnceLock<DMatrix<f64>>,
    l: OnceLock<DMatrix<f64>>,
    sign_k: OnceLock<Vec<f64>>,
    sign_ai: OnceLock<Vec<f64>>,
}

impl Grid {
    fn new(f: &TestFunction, lo: f64, hi: f64, panels: usize, npp: usize) -> Self {
        let (x, w) = crate::quad::panel_rule(lo, hi, panels, npp);
        let airy = x.iter().map(|&t| airy_all(t)).collect();
        let fv = x.iter().map(|&t| f.eval(t)).collect();
        let fp = x.iter().map(|&t| f.derivative(t)).collect();
        Grid {
            func: f.clone(),
            panels,
            npp,
            lo,
            width: hi - lo,
            x,
            w,
            airy,
            f: fv,
            fp,
            k: OnceLock::new(),
            l: OnceLock::new(),
            sign_k: OnceLock::new(),
            sign_ai: OnceLock::new(),
        }
    }

    fn m(&self) -> usize {
        self.x.len()
    }

    fn slot(&self, s: Slot, i: usize) -> f64 {
        match s {
            F => self.f[i],
            Fp => self.fp[i],
            F2 => self.f[i] * self.f[i],
            FFp => self.f[i] * self.fp[i],
        }
    }

    fn b(&self, i: usize) -> f64 {
        self.airy[i].b()
    }

    fn k(&self) -> &DMatrix<f64> {
        self.k.get_or_init(|| {
            let m = self.m();
            let mut out = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let v = airy_kernel_with(self.x[i], &self.airy[i], self.x[j], &self.airy[j]);
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
            out
        })
    }

    fn l(&self) -> &DMatrix<f64> {
        self.l.get_or_init(|| l_matrix(&self.x, &self.x))
    }

    /// sum over y of sgn(y - x_i) g(y), with the panel holding x_i split at x_i
    fn signed_inner<G: Fn(usize) -> f64, H: Fn(f64) -> f64>(&self, i: usize, at_node: G, at_point: H) -> f64 {
        let own = i / self.npp;
        let h = self.width / self.panels as f64;
        let mut total = 0.0;
        for p in 0..self.panels {
            if p == own {
                continue;
            }
            let s = if p > own { 1.0 } else { -1.0 };
            let mut part = 0.0;
            for j in p * self.npp..(p + 1) * self.npp {
                part += self.w[j] * at_node(j);
            }
            total += s * part;
        }
        let a = self.lo + own as f64 * h;
        let b = a + h;
        let xi = self.x[i];
        let g = gauss_legendre(self.npp);
        for (lo, hi, s) in [(a, xi, -1.0), (xi, b, 1.0)] {
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let mut part = 0.0;
            for (t, wt) in g.nodes.iter().zip(&g.weights) {
                part += wt * half * at_point(mid + half * t);
            }
            total += s * part;
        }
        total
    }

    fn sign_k(&self) -> &[f64] {
        self.sign_k.get_or_init(|| {
            let k = self.k();
            (0..self.m())
                .map(|i| {
                    let xi = self.x[i];
                    let vi = self.airy[i];
                    self.signed_inner(
                        i,
                        |j| k[(i, j)] * self.f[j],
                        |y| airy_kernel_with(xi, &vi, y, &airy_all(y)) * self.f_at(y),
                    )
                })
                .collect()
        })
    }

    fn sign_ai(&self) -> &[f64] {
        self.sign_ai.get_or_init(|| {
            (0..self.m())
                .map(|i| self.signed_inner(i, |j| self.airy[j].ai * self.f[j], |y| airy_all(y).ai * self.f_at(y)))
                .collect()
        })
    }

    fn f_at(&self, y: f64) -> f64 {
        self.func.eval(y)
    }

    fn term(&self, t: &IntegralTerm) -> f64 {
        let m = self.m();
        let raw = match t.body {
            TermBody::One { factor, slot } => {
                let lm = if factor == LDiag { Some(self.l()) } else { None };
                (0..m)
                    .map(|i| {
                        let v = &self.airy[i];
                        let fac = match factor {
                            KDiag => v.aip * v.aip - self.x[i] * v.ai * v.ai,
                            LDiag => lm.unwrap()[(i, i)],
                            AiB => v.ai * v.b(),
                            B2 => v.b() * v.b(),
                        };
                        self.w[i] * fac * self.slot(slot, i)
                    })
                    .sum()
            }
            TermBody::Two { factor, x, y } => {
                let wx: Vec<f64> = (0..m).map(|i| self.w[i] * self.slot(x, i)).collect();
                let wy: Vec<f64> = (0..m).map(|j| self.w[j] * self.slot(y, j)).collect();
                let dot = |g: &dyn Fn(usize) -> f64, v: &[f64]| -> f64 { (0..m).map(|i| v[i] * g(i)).sum() };
                match factor {
                    AiAiBB => {
                        let g = |i: usize| self.airy[i].ai * self.b(i);
                        dot(&g, &wx) * dot(&g, &wy)
                    }
                    AiBxB2y => {
                        dot(&|i| self.airy[i].ai * self.b(i), &wx) * dot(&|j| self.b(j) * self.b(j), &wy)
                    }
                    B2B2 => {
                        let g = |i: usize| self.b(i) * self.b(i);
                        dot(&g, &wx) * dot(&g, &wy)
                    }
                    SignK => {
                        let s = self.sign_k();
                        (0..m).map(|i| wx[i] * s[i]).sum()
                    }
                    SignAi => {
                        let s = self.sign_ai();
                        (0..m).map(|i| wx[i] * self.b(i) * s[i]).sum()
                    }
                    _ => {
                        let k = if matches!(factor, KSq | KL | KAixBy | KBB) { Some(self.k()) } else { None };
                        let l = if matches!(factor, KL | LLt | LAiyBx | LBB) { Some(self.l()) } else { None };
                        let mut total = 0.0;
                        for i in 0..m {
                            if wx[i] == 0.0 {
                                continue;
                            }
                            let mut row = 0.0;
                            for j in 0..m {
                                let v = match factor {
                                    KSq => {
                                        let kv = k.unwrap()[(i, j)];
                                        kv * kv
                                    }
                                    KL => k.unwrap()[(i, j)] * l.unwrap()[(i, j)],
                                    KAixBy => k.unwrap()[(i, j)] * self.airy[i].ai * self.b(j),
                                    KBB => k.unwrap()[(i, j)] * self.b(i) * self.b(j),
                                    LLt => l.unwrap()[(i, j)] * l.unwrap()[(j, i)],
                                    LAiyBx => l.unwrap()[(i, j)] * self.airy[j].ai * self.b(i),
                                    LBB => l.unwrap()[(i, j)] * self.b(i) * self.b(j),
                                    _ => unreachable!(),
                                };
                                row += v * wy[j];
                            }
                            total += wx[i] * row;
                        }
                        total
                    }
                }
            }
        };
        t.coefficient.value() * raw
    }
}

struct Level {
    mean: f64,
    variance: f64,
    terms: BTreeMap<String, f64>,
}

fn evaluate_level(grid: &Grid, cat: &TermCatalog, want_variance: bool) -> Level {
    let mut terms = BTreeMap::new();
    let mut mean = 0.0;
    for t in &cat.mean {
        let v = grid.term(t);
        mean += v;
        terms.insert(t.name.to_string(), v);
    }
    let mut variance = 0.0;
    if want_variance {
        for t in &cat.variance {
            let v = grid.term(t);
            variance += v;
            terms.insert(t.name.to_string(), v);
        }
    }
    Level { mean, variance, terms }
}

fn evaluate(kind: EnsembleKind, f: &TestFunction, spec: &QuadratureSpec, want_variance: bool) -> Result<MomentFormulaResult> {
    kind.validate()?;
    spec.validate()?;
    let cat = term_catalog(kind.beta);
    let Some((lo, hi)) = f.effective_support() else {
        let mut per_term_values = BTreeMap::new();
        for t in cat.mean.iter().chain(if want_variance { cat.variance.iter() } else { [].iter() }) {
            per_term_values.insert(t.name.to_string(), 0.0);
        }
        return Ok(MomentFormulaResult { mean: 0.0, variance: 0.0, per_term_values, quad_err: 0.0, caveat: REMAINDER_CAVEAT });
    };
    let npp = spec.nodes_per_panel;
    let mut panels = ((hi - lo).ceil() as usize).max(4);
    let mut prev = evaluate_level(&Grid::new(f, lo, hi, panels, npp), &cat, want_variance);
    let mut last_err = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        panels *= 2;
        let cur = evaluate_level(&Grid::new(f, lo, hi, panels, npp), &cat, want_variance);
        let err = (cur.mean - prev.mean).abs().max((cur.variance - prev.variance).abs());
        let scale = cur.mean.abs().max(cur.variance.abs());
        let tol = spec.abs_tol.max(spec.rel_tol * scale);
        // a level-to-level change near rounding is as converged as it gets
        let floor = 64.0 * f64::EPSILON * scale.max(1.0);
        last_err = err;
        if err <= tol || err <= floor {
            return Ok(MomentFormulaResult {
                mean: cur.mean,
                variance: cur.variance,
                per_term_values: cur.terms,
                quad_err: err.max(floor),
                caveat: REMAINDER_CAVEAT,
            });
        }
        prev = cur;
    }
    Err(Error::NonConvergence { estimate: prev.mean, err_estimate: last_err, panels })
}

/// Mean, variance and per-term breakdown for the ensemble.
pub fn moment_formulas(kind: EnsembleKind, f: &TestFunction, spec: &QuadratureSpec) -> Result<MomentFormulaResult> {
    evaluate(kind, f, spec, true)
}

/// Mean terms only (no two-dimensional integrals).
pub fn mean_formula(kind: EnsembleKind, f: &TestFunction, spec: &QuadratureSpec) -> Result<MomentFormulaResult> {
    evaluate(kind, f, spec, false)
}

pub fn mean_asymptotic(kind: EnsembleKind, f: &TestFunction, spec: &QuadratureSpec) -> Result<f64> {
    Ok(mean_formula(kind, f, spec)?.mean)
}

pub fn variance_asymptotic(kind: EnsembleKind, f: &TestFunction, spec: &QuadratureSpec) -> Result<f64> {
    Ok(moment_formulas(kind, f, spec)?.variance)
}

/// Second-order cumulant expansion -lambda mean + lambda^2/2 variance of log E[e^{-lambda sum F}].
pub fn mgf_log_asymptotic(kind: EnsembleKind, f: &TestFunction, lambda: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
    }
    let size = lambda.abs() * f.sup_abs();
    if size > MGF_LAMBDA_GUARD {
        return Err(Error::Range(format!(
            "|lambda| * max|F| = {size:.3} exceeds {MGF_LAMBDA_GUARD}; the quadratic truncation does not apply"
        )));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let r = moment_formulas(kind, f, spec)?;
    Ok(-lambda * r.mean + 0.5 * lambda * lambda * r.variance)
}

/// The beta = 1, 4 correction terms, each coefficient-weighted, by name.
pub fn correction_terms(kind: EnsembleKind, f: &TestFunction, spec: &QuadratureSpec) -> Result<BTreeMap<String, f64>> {
    if kind.beta == Beta::Two {
        return Err(Error::InvalidParameter(format!("{} has no correction terms", kind.name())));
    }
    let r = moment_formulas(kind, f, spec)?;
    let cat = term_catalog(kind.beta);
    let names: Vec<&str> = cat.mean.iter().chain(&cat.variance).filter(|t| t.is_correction()).map(|t| t.name).collect();
    Ok(r.per_term_values.into_iter().filter(|(k, _)| names.contains(&k.as_str())).collect())
}
