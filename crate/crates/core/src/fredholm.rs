//! Nyström evaluation of det(I + K f) for the Airy kernel and the finite-N
//! unitary kernels.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{airy_kernel_with, scaled_kernel_matrix, scaled_wavefunctions, Beta, EnsembleKind};
use crate::quad::{gauss_legendre, integrate_1d, panel_rule, Interval, QuadratureSpec};
use crate::specfun::airy_all;
use crate::testfn::TestFunction;

/// Largest kernel-weighted mass of |f| allowed outside the window.
pub const LEAK_TOL: f64 = 1e-12;

pub const DEFAULT_WINDOW: (f64, f64) = (-10.0, 6.0);
pub const DEFAULT_PANELS: usize = 8;
pub const DEFAULT_NODES_PER_PANEL: usize = 12;
pub const MAX_FINITE_N: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct NystromGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub window: (f64, f64),
}

impl NystromGrid {
    /// One Gauss-Legendre rule with `n` nodes on [a, b].
    pub fn gauss_legendre(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::composite(a, b, 1, n)
    }

    /// `panels` equal Gauss-Legendre panels of `npp` nodes on [a, b].
    pub fn composite(a: f64, b: f64, panels: usize, npp: usize) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("window [{a}, {b}] must be finite and increasing")));
        }
        if panels == 0 || npp == 0 || npp > 128 {
            return Err(Error::InvalidParameter(format!("grid needs panels >= 1 and 1 <= nodes <= 128, got {panels} x {npp}")));
        }
        let (nodes, weights) = panel_rule(a, b, panels, npp);
        Ok(NystromGrid { nodes, weights, window: (a, b) })
    }

    /// Same window, twice the nodes per panel (or twice the panels beyond 64).
    pub fn refined(&self) -> Result<Self> {
        let (a, b) = self.window;
        let n = self.nodes.len();
        // recover the panel layout from the node count and the first panel
        let npp = (1..=128usize)
            .rev()
            .find(|&p| n % p == 0 && self.matches_layout(n / p, p))
            .unwrap_or(n);
        let panels = n / npp;
        if 2 * npp <= 128 {
            Self::composite(a, b, panels, 2 * npp)
        } else {
            Self::composite(a, b, 2 * panels, npp)
        }
    }

    fn matches_layout(&self, panels: usize, npp: usize) -> bool {
        let (a, b) = self.window;
        let (x, _) = panel_rule(a, b, panels, npp);
        x.len() == self.nodes.len() && x.iter().zip(&self.nodes).all(|(p, q)| (p - q).abs() < 1e-14 * (1.0 + q.abs()))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl Default for NystromGrid {
    fn default() -> Self {
        Self::composite(DEFAULT_WINDOW.0, DEFAULT_WINDOW.1, DEFAULT_PANELS, DEFAULT_NODES_PER_PANEL).expect("default grid is valid")
    }
}

fn airy_diag(x: f64) -> f64 {
    let v = airy_all(x);
    (v.aip * v.aip - x * v.ai * v.ai).max(0.0)
}

/// Kernel-weighted mass of |fhat| outside the window.
fn check_window<G: Fn(f64) -> f64>(fhat: &G, grid: &NystromGrid) -> Result<()> {
    let (a, b) = grid.window;
    let spec = QuadratureSpec::default().with_tol(1e-15, 1e-6);
    let left = integrate_1d(|x| fhat(x).abs() * airy_diag(x), Interval::new(a - 60.0, a), &spec)?;
    let right = integrate_1d(|x| fhat(x).abs() * airy_diag(x), Interval::new(b, b.max(0.0) + 30.0), &spec)?;
    let leak = left.value + right.value;
    if leak > LEAK_TOL {
        return Err(Error::Window(format!(
            "f leaks {leak:.3e} of kernel-weighted mass outside [{a}, {b}]"
        )));
    }
    Ok(())
}

fn sample(fhat: &dyn Fn(f64) -> f64, grid: &NystromGrid) -> Result<Vec<f64>> {
    let f: Vec<f64> = grid.nodes.iter().map(|&x| fhat(x)).collect();
    for (&x, &v) in grid.nodes.iter().zip(&f) {
        if !v.is_finite() || 1.0 + v < 0.0 {
            return Err(Error::LogDomain { x });
        }
    }
    Ok(f)
}

/// log det(I + K diag(w f)) for a kernel matrix on the grid nodes.
pub fn logdet_from_matrix(k: &DMatrix<f64>, grid: &NystromGrid, f: &[f64]) -> Result<f64> {
    let m = grid.len();
    if f.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let symmetric = (0..m).all(|i| (0..i).all(|j| k[(i, j)] == k[(j, i)]));
    let nonneg = f.iter().all(|&v| v >= 0.0);
    let nonpos = f.iter().all(|&v| v <= 0.0);
    if symmetric && (nonneg || nonpos) {
        let s = if nonneg { 1.0 } else { -1.0 };
        let d: Vec<f64> = (0..m).map(|i| (grid.weights[i] * f[i].abs()).sqrt()).collect();
        let a = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } + s * d[i] * k[(i, j)] * d[j]);
        if let Some(ch) = a.clone().cholesky() {
            let l = ch.l();
            return Ok(2.0 * (0..m).map(|i| l[(i, i)].ln()).sum::<f64>());
        }
        return logdet_lu(a);
    }
    let a = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } + k[(i, j)] * grid.weights[j] * f[j]);
    logdet_lu(a)
}

fn logdet_lu(a: DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    let lu = a.lu();
    let u = lu.u();
    let mut sign: f64 = lu.p().determinant();
    let mut total = 0.0;
    for i in 0..n {
        let d = u[(i, i)];
        if d == 0.0 {
            return Err(Error::Singular("zero pivot in I + K f".into()));
        }
        if d < 0.0 {
            sign = -sign;
        }
        total += d.abs().ln();
    }
    if sign < 0.0 {
        return Err(Error::Singular("det(I + K f) is negative".into()));
    }
    Ok(total)
}

/// Airy kernel on the grid nodes.
pub fn airy_kernel_matrix(grid: &NystromGrid) -> DMatrix<f64> {
    let v: Vec<_> = grid.nodes.iter().map(|&x| airy_all(x)).collect();
    let m = grid.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let t = airy_kernel_with(grid.nodes[i], &v[i], grid.nodes[j], &v[j]);
            k[(i, j)] = t;
            k[(j, i)] = t;
        }
    }
    k
}

/// log det(I + K fhat) for the Airy kernel.
pub fn logdet_airy<G: Fn(f64) -> f64>(fhat: G, grid: &NystromGrid) -> Result<f64> {
    check_window(&fhat, grid)?;
    let f = sample(&fhat, grid)?;
    logdet_from_matrix(&airy_kernel_matrix(grid), grid, &f)
}

/// Partial sum of sum_{m<=k} (-1)^{m+1}/m Tr (K fhat)^m, k in 1..=3.
pub fn logdet_trace_expansion<G: Fn(f64) -> f64>(fhat: G, grid: &NystromGrid, k: usize) -> Result<f64> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidParameter(format!("trace expansion order must be 1, 2 or 3, got {k}")));
    }
    check_window(&fhat, grid)?;
    let f = sample(&fhat, grid)?;
    let kern = airy_kernel_matrix(grid);
    Ok(trace_series(&kern, grid, &f, k))
}

fn trace_series(kern: &DMatrix<f64>, grid: &NystromGrid, f: &[f64], k: usize) -> f64 {
    let m = grid.len();
    let t = DMatrix::from_fn(m, m, |i, j| kern[(i, j)] * grid.weights[j] * f[j]);
    let mut power = t.clone();
    let mut total = 0.0;
    for order in 1..=k {
        if order > 1 {
            power = &power * &t;
        }
        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * power.trace() / order as f64;
    }
    total
}

fn check_unitary(kind: EnsembleKind, n: usize) -> Result<()> {
    if kind.beta != Beta::Two {
        return Err(Error::Domain(format!(
            "finite-N determinants are only available for beta = 2, got {}",
            kind.name()
        )));
    }
    kind.validate_n(n)?;
    if n > MAX_FINITE_N {
        return Err(Error::InvalidParameter(format!("N must be <= {MAX_FINITE_N}, got {n}")));
    }
    Ok(())
}

fn mgf_weight(f: &TestFunction, lambda: f64) -> impl Fn(f64) -> f64 + '_ {
    move |x| (-lambda * f.eval(x)).exp_m1()
}

/// log E[exp(-lambda sum F(scaled x_j))] at finite N through the
/// Christoffel-Darboux kernel on the edge-mapped grid.
pub fn mgf_finite_n_unitary(kind: EnsembleKind, n: usize, f: &TestFunction, lambda: f64, grid: &NystromGrid) -> Result<f64> {
    check_unitary(kind, n)?;
    if lambda == 0.0 || f.is_zero() {
        return Ok(0.0);
    }
    let fhat = mgf_weight(f, lambda);
    check_window(&fhat, grid)?;
    let fv = sample(&fhat, grid)?;
    let k = scaled_kernel_matrix(kind, n, &grid.nodes)?;
    logdet_from_matrix(&k, grid, &fv)
}

/// The same determinant through the N x N Gram matrix of the wavefunction basis.
pub fn mgf_finite_n_gram(kind: EnsembleKind, n: usize, f: &TestFunction, lambda: f64, grid: &NystromGrid) -> Result<f64> {
    check_unitary(kind, n)?;
    if lambda == 0.0 || f.is_zero() {
        return Ok(0.0);
    }
    let fhat = mgf_weight(f, lambda);
    check_window(&fhat, grid)?;
    let fv = sample(&fhat, grid)?;
    let phi = scaled_wavefunctions(kind, n, &grid.nodes)?;
    let wf = DVector::from_fn(grid.len(), |i, _| grid.weights[i] * fv[i]);
    let mut g = phi.transpose() * DMatrix::from_diagonal(&wf) * &phi;
    for j in 0..n {
        g[(j, j)] += 1.0;
    }
    if let Some(ch) = g.clone().cholesky() {
        let l = ch.l();
        return Ok(2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>());
    }
    logdet_lu(g)
}

/// Mean Tr(K F) and variance Tr(K F^2) - Tr(K F K F) of the statistic at finite N.
pub fn finite_n_moments(kind: EnsembleKind, n: usize, f: &TestFunction, grid: &NystromGrid) -> Result<(f64, f64)> {
    check_unitary(kind, n)?;
    let k = scaled_kernel_matrix(kind, n, &grid.nodes)?;
    Ok(trace_moments(&k, grid, f))
}

/// Same moments for the Airy kernel.
pub fn airy_moments(f: &TestFunction, grid: &NystromGrid) -> (f64, f64) {
    trace_moments(&airy_kernel_matrix(grid), grid, f)
}

fn trace_moments(k: &DMatrix<f64>, grid: &NystromGrid, f: &TestFunction) -> (f64, f64) {
    let m = grid.len();
    let fv: Vec<f64> = grid.nodes.iter().map(|&x| f.eval(x)).collect();
    let mut mean = 0.0;
    let mut diag2 = 0.0;
    for i in 0..m {
        mean += k[(i, i)] * grid.weights[i] * fv[i];
        diag2 += k[(i, i)] * grid.weights[i] * fv[i] * fv[i];
    }
    let mut cross = 0.0;
    for i in 0..m {
        for j in 0..m {
            let kij = k[(i, j)];
            cross += kij * k[(j, i)] * grid.weights[i] * fv[i] * grid.weights[j] * fv[j];
        }
    }
    (mean, diag2 - cross)
}

/// First two cumulants read off the Airy determinant by symmetric differences in lambda.
pub fn airy_cumulants_from_logdet(f: &TestFunction, lambda: f64, grid: &NystromGrid) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda step must be positive".into()));
    }
    let plus = logdet_airy(mgf_weight(f, lambda), grid)?;
    let minus = logdet_airy(mgf_weight(f, -lambda), grid)?;
    let mean = -(plus - minus) / (2.0 * lambda);
    let variance = (plus + minus) / (lambda * lambda);
    Ok((mean, variance))
}

/// Composite rule used by callers that want more nodes than one GL rule carries.
pub fn window_grid(window: (f64, f64), nodes: usize) -> Result<NystromGrid> {
    if nodes <= 128 && gauss_legendre(nodes).nodes.len() == nodes {
        NystromGrid::gauss_legendre(window.0, window.1, nodes)
    } else {
        let panels = nodes.div_ceil(64);
        NystromGrid::composite(window.0, window.1, panels, 64)
    }
}
