//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use softedge::bwasym::{bw_scan, coulomb_s1, coulomb_s2, shift_mean, shift_variance};
use softedge::edgestats::{mgf_log_asymptotic, moment_formulas};
use softedge::fredholm::{logdet_airy, logdet_trace_expansion, mgf_finite_n_unitary, NystromGrid};
use softedge::kernel::{
    airy_kernel, airy_kernel_factorized, cd_kernel_hermite, cd_kernel_laguerre, default_rate_grid,
    edge_kernel_sup_error, rate_slope, sum_kernel_hermite, sum_kernel_laguerre, EnsembleKind,
};
use softedge::mcsim::{edge_histogram, estimate_moments, moments_of, sample_indexed, EdgeHistogram};
use softedge::quad::{integrate_1d, integrate_2d, Interval, QuadratureSpec, Rect, Rule};
use softedge::specfun::{airy_ai, airy_ai_prime, airy_all, airy_primitive, b_function};
use softedge::testfn::TestFunction;

const SEED: u64 = 20_240_611;

struct Outcome {
    checks: Vec<(String, bool)>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { checks: Vec::new() }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn gauss() -> TestFunction {
    TestFunction::gauss(1.0, 0.0).unwrap()
}

// ---------------------------------------------------------------------------

fn special_functions() -> Outcome {
    let mut out = Outcome::new();
    let ai0 = airy_primitive(0.0);
    out.check(format!("AI(0) - 2/3 = {:.1e}", ai0 - 2.0 / 3.0), (ai0 - 2.0 / 3.0).abs() < 1e-9);
    let tail = integrate_1d(airy_ai, Interval::new(0.0, f64::INFINITY), &spec()).unwrap().value;
    out.check(format!("int_0^inf Ai - 1/3 = {:.1e}", tail - 1.0 / 3.0), (tail - 1.0 / 3.0).abs() < 1e-9);
    let b0 = b_function(0.0);
    out.check(format!("B(0) - 1/3 = {:.1e}", b0 - 1.0 / 3.0), (b0 - 1.0 / 3.0).abs() < 1e-10);
    let h = 1e-4;
    let residual = (0..=400)
        .map(|i| {
            let x = -10.0 + 0.05 * i as f64;
            let second = (airy_ai_prime(x + h) - airy_ai_prime(x - h)) / (2.0 * h);
            (second - x * airy_ai(x)).abs()
        })
        .fold(0.0, f64::max);
    out.check(format!("max |Ai'' - x Ai| on [-10, 10] = {residual:.1e}"), residual < 1e-6);
    out
}

/// int K(x, z) K(z, y) dz: tapered body plus the phase-averaged left tail.
fn reproduce(x: f64, y: f64) -> f64 {
    let sp = spec().with_tol(1e-12, 1e-12);
    let (z1, z2) = (400.0, 1200.0);
    let taper = |z: f64| {
        if z >= -z1 {
            1.0
        } else {
            let s = (z + z2) / (z2 - z1);
            s - (2.0 * PI * s).sin() / (2.0 * PI)
        }
    };
    let body = integrate_1d(|z| airy_kernel(x, z) * airy_kernel(z, y) * taper(z), Interval::new(-z2, 20.0), &sp)
        .unwrap()
        .value;
    let (ax, ay, bx, by) = (airy_ai(x), airy_ai(y), airy_ai_prime(x), airy_ai_prime(y));
    let mean = |s: f64| (ax * ay * s.sqrt() + bx * by / s.sqrt()) / (2.0 * PI * (x + s) * (y + s));
    let upper = integrate_1d(|s| mean(s) * (1.0 - taper(-s)), Interval::new(z1, z2), &sp).unwrap().value;
    let de = QuadratureSpec { rule: Rule::DoubleExponential, ..sp };
    let beyond = integrate_1d(mean, Interval::new(z2, f64::INFINITY), &de).unwrap().value;
    body + upper + beyond
}

fn kernel_identities() -> Outcome {
    let mut out = Outcome::new();
    let grid: Vec<f64> = (0..=20).map(|i| -6.0 + 0.5 * i as f64).collect();
    let symmetric = grid.iter().all(|&x| grid.iter().all(|&y| airy_kernel(x, y) == airy_kernel(y, x)));
    out.check("K(x, y) == K(y, x) bitwise on [-6, 4]^2", symmetric);
    let mut gap = 0.0f64;
    for &x in &grid {
        for &y in &grid {
            gap = gap.max((airy_kernel_factorized(x, y).unwrap() - airy_kernel(x, y)).abs());
        }
    }
    out.check(format!("factorized vs direct sup-gap = {gap:.1e}"), gap < 1e-8);
    for (x, y) in [(0.0, 0.0), (1.0, -1.0)] {
        let r = reproduce(x, y) - airy_kernel(x, y);
        out.check(format!("reproducing at ({x}, {y}): {r:.1e}"), r.abs() < 1e-6);
    }
    let mut cd = 0.0f64;
    for n in 1..=20 {
        for &(x, y) in &[(0.3, -1.1), (2.0, 2.5), (-3.0, 4.0), (0.7, 0.70001)] {
            cd = cd.max((cd_kernel_hermite(n, x, y) - sum_kernel_hermite(n, x, y)).abs());
        }
        for alpha in [0.0, 1.5] {
            for &(x, y) in &[(0.4, 3.0), (5.0, 7.5), (12.0, 1.0)] {
                let a = cd_kernel_laguerre(n, alpha, x, y).unwrap();
                let b = sum_kernel_laguerre(n, alpha, x, y).unwrap();
                cd = cd.max((a - b).abs());
            }
        }
    }
    out.check(format!("CD vs direct sum, N <= 20: {cd:.1e}"), cd < 1e-12);
    out
}

fn edge_rates() -> Outcome {
    let mut out = Outcome::new();
    let ns = [50usize, 100, 200, 400];
    let grid = default_rate_grid();
    for kind in [
        EnsembleKind::gue(),
        EnsembleKind::gse(),
        EnsembleKind::lue(1.0),
        EnsembleKind::lse(1.0),
        EnsembleKind::loe(1.0),
    ] {
        let errs: Vec<f64> = ns.iter().map(|&n| edge_kernel_sup_error(kind, n, &grid).unwrap()).collect();
        let slope = rate_slope(&ns, &errs).unwrap();
        let shown: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
        out.check(
            format!("{} slope {slope:.3} (errors {})", kind.name(), shown.join(", ")),
            (-0.45..=-0.20).contains(&slope),
        );
    }
    out
}

fn ensemble_equivalence() -> Outcome {
    let mut out = Outcome::new();
    let fs = [
        gauss(),
        TestFunction::sech2(2.0).unwrap(),
        TestFunction::poly_gauss(2, 1.0).unwrap().shifted(-0.5),
    ];
    for f in &fs {
        let pairs = [
            (EnsembleKind::gue(), EnsembleKind::lue(1.0)),
            (EnsembleKind::gse(), EnsembleKind::lse(1.0)),
            (EnsembleKind::goe(), EnsembleKind::loe(1.0)),
        ];
        for (g, l) in pairs {
            let a = moment_formulas(g, f, &spec()).unwrap();
            let b = moment_formulas(l, f, &spec()).unwrap();
            out.check(
                format!("{f}: {} == {} (mean, variance)", g.name(), l.name()),
                a.mean == b.mean && a.variance == b.variance,
            );
        }
        let u = moment_formulas(EnsembleKind::gue(), f, &spec()).unwrap();
        let s = moment_formulas(EnsembleKind::gse(), f, &spec()).unwrap();
        let o = moment_formulas(EnsembleKind::goe(), f, &spec()).unwrap();
        let lhs = o.mean - u.mean;
        let rhs = 2.0 * (s.mean - 0.5 * u.mean);
        let tol = 4.0 * u.quad_err.max(s.quad_err).max(o.quad_err);
        out.check(
            format!("{f}: beta relation gap {:.1e} vs 4 quad_err {tol:.1e}", lhs - rhs),
            (lhs - rhs).abs() <= tol,
        );
    }
    out
}

fn fredholm_consistency() -> Outcome {
    let mut out = Outcome::new();
    let grid = NystromGrid::default();
    let f = gauss();
    let gap = |lambda: f64| {
        let w = |x: f64| (-lambda * f.eval(x)).exp_m1();
        (logdet_airy(w, &grid).unwrap() - logdet_trace_expansion(w, &grid, 2).unwrap()).abs()
    };
    let ratio = gap(0.2) / gap(0.1);
    out.check(format!("two-term remainder ratio for lambda halving = {ratio:.3}"), (4.0..=16.0).contains(&ratio));
    let lambda = 0.1;
    let asym = mgf_log_asymptotic(EnsembleKind::gue(), &f, lambda, &spec()).unwrap();
    let d: Vec<f64> = [100usize, 400]
        .iter()
        .map(|&n| (mgf_finite_n_unitary(EnsembleKind::gue(), n, &f, lambda, &grid).unwrap() - asym).abs())
        .collect();
    out.check(format!("|finite-N - asymptotic| at N = 100, 400: {:.2e}, {:.2e}", d[0], d[1]), d[1] < d[0]);
    out
}

/// Bin counts against n * int_bin density, sigma = sqrt(expected).
fn histogram_z(h: &EdgeHistogram, density: impl Fn(f64) -> f64) -> Vec<f64> {
    let sp = spec().with_tol(1e-12, 1e-10);
    h.counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mass = integrate_1d(&density, Interval::new(h.edges[i], h.edges[i + 1]), &sp).unwrap().value;
            let expected = h.n_samples as f64 * mass;
            (c as f64 - expected) / expected.sqrt()
        })
        .collect()
}

/// E[x1 + x2] and E[x1^2 + x2^2] for the two-point density (x1 - x2)^2 w(x1) w(x2).
fn two_point_moments(w: impl Fn(f64) -> f64, support: Interval) -> (f64, f64) {
    let sp = spec().with_tol(1e-13, 1e-11).with_cuts(-12.0, 80.0);
    let rect = Rect { x: support, y: support };
    let weighted = |g: &dyn Fn(f64, f64) -> f64| {
        integrate_2d(|x, y| (x - y).powi(2) * w(x) * w(y) * g(x, y), rect, &sp).unwrap().value
    };
    let z = weighted(&|_, _| 1.0);
    (weighted(&|x, y| x + y) / z, weighted(&|x, y| x * x + y * y) / z)
}

fn monte_carlo() -> Outcome {
    let mut out = Outcome::new();
    let n = 300;
    let samples = 20_000;
    let f = gauss();
    let kind = EnsembleKind::gue();
    let est = estimate_moments(kind, n, &f, samples, SEED).unwrap();
    let mean = moment_formulas(kind, &f, &spec()).unwrap().mean;
    let slack = 0.05 * (n as f64).powf(-1.0 / 3.0);
    let gap = (est.mean - mean).abs();
    out.check(
        format!(
            "GUE N={n}: mc mean {:.5} +- {:.5} vs {mean:.5}, gap {gap:.2e} <= 3 se + {slack:.2e}",
            est.mean, est.stderr_mean
        ),
        gap <= 3.0 * est.stderr_mean + slack,
    );
    let h = edge_histogram(kind, n, samples, SEED, (-4.0, 2.0), 20).unwrap();
    let z = histogram_z(&h, |x| {
        let v = airy_all(x);
        v.aip * v.aip - x * v.ai * v.ai
    });
    let worst = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.check(format!("GUE N={n} edge histogram vs K(x,x): max |z| = {worst:.2} over 20 bins"), worst <= 4.0);
    let cases: [(EnsembleKind, Box<dyn Fn(f64) -> f64>, Interval); 3] = [
        (EnsembleKind::gue(), Box::new(|x: f64| (-x * x).exp()), Interval::real_line()),
        (EnsembleKind::lue(0.0), Box::new(|x: f64| (-x).exp()), Interval::new(0.0, f64::INFINITY)),
        (EnsembleKind::lue(1.0), Box::new(|x: f64| x * (-x).exp()), Interval::new(0.0, f64::INFINITY)),
    ];
    for (kind, w, support) in cases {
        let (m1, m2) = two_point_moments(w, support);
        let draws: Vec<[f64; 2]> = (0..samples as u64)
            .map(|i| {
                let e = sample_indexed(kind, 2, SEED, i).unwrap().eigenvalues;
                [e[0] + e[1], e[0] * e[0] + e[1] * e[1]]
            })
            .collect();
        let p1 = moments_of(&draws.iter().map(|d| d[0]).collect::<Vec<_>>(), SEED);
        let p2 = moments_of(&draws.iter().map(|d| d[1]).collect::<Vec<_>>(), SEED);
        out.check(
            format!(
                "{} N=2: E p1 {:.4} +- {:.4} vs {m1:.4}, E p2 {:.4} +- {:.4} vs {m2:.4}",
                kind.name(),
                p1.mean,
                p1.stderr_mean,
                p2.mean,
                p2.stderr_mean
            ),
            (p1.mean - m1).abs() <= 4.0 * p1.stderr_mean && (p2.mean - m2).abs() <= 4.0 * p2.stderr_mean,
        );
    }
    out
}

fn symplectic_profile() -> Outcome {
    let mut out = Outcome::new();
    let n = 200;
    let h = edge_histogram(EnsembleKind::gse(), n, 10_000, SEED, (-4.0, 2.0), 20).unwrap();
    let z = histogram_z(&h, |x| {
        let v = airy_all(x);
        0.5 * (v.aip * v.aip - x * v.ai * v.ai + 0.25 * v.ai * v.b())
    });
    let worst = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bad = z.iter().filter(|v| v.abs() > 4.0).count();
    out.check(
        format!("GSE N={n} edge histogram vs K + Ai B / 4: max |z| = {worst:.2}, {bad} of 20 bins beyond 4 sigma"),
        worst <= 4.0,
    );
    out
}

fn basor_widom() -> Outcome {
    let mut out = Outcome::new();
    let f = TestFunction::gauss(1.0, -2.0).unwrap();
    let lambda = 0.05;
    let scan = bw_scan(&f, lambda, &[4.0, 6.0, 8.0], &spec()).unwrap();
    let e1 = (scan.c1_fit - scan.c1) / scan.c1;
    let e2 = (scan.c2_fit - scan.c2) / scan.c2;
    out.check(format!("fitted c1 {:.6e} vs {:.6e} ({:+.2}%)", scan.c1_fit, scan.c1, 100.0 * e1), e1.abs() <= 0.05);
    out.check(format!("fitted c2 {:.6e} vs {:.6e} ({:+.2}%)", scan.c2_fit, scan.c2, 100.0 * e2), e2.abs() <= 0.05);
    let n = 300;
    let v = shift_variance(&f, &spec()).unwrap();
    let m = shift_mean(&f, n, &spec()).unwrap();
    let s1 = coulomb_s1(&f, lambda, &spec()).unwrap();
    let s2 = coulomb_s2(&f, lambda, n, &spec()).unwrap();
    let g1 = s1 + 0.5 * lambda * lambda * v;
    let g2 = s2 - lambda * m;
    out.check(format!("S1 + (lambda^2/2) V = {g1:.1e}"), g1.abs() <= 1e-8);
    out.check(format!("S2 - lambda mu = {g2:.1e}"), g2.abs() <= 1e-8);
    let r = shift_mean(&f, 16 * n, &spec()).unwrap() / m;
    out.check(format!("shift_mean(16N) / shift_mean(N) = {r}"), r == 2.0);
    out
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("special functions", Duration::from_secs(5), special_functions),
        ("kernel identities", Duration::from_secs(30), kernel_identities),
        ("edge convergence rate", Duration::from_secs(120), edge_rates),
        ("ensemble equivalence", Duration::from_secs(60), ensemble_equivalence),
        ("Fredholm consistency", Duration::from_secs(120), fredholm_consistency),
        ("Monte Carlo validation", Duration::from_secs(600), monte_carlo),
        ("beta = 4 edge profile", Duration::from_secs(600), symplectic_profile),
        ("Basor-Widom", Duration::from_secs(120), basor_widom),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let elapsed = t.elapsed();
        let in_time = elapsed <= *budget;
        let ok = outcome.passed() && in_time;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({:.1} s, budget {} s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        for (label, good) in &outcome.checks {
            println!("    [{}] {label}", if *good { "ok" } else { "x" });
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
