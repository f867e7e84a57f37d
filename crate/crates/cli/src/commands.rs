use serde_json::{json, Value};

use softedge::bwasym::bw_scan;
use softedge::edgestats::{mean_formula, moment_formulas, term_catalog, MomentFormulaResult};
use softedge::fredholm::{finite_n_moments, NystromGrid};
use softedge::kernel::{default_rate_grid, edge_kernel_sup_error, rate_slope, Beta};
use softedge::mcsim::estimate_moments;

use crate::config::*;
use crate::report::{Cell, Table};
use crate::CliError;

struct Output {
    table: Table,
    extra: Value,
}

pub fn execute(cfg: &RunConfig) -> Result<String, CliError> {
    let out = match cfg.command {
        Command::Mean | Command::Variance => moment(cfg)?,
        Command::Compare => compare(cfg)?,
        Command::KernelConverge => kernel_converge(cfg)?,
        Command::BwScan => scan(cfg)?,
    };
    Ok(match cfg.format {
        Format::Csv => out.table.to_csv()?,
        Format::Json => out.table.to_json(meta(cfg, out.extra)),
    })
}

fn meta(cfg: &RunConfig, extra: Value) -> Value {
    json!({
        "command": cfg.command.name(),
        "config": {
            "ensemble": cfg.ensemble,
            "alpha": cfg.alpha,
            "f": cfg.f_spec,
            "f_family": cfg.f_family,
            "f_params": cfg.f_params,
            "n": cfg.n,
            "ns": cfg.ns,
            "lambda": cfg.lambda,
            "gammas": cfg.gammas,
            "n_samples": cfg.n_samples,
            "tol": cfg.tol,
        },
        "seed": cfg.seed,
        "versions": {
            "softedge": softedge::VERSION,
            "softedge-cli": env!("CARGO_PKG_VERSION"),
        },
        "details": extra,
    })
}

fn moment(cfg: &RunConfig) -> Result<Output, CliError> {
    let kind = cfg.kind()?;
    let f = cfg.test_function()?;
    let spec = cfg.quadrature()?;
    let is_mean = cfg.command == Command::Mean;
    let r: MomentFormulaResult = if is_mean { mean_formula(kind, &f, &spec)? } else { moment_formulas(kind, &f, &spec)? };
    let cat = term_catalog(kind.beta);
    let terms: Vec<&str> = if is_mean { &cat.mean } else { &cat.variance }.iter().map(|t| t.name).collect();
    let mut columns = vec!["ensemble", "alpha", "f", "value", "quad_err"];
    let term_cols: Vec<String> = terms.iter().map(|t| format!("term:{t}")).collect();
    columns.extend(term_cols.iter().map(String::as_str));
    let mut table = Table::new(&columns);
    let mut row: Vec<Cell> = vec![
        kind.name().into(),
        kind.alpha.into(),
        cfg.f_spec.clone().into(),
        if is_mean { r.mean } else { r.variance }.into(),
        r.quad_err.into(),
    ];
    row.extend(terms.iter().map(|t| Cell::from(r.per_term_values.get(*t).copied())));
    table.push(row);
    Ok(Output { table, extra: json!({ "caveat": r.caveat }) })
}

fn compare(cfg: &RunConfig) -> Result<Output, CliError> {
    let kind = cfg.kind()?;
    kind.validate_n(cfg.n)?;
    let f = cfg.test_function()?;
    let spec = cfg.quadrature()?;
    let asym = moment_formulas(kind, &f, &spec)?;
    let mc = estimate_moments(kind, cfg.n, &f, cfg.n_samples, cfg.seed)?;
    let slack = SLACK_COEFFICIENT * (cfg.n as f64).powf(-1.0 / 3.0);
    let mut table = Table::new(&[
        "source",
        "mean",
        "variance",
        "stderr_mean",
        "stderr_variance",
        "gap_mean",
        "gap_variance",
        "gap_over_stderr_mean",
        "gap_over_stderr_variance",
        "within_tolerance",
    ]);
    let row = |source: &str, mean: f64, var: f64, se_m: f64, se_v: f64| -> Vec<Cell> {
        let (gm, gv) = (mean - mc.mean, var - mc.variance);
        let ratio = |g: f64, se: f64| if se > 0.0 { g / se } else if g == 0.0 { 0.0 } else { f64::INFINITY };
        let within = gm.abs() <= 3.0 * mc.stderr_mean + slack && gv.abs() <= 3.0 * mc.stderr_var + slack;
        vec![
            source.into(),
            mean.into(),
            var.into(),
            se_m.into(),
            se_v.into(),
            gm.into(),
            gv.into(),
            ratio(gm, mc.stderr_mean).into(),
            ratio(gv, mc.stderr_var).into(),
            within.into(),
        ]
    };
    table.push(row("asymptotic", asym.mean, asym.variance, asym.quad_err, asym.quad_err));
    table.push(row("monte_carlo", mc.mean, mc.variance, mc.stderr_mean, mc.stderr_var));
    if kind.beta == Beta::Two {
        let grid = NystromGrid::composite(NYSTROM_WINDOW.0, NYSTROM_WINDOW.1, NYSTROM_PANELS, NYSTROM_NODES_PER_PANEL)?;
        let (m, v) = finite_n_moments(kind, cfg.n, &f, &grid)?;
        table.push(row("fredholm", m, v, 0.0, 0.0));
    }
    Ok(Output { table, extra: json!({ "slack": slack, "caveat": asym.caveat }) })
}

fn kernel_converge(cfg: &RunConfig) -> Result<Output, CliError> {
    let kind = cfg.kind()?;
    if cfg.ns.is_empty() {
        return Err(CliError::Validation("at least one N is required".into()));
    }
    for &n in &cfg.ns {
        kind.validate_n(n)?;
    }
    let grid = default_rate_grid();
    let errs: Vec<f64> = cfg.ns.iter().map(|&n| edge_kernel_sup_error(kind, n, &grid)).collect::<Result<_, _>>()?;
    let slope = if cfg.ns.len() >= 2 { Some(rate_slope(&cfg.ns, &errs)?) } else { None };
    let mut table = Table::new(&["ensemble", "alpha", "n", "sup_error", "slope"]);
    for (&n, &e) in cfg.ns.iter().zip(&errs) {
        table.push(vec![kind.name().into(), kind.alpha.into(), n.into(), e.into(), slope.into()]);
    }
    Ok(Output { table, extra: json!({ "grid": grid, "slope": slope }) })
}

fn scan(cfg: &RunConfig) -> Result<Output, CliError> {
    let f = cfg.test_function()?;
    let spec = cfg.quadrature()?;
    let s = bw_scan(&f, cfg.lambda, &cfg.gammas, &spec)?;
    let mut table = Table::new(&["gamma", "logdet", "predicted", "residual", "c1", "c2", "c1_fit", "c2_fit"]);
    for r in &s.rows {
        table.push(vec![
            r.gamma.into(),
            r.logdet.into(),
            r.predicted.into(),
            r.residual.into(),
            s.c1.into(),
            s.c2.into(),
            s.c1_fit.into(),
            s.c2_fit.into(),
        ]);
    }
    Ok(Output { table, extra: json!({ "c1": s.c1, "c2": s.c2, "c1_fit": s.c1_fit, "c2_fit": s.c2_fit }) })
}
