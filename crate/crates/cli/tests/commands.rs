use std::process::{Command, Output};

use serde_json::Value;
use softedge::bwasym::{bw_c1, bw_c2};
use softedge::edgestats::{mean_asymptotic, moment_formulas};
use softedge::kernel::{default_rate_grid, edge_kernel_sup_error, EnsembleKind};
use softedge::quad::QuadratureSpec;
use softedge::testfn::TestFunction;

fn softedge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softedge")).args(args).output().expect("binary runs")
}

fn softedge_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softedge")).args(args).env(key, value).output().expect("binary runs")
}

fn csv_rows(out: &Output) -> Vec<std::collections::HashMap<String, String>> {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect()
        })
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn mean_matches_library() {
    let rows = csv_rows(&softedge(&["mean", "--ensemble", "gue", "--f", "gauss:1,0"]));
    assert_eq!(rows.len(), 1);
    let oracle = mean_asymptotic(EnsembleKind::gue(), &TestFunction::gauss(1.0, 0.0).unwrap(), &QuadratureSpec::default()).unwrap();
    assert_eq!(num(&rows[0]["value"]).to_bits(), oracle.to_bits());
    assert_eq!(rows[0]["f"], "gauss:1,0");
}

#[test]
fn variance_of_zero_function() {
    let rows = csv_rows(&softedge(&["variance", "--ensemble", "gue", "--f", "zero"]));
    assert_eq!(num(&rows[0]["value"]), 0.0);
}

#[test]
fn per_term_breakdown_sums_to_value() {
    let rows = csv_rows(&softedge(&["variance", "--ensemble", "goe", "--f", "sech2:2"]));
    let row = &rows[0];
    let total: f64 = row.iter().filter(|(k, _)| k.starts_with("term:")).map(|(_, v)| num(v)).sum();
    let value = num(&row["value"]);
    assert!((total - value).abs() < 1e-12 * value.abs().max(1.0), "{total} vs {value}");
    let r = moment_formulas(EnsembleKind::goe(), &TestFunction::sech2(2.0).unwrap(), &QuadratureSpec::default()).unwrap();
    assert_eq!(value.to_bits(), r.variance.to_bits());
}

#[test]
fn validation_failures_exit_2() {
    let out = softedge(&["mean", "--ensemble", "lse", "--alpha", "-0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha must be > 0 for LSE"));
    for args in [
        &["kernel-converge", "--ensemble", "loe", "--alpha", "1", "--ns", "51,100"][..],
        &["mean", "--f", "box:1"],
        &["mean", "--ensemble", "cue"],
        &["compare", "--n-samples", "10"],
        &["mean", "--tol", "0"],
        &["bw-scan", "--gammas", "4"],
        &["nonsense"],
    ] {
        let out = softedge(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = softedge_env(&["mean"], "EDGESTATS_THREADS", "zero");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_converge_rows_and_slope() {
    let rows = csv_rows(&softedge(&["kernel-converge", "--ensemble", "gue", "--ns", "50,100,200,400"]));
    assert_eq!(rows.len(), 4);
    let grid = default_rate_grid();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in &rows {
        let n: usize = row["n"].parse().unwrap();
        let e = num(&row["sup_error"]);
        assert_eq!(e.to_bits(), edge_kernel_sup_error(EnsembleKind::gue(), n, &grid).unwrap().to_bits());
        xs.push((n as f64).ln());
        ys.push(e.ln());
    }
    // independent least-squares slope of the printed errors
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((num(&rows[0]["slope"]) - slope).abs() < 1e-12);

    let single = csv_rows(&softedge(&["kernel-converge", "--ns", "100"]));
    assert_eq!(single.len(), 1);
    assert_eq!(single[0]["slope"], "");
}

#[test]
fn bw_scan_fit_and_guards() {
    let out = softedge(&["bw-scan", "--format", "json"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let spec = QuadratureSpec::default();
    let f = TestFunction::gauss(1.0, -2.0).unwrap();
    let c1 = bw_c1(&f, 0.05, &spec).unwrap();
    let c2 = bw_c2(&f, 0.05, &spec).unwrap();
    assert_eq!(v["meta"]["details"]["c1"].as_f64().unwrap(), c1);
    assert_eq!(v["meta"]["details"]["c2"].as_f64().unwrap(), c2);
    let c1_fit = v["meta"]["details"]["c1_fit"].as_f64().unwrap();
    assert!(((c1_fit - c1) / c1).abs() < 0.05, "{c1_fit} vs {c1}");
    for r in rows {
        let g = r["gamma"].as_f64().unwrap();
        let pred = r["predicted"].as_f64().unwrap();
        assert_eq!(pred, c1 * g.powf(1.5) + c2);
    }

    let zero = csv_rows(&softedge(&["bw-scan", "--lambda", "0"]));
    assert_eq!(zero.len(), 3);
    assert!(zero.iter().all(|r| r.iter().filter(|(k, _)| *k != "gamma").all(|(_, v)| num(v) == 0.0)));

    let out = softedge(&["bw-scan", "--lambda", "1e4"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at x = "));
}

#[test]
fn csv_and_json_agree_bitwise() {
    for args in [&["variance", "--ensemble", "gse", "--f", "polygauss:2,1"][..], &["bw-scan"]] {
        let csv_out = softedge(args);
        let mut json_args = args.to_vec();
        json_args.extend(["--format", "json"]);
        let json_out = softedge(&json_args);
        let v: Value = serde_json::from_slice(&json_out.stdout).unwrap();
        let rows = csv_rows(&csv_out);
        for (c, j) in rows.iter().zip(v["rows"].as_array().unwrap()) {
            for (k, s) in c {
                if let Ok(x) = s.parse::<f64>() {
                    assert_eq!(x.to_bits(), j[k].as_f64().unwrap().to_bits(), "{k}");
                }
            }
        }
    }
}

#[test]
fn compare_gue_default() {
    let rows = csv_rows(&softedge(&["compare"]));
    let sources: Vec<&str> = rows.iter().map(|r| r["source"].as_str()).collect();
    assert_eq!(sources, ["asymptotic", "monte_carlo", "fredholm"]);
    assert_eq!(rows[0]["within_tolerance"], "true", "{:?}", rows[0]);
    assert_eq!(rows[2]["within_tolerance"], "true", "{:?}", rows[2]);
}

#[test]
fn compare_is_deterministic_and_fredholm_only_for_unitary() {
    let dir = std::env::temp_dir();
    let a = dir.join(format!("softedge-cmp-a-{}.csv", std::process::id()));
    let b = dir.join(format!("softedge-cmp-b-{}.csv", std::process::id()));
    let args = |p: &std::path::Path| {
        vec!["compare".to_string(), "--n".into(), "60".into(), "--n-samples".into(), "300".into(), "--seed".into(), "9".into(), "-o".into(), p.display().to_string()]
    };
    let run = |p: &std::path::Path, threads: &str| {
        let a: Vec<String> = args(p);
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        assert!(softedge_env(&a, "EDGESTATS_THREADS", threads).status.success());
        std::fs::read(p).unwrap()
    };
    let first = run(&a, "1");
    let second = run(&b, "2");
    assert_eq!(first, second);
    let _ = std::fs::remove_file(&a);
    let _ = std::fs::remove_file(&b);

    let rows = csv_rows(&softedge(&["compare", "--ensemble", "goe", "--n", "60", "--n-samples", "200"]));
    assert!(rows.iter().all(|r| r["source"] != "fredholm"));
}
