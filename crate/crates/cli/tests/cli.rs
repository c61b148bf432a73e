use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn gridfill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridfill"))
        .args(args)
        .env_remove("GRIDFILL_SEED")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) {
    let out = gridfill(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
}

fn code(args: &[&str]) -> i32 {
    gridfill(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Everything below the `#` provenance lines.
fn data_rows(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

fn header_config(path: &Path) -> Value {
    let text = fs::read_to_string(path).unwrap();
    let line = text.lines().find_map(|l| l.strip_prefix("# config ")).unwrap();
    serde_json::from_str(line).unwrap()
}

fn report(path: &Path) -> Value {
    let doc: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert!(doc["config"].is_object());
    doc["report"].clone()
}

/// Table rows keyed by column name.
fn table(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = data_rows(path);
    let mut lines = text.lines();
    let cols: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            cols.iter()
                .zip(l.split(','))
                .map(|(c, v)| (c.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn assert_close_json(got: &Value, want: &Value, key: &str) {
    match (got, want) {
        (Value::Number(g), Value::Number(w)) => {
            let (g, w) = (g.as_f64().unwrap(), w.as_f64().unwrap());
            assert!(close(g, w, 1e-9), "{key}: {g} vs {w}");
        }
        (Value::Array(g), Value::Array(w)) => {
            assert_eq!(g.len(), w.len(), "{key}: length");
            for (k, (g, w)) in g.iter().zip(w).enumerate() {
                assert_close_json(g, w, &format!("{key}[{k}]"));
            }
        }
        (Value::Object(_), Value::Object(w)) => {
            for (k, w) in w {
                assert_close_json(&got[k], w, &format!("{key}.{k}"));
            }
        }
        _ => assert_eq!(got, want, "{key}"),
    }
}

#[test]
fn missing_input_is_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(code(&["solve", "--matrix", "/no/such/file.csv", "-o", p(&out)]), 2);
    assert_eq!(code(&["coherence", "-o", p(&out)]), 2);
    assert_eq!(code(&["solve", "--matrix", p(&fixture("flat.csv"))]), 2);
    assert_eq!(code(&["toy", "--rank", "0", "-o", p(&out)]), 2);
    assert_eq!(code(&["solve", "--bogus"]), 2);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[toy]\nunknown = 1\n").unwrap();
    assert_eq!(code(&["--config", p(&bad), "toy", "-o", p(&out)]), 2);
}

#[test]
fn fully_observed_round_trip() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("m.csv");
    let values = [[1.5, -2.25, 1e-3], [0.1, 7.0, -0.3333333333333333]];
    let text: String = values
        .iter()
        .map(|r| r.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(&input, &text).unwrap();
    for cmd in ["solve", "least-squares"] {
        let out = dir.path().join(format!("{cmd}.csv"));
        run_ok(&[cmd, "--matrix", p(&input), "-o", p(&out)]);
        assert_eq!(data_rows(&out), text);
    }
}

#[test]
fn solve_matches_golden() {
    // [[1, 2], [2, t]]: ‖·‖_* = √((1 − t)² + 16) for t < 4, minimized at t = 1
    let dir = TempDir::new().unwrap();
    let (out, rep) = (dir.path().join("s.csv"), dir.path().join("r.json"));
    run_ok(&["solve", "--matrix", p(&fixture("partial.csv")), "-o", p(&out), "--report", p(&rep)]);
    let r = report(&rep);
    let want = golden("solve_partial.json");
    assert_eq!(r["converged"], want["converged"]);
    assert_eq!(r["observed"], want["observed"]);
    assert!(close(r["objective"].as_f64().unwrap(), want["objective"].as_f64().unwrap(), 1e-6));
    assert!(r["feasibility_residual"].as_f64().unwrap() <= 1e-12);
    let rows = data_rows(&out);
    let free: f64 = rows.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((free - want["free_entry"].as_f64().unwrap()).abs() < 1e-3, "{free}");
}

#[test]
fn observations_file_and_least_squares() {
    let dir = TempDir::new().unwrap();
    let (out, rep) = (dir.path().join("s.csv"), dir.path().join("r.json"));
    run_ok(&[
        "least-squares",
        "--observations",
        p(&fixture("partial_obs.csv")),
        "--n1",
        "2",
        "--n2",
        "2",
        "-o",
        p(&out),
        "--report",
        p(&rep),
    ]);
    // minimum norm leaves the free entry at zero
    let rows = data_rows(&out);
    let free: f64 = rows.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(free, 0.0);
    assert_eq!(report(&rep)["method"], "least-squares");
}

#[test]
fn conflicting_constraint_is_exit_3() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.csv");
    let (obs, cons) = (fixture("partial_obs.csv"), fixture("conflict.json"));
    let args = [
        "solve",
        "--observations",
        p(&obs),
        "--constraints",
        p(&cons),
        "-o",
        p(&out),
    ];
    assert_eq!(code(&args), 3);
}

#[test]
fn strict_non_convergence_is_exit_4() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.csv");
    let input = fixture("partial.csv");
    let base = ["solve", "--matrix", p(&input), "-o", p(&out), "--max-iterations", "2"];
    assert_eq!(code(&base), 0);
    let mut strict = base.to_vec();
    strict.push("--strict");
    assert_eq!(code(&strict), 4);
    assert!(out.exists());
}

#[test]
fn zero_matrix_is_exit_5() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("z.csv");
    fs::write(&m, "0,0\n0,0\n").unwrap();
    let out = dir.path().join("c.json");
    assert_eq!(code(&["coherence", "--matrix", p(&m), "-o", p(&out)]), 5);
    assert_eq!(code(&["scree", "--matrix", p(&m), "-o", p(&out)]), 5);
}

#[test]
fn overloaded_feeder_is_exit_6() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("v.csv");
    let args = ["powerflow", "--buses", "10", "--load-scale", "50", "-o", p(&out)];
    assert_eq!(code(&args), 6);
}

#[test]
fn coherence_reports_match_goldens() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("flat.csv", None, "coherence_flat.json"),
        ("flat.csv", Some("spanning_t.json"), "coherence_flat_spanning.json"),
        ("rank2.csv", None, "coherence_rank2.json"),
        ("diag.csv", None, "coherence_diag.json"),
    ];
    for (matrix, constraints, gold) in cases {
        let out = dir.path().join(gold);
        let mut args = vec!["coherence".to_string(), "--matrix".into(), p(&fixture(matrix)).into()];
        if let Some(c) = constraints {
            args.extend(["--constraints".into(), p(&fixture(c)).into()]);
        }
        args.extend(["-o".into(), p(&out).into()]);
        run_ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
        let got = report(&out);
        let want = golden(gold);
        for key in ["r", "dim_t", "constraint_dim"] {
            assert_eq!(got[key], want[key], "{gold}: {key}");
        }
        for key in ["singular_values", "mu_u", "mu_v", "mu0", "nu0", "scree"] {
            assert_close_json(&got[key], &want[key], &format!("{gold}: {key}"));
        }
        for key in ["mu_q_perp", "nu_q_perp"] {
            let (g, w) = (got[key].as_f64().unwrap(), want[key].as_f64().unwrap());
            assert!((g - w).abs() < 1e-9, "{gold}: {key} {g} vs {w}");
        }
    }
}

#[test]
fn flat_and_spanning_extremes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    run_ok(&[
        "coherence",
        "--matrix",
        p(&fixture("flat.csv")),
        "--constraints",
        p(&fixture("spanning_t.json")),
        "-o",
        p(&out),
    ]);
    let r = report(&out);
    assert!((r["mu0"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(r["mu_q_perp"].as_f64().unwrap() <= 1e-9);
    assert!(r["nu_q_perp"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn scree_of_case_matches_golden() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.csv");
    run_ok(&["scree", "--case", p(&fixture("case6.json")), "-o", p(&out)]);
    let want = golden("scree_case6.json");
    let rows = table(&out);
    for (key, col) in [
        ("singular_values", "singular_value"),
        ("normalized", "normalized"),
        ("cumulative", "cumulative"),
    ] {
        let w = want[key].as_array().unwrap();
        assert_eq!(rows.len(), w.len());
        for (row, w) in rows.iter().zip(w) {
            let g: f64 = row[col].parse().unwrap();
            let w = w.as_f64().unwrap();
            assert!((g - w).abs() <= 1e-9 * want["singular_values"][0].as_f64().unwrap(), "{key}: {g} vs {w}");
        }
    }
}

#[test]
fn flat_start_without_load() {
    let dir = TempDir::new().unwrap();
    let (out, rep) = (dir.path().join("v.csv"), dir.path().join("r.json"));
    run_ok(&["powerflow", "--buses", "8", "--load-factor", "0", "-o", p(&out), "--report", p(&rep)]);
    for row in table(&out) {
        assert_eq!(row["re"].parse::<f64>().unwrap(), 1.0);
        assert_eq!(row["im"].parse::<f64>().unwrap(), 0.0);
    }
    let r = report(&rep);
    assert_eq!(r["converged"], true);
    assert_eq!(r["n_lines"], 7);
}

#[test]
fn matpower_case() {
    let dir = TempDir::new().unwrap();
    let (out, state, rep) = (dir.path().join("v.csv"), dir.path().join("m.csv"), dir.path().join("r.json"));
    run_ok(&[
        "powerflow",
        "--case",
        p(&fixture("feeder4.m")),
        "-o",
        p(&out),
        "--state",
        p(&state),
        "--report",
        p(&rep),
    ]);
    let rows = table(&out);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["magnitude"].parse::<f64>().unwrap(), 1.02);
    // 4 buses and 3 in-service lines
    assert_eq!(data_rows(&state).lines().count(), 7);
    let r = report(&rep);
    for v in r["state_residuals"].as_array().unwrap() {
        assert!(v.as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn gen_network_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("c.json"));
    run_ok(&["gen-network", "--buses", "15", "--network-seed", "4", "-o", p(&a)]);
    run_ok(&["gen-network", "--buses", "15", "--network-seed", "4", "-o", p(&b)]);
    run_ok(&["gen-network", "--buses", "15", "--network-seed", "5", "-o", p(&c)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    // the written case loads back
    let out = dir.path().join("v.csv");
    run_ok(&["powerflow", "--case", p(&a), "-o", p(&out)]);
    assert_eq!(table(&out).len(), 15);
}

#[test]
fn seed_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n[toy]\nn1 = 6\nn2 = 4\nr = 1\ntrials = 2\nmixes = [1.0]\n").unwrap();
    let out = dir.path().join("t.csv");
    let seed_of = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gridfill"));
        cmd.env_remove("GRIDFILL_SEED");
        if let Some(e) = env {
            cmd.env("GRIDFILL_SEED", e);
        }
        cmd.args(["--config", p(&cfg), "toy", "-o", p(&out)]);
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert!(cmd.output().unwrap().status.success());
        let c = header_config(&out);
        assert_eq!(c["toy"]["n1"], 6);
        c["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(None, None), 3);
    assert_eq!(seed_of(Some("5"), None), 5);
    assert_eq!(seed_of(Some("5"), Some("7")), 7);
}

#[test]
fn toy_smoke_run() {
    let dir = TempDir::new().unwrap();
    let (a, b, per) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("p.csv"));
    let start = Instant::now();
    let args = ["toy", "--mixes", "0,0.5,1", "--trials", "10", "-o", p(&a), "--trials-output", p(&per)];
    run_ok(&args);
    assert!(start.elapsed() < Duration::from_secs(300));
    let text = data_rows(&a);
    assert_eq!(
        text.lines().next().unwrap(),
        "mix,mu_q_perp,nu_q_perp,constraint_dim,min_samples,solves"
    );
    let rows = table(&a);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["mix"], "NA");
    assert_eq!(rows[3]["min_samples"], "0");
    assert_eq!(table(&per).len(), 40);

    let again = ["toy", "--mixes", "0,0.5,1", "--trials", "10", "-o", p(&b)];
    run_ok(&again);
    assert_eq!(data_rows(&a), data_rows(&b));
}

#[test]
fn grid_smoke_run() {
    let dir = TempDir::new().unwrap();
    let path = |n: &str| dir.path().join(n);
    let (out, cdf, summary) = (path("g.csv"), path("cdf.csv"), path("s.csv"));
    let args = [
        "grid",
        "--buses",
        "20",
        "--fractions",
        "0.2,0.5",
        "--trials",
        "5",
        "--rho",
        "10",
        "-o",
        p(&out),
        "--cdf",
        p(&cdf),
        "--summary",
        p(&summary),
        "--jobs",
        "3",
    ];
    run_ok(&args);
    let rows = table(&out);
    assert_eq!(rows.len(), 2 * 5 * 4);
    assert_eq!(rows[0]["method"], "nuclear");
    assert!(!table(&cdf).is_empty());
    let s = table(&summary);
    assert_eq!(s.len(), 8);

    let again = path("g2.csv");
    let mut repeat = args[..11].to_vec();
    repeat[10] = p(&again);
    repeat.extend(["--jobs", "1"]);
    run_ok(&repeat);
    assert_eq!(data_rows(&out), data_rows(&again));
}

#[test]
fn grid_with_every_bus_a_pmu() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.csv");
    let pmus: Vec<String> = (1..=8).map(|b| b.to_string()).collect();
    run_ok(&[
        "grid",
        "--buses",
        "8",
        "--pmu",
        &pmus.join(","),
        "--fractions",
        "0.5",
        "--trials",
        "2",
        "-o",
        p(&out),
    ]);
    for row in table(&out) {
        assert_eq!(row["angle_rmse"], "NA");
        assert_eq!(row["mag_rmse"], "NA");
    }
}

#[test]
fn grid_full_sampling() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.csv");
    run_ok(&[
        "grid",
        "--buses",
        "10",
        "--fractions",
        "1",
        "--trials",
        "1",
        "--methods",
        "nuclear+const,nuclear+const+appx",
        "--rho",
        "10",
        "-o",
        p(&out),
    ]);
    for row in table(&out) {
        // every magnitude is measured; angles follow from the physics rows
        assert_eq!(row["mag_rmse"], "NA");
        let angle: f64 = row["angle_rmse"].parse().unwrap();
        assert!(angle < 0.1, "{angle}");
    }
}

#[test]
fn unknown_pmu_bus_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("g.csv");
    assert_eq!(code(&["grid", "--buses", "5", "--pmu", "9", "-o", p(&out)]), 2);
}
