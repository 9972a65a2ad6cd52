use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn appa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_appa"))
        .args(args)
        .output()
        .expect("spawn appa")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn pennies() -> Value {
    json!({
        "n": 2, "m": 2,
        "coupling": {"kind": "bilinear", "A": [[1, -1], [-1, 1]]},
        "f1": {"kind": "simplex"}, "f2": {"kind": "simplex"}
    })
}

fn unit_bilinear() -> Value {
    json!({
        "n": 1, "m": 1,
        "coupling": {"kind": "bilinear", "A": [[1]]},
        "f1": {"kind": "zero"}, "f2": {"kind": "zero"}
    })
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(out: &str, key: &str) -> f64 {
    let line = out
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {out}"));
    line.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn run_pennies_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "problem": pennies(),
        "schedule": {"kind": "constant", "tau": 0.2, "sigma": 0.2},
        "init": {"x": [1, 0], "y": [0, 1]},
        "stop": {"max_iters": 10000},
        "reference": "oracle",
        "outputs": {"trace_csv": "trace.csv", "summary_json": "summary.json", "certify_json": "cert.json"},
        "seed": 1
    });
    let path = write_config(dir.path(), "run.json", &cfg);
    let o = appa(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["stop_reason"], "max_iters");
    assert_eq!(summary["iters"], 10000);
    assert_eq!(summary["certified"], true);
    assert_eq!(summary["gap_within_bound"], true);
    let gap = summary["final_gap"].as_f64().unwrap();
    assert!(gap <= summary["gap_bound"].as_f64().unwrap());

    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,tau,sigma,lambda,theta,t,inc_x,inc_y,dist_to_ref,gap_ergodic,a_k,c_k"
    );
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 1000 && rows.len() < 10000, "{} rows", rows.len());
    assert!(rows.last().unwrap().starts_with("9999,"));
    let first: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(first.len(), 12);
    assert_eq!(first[1], "2.0000000000000001e-1");

    let cert: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cert.json")).unwrap()).unwrap();
    assert_eq!(cert["pass"], true);
}

#[test]
fn gap_tol_without_reference_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "problem": pennies(),
        "schedule": {"kind": "constant"},
        "stop": {"max_iters": 10, "gap_tol": 1e-6}
    });
    let path = write_config(dir.path(), "c.json", &cfg);
    let o = appa(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr(&o).trim().lines().count(), 1);
}

#[test]
fn malformed_and_missing_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&appa(&["run", "--config", bad.to_str().unwrap()])), 2);
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&appa(&["run", "--config", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&appa(&["run"])), 2);

    // problem file that does not exist
    let cfg = json!({
        "problem": "absent.json",
        "schedule": {"kind": "constant"},
        "stop": {"max_iters": 10}
    });
    let path = write_config(dir.path(), "c.json", &cfg);
    let o = appa(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr(&o).trim().lines().count(), 1);
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "problem": unit_bilinear(),
        "schedule": {"kind": "constant", "tau": 50.0, "sigma": 50.0},
        "init": {"x": [1], "y": [1]},
        "stop": {"max_iters": 5000},
        "outputs": {"summary_json": "s.json"}
    });
    let path = write_config(dir.path(), "d.json", &cfg);
    let o = appa(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(summary["stop_reason"], "diverged");
    assert_eq!(summary["certified"], false);
}

#[test]
fn validate_feasible_and_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = json!({
        "problem": unit_bilinear(),
        "schedule": {"kind": "constant", "tau": 0.25, "sigma": 0.25},
        "stop": {"max_iters": 1}
    });
    let path = write_config(dir.path(), "v.json", &cfg);
    let o = appa(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    // ‖A‖ carries a 1e-8 relative safety inflation
    assert!((field(&out, "eta_x") - 0.5).abs() < 1e-7, "{out}");
    assert!((field(&out, "eta_y") - 0.5).abs() < 1e-7, "{out}");
    assert!(out.contains("feasible: yes"));
    assert!((field(&out, "suggested_tau_sigma") - 0.45).abs() < 1e-7, "{out}");

    cfg["schedule"] = json!({"kind": "constant", "tau": 1.0, "sigma": 1.0});
    let path = write_config(dir.path(), "v.json", &cfg);
    let o = appa(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("feasible: no"));

    cfg["schedule"] = json!({"kind": "geometric"});
    let path = write_config(dir.path(), "v.json", &cfg);
    let o = appa(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("strong convexity"));
}

#[test]
fn oracle_reference_on_2x2_game() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "problem": {
            "n": 2, "m": 2,
            "coupling": {"kind": "bilinear", "A": [[2, -1], [-1, 1]]},
            "f1": {"kind": "simplex"}, "f2": {"kind": "simplex"}
        },
        "schedule": {"kind": "constant"},
        "init": "uniform-simplex",
        "stop": {"max_iters": 3000},
        "reference": "oracle"
    });
    let path = write_config(dir.path(), "g.json", &cfg);
    let out = dir.path().join("out");
    let o = appa(&["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    // equilibrium of min_x max_y xᵀAy: x = (0.4, 0.6), y = (0.4, 0.6)
    let erg = &summary["ergodic_point"];
    for (v, want) in erg["x"].as_array().unwrap().iter().zip([0.4, 0.6]) {
        assert!((v.as_f64().unwrap() - want).abs() < 0.05, "{erg}");
    }
    assert_eq!(summary["gap_within_bound"], true);
}

#[test]
fn certify_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        json!({
            "problem": pennies(),
            "schedule": {"kind": "constant", "tau": 0.2, "sigma": 0.2},
            "init": {"x": [0.9, 0.1], "y": [0.3, 0.7]},
            "stop": {"max_iters": 500}
        }),
        json!({
            "problem": {
                "n": 2, "m": 2,
                "coupling": {"kind": "bilinear", "A": [[0.5, 0.2], [-0.3, 0.4]], "b": [0.1, -0.2], "c": [0.3, 0.0]},
                "f1": {"kind": "sqnorm", "mu": 1.0}, "f2": {"kind": "sqnorm", "mu": 1.0}
            },
            "schedule": {"kind": "geometric"},
            "init": "zeros",
            "stop": {"max_iters": 100}
        }),
        json!({
            "problem": {
                "n": 2, "m": 1,
                "coupling": {"kind": "quadratic-regularized-bilinear", "A": [[1.0], [0.5]], "rho1": 0.5, "rho2": 0.3},
                "f1": {"kind": "zero"}, "f2": {"kind": "zero"}
            },
            "schedule": {"kind": "constant"},
            "init": {"random": {"radius": 2.0}},
            "stop": {"max_iters": 300},
            "seed": 9
        }),
    ];
    for (i, cfg) in cases.iter().enumerate() {
        let path = write_config(dir.path(), &format!("c{i}.json"), cfg);
        let out = dir.path().join(format!("out{i}"));
        let o = appa(&["certify", "--quiet", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "case {i}: {}", stderr(&o));
        let rep: Value = serde_json::from_str(&std::fs::read_to_string(out.join("certify.json")).unwrap()).unwrap();
        assert_eq!(rep["pass"], true, "case {i}");
        assert_eq!(rep["certified"], true, "case {i}");
    }
}

#[test]
fn certify_without_oracle_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "problem": {
            "n": 1, "m": 1,
            "coupling": {"kind": "bilinear", "A": [[1]]},
            "f1": {"kind": "l1", "w": 1.0}, "f2": {"kind": "zero"}
        },
        "schedule": {"kind": "constant"},
        "stop": {"max_iters": 10}
    });
    let path = write_config(dir.path(), "c.json", &cfg);
    assert_eq!(code(&appa(&["certify", "--quiet", "--config", path.to_str().unwrap()])), 2);
}

#[test]
fn config_round_trip_gives_identical_trace() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "0.3,-0.2,0.1\n0.4,0.5,-0.6\n").unwrap();
    let problem = json!({
        "n": 2, "m": 3,
        "coupling": {"kind": "quadratic", "A_csv": "a.csv", "b": [0.1, 0.2], "rho1": 0.2},
        "f1": {"kind": "box", "lo": [-1, -1], "hi": [1, 1]},
        "f2": {"kind": "simplex"}
    });
    std::fs::write(dir.path().join("problem.json"), problem.to_string()).unwrap();
    let cfg = json!({
        "problem": "problem.json",
        "schedule": {"kind": "constant", "safety": 0.8},
        "init": {"random": {}},
        "stop": {"max_iters": 700, "increment_tol": 1e-14},
        "seed": 42
    });
    let first = write_config(dir.path(), "first.json", &cfg);
    // reserialize with different formatting and key order
    let reparsed: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let second = dir.path().join("second.json");
    std::fs::write(&second, reparsed.to_string()).unwrap();

    let mut traces = Vec::new();
    for (p, o) in [(&first, "o1"), (&second, "o2")] {
        let out = dir.path().join(o);
        let r = appa(&["run", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        traces.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);

    // a different seed moves the random start
    let out = dir.path().join("o3");
    let r = appa(&["run", "--seed", "7", "--config", first.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0);
    assert_ne!(std::fs::read(out.join("trace.csv")).unwrap(), traces[0]);
}

#[test]
fn iters_flag_overrides_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "problem": unit_bilinear(),
        "schedule": {"kind": "constant"},
        "init": {"x": [1], "y": [1]},
        "stop": {"max_iters": 1000}
    });
    let path = write_config(dir.path(), "c.json", &cfg);
    let o = appa(&["run", "--iters", "7", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["iters"], 7);
}

#[test]
fn bench_completes_with_ratios_at_most_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = appa(&["bench", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let table = stdout(&o);
    assert!(table.starts_with("problem"));
    assert_eq!(table.lines().count(), 8);
    let rows: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("bench.json")).unwrap()).unwrap();
    for r in rows.as_array().unwrap() {
        assert!(r["ratio"].as_f64().unwrap() <= 1.0, "{r}");
        if let (Some(rate), Some(theta)) = (r["rate"].as_f64(), r["theta"].as_f64()) {
            assert!(rate.ln() <= theta.ln() + 0.05, "{r}");
        }
    }
}
