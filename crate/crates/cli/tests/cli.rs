use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fracperim"));
    c.env_remove("FRACPERIM_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn diagnostic(o: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap()
}

/// Data rows of a CSV output, skipping `#` lines and the header.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn compute_two_cells_in_1d() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "e.txt", "fracgrid 1 4 0.25 0\n0110\n");
    let o = run(dir.path(), &["compute", "--s", "0.5", "--grid", "e.txt"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    // an interval of length l has P_s = 2 l^{1-s} / (s (1 - s))
    let expected = 2.0 / 0.25 * 0.5f64.sqrt();
    assert!((v["total"].as_f64().unwrap() - expected).abs() < 1e-12);
    let parts = v["local"].as_f64().unwrap() + v["nonlocal"].as_f64().unwrap();
    assert!((parts - expected).abs() < 1e-12);
    assert_eq!(v["config"]["compute"]["s"], 0.5);
}

#[test]
fn unknown_command_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let d = diagnostic(&o);
    assert_eq!(d["status"], "config_error");
    assert_eq!(d["field"], "command");
}

#[test]
fn bad_values_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "e.txt", "fracgrid 1 4 0.25 0\n0110\n");
    let o = run(dir.path(), &["compute", "--s", "1", "--grid", "e.txt"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(diagnostic(&o)["field"], "s");

    let o = run(
        dir.path(),
        &["compute", "--s", "0.5", "--grid", "missing.txt"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(diagnostic(&o)["field"], "grid");

    let o = bin()
        .current_dir(dir.path())
        .env("FRACPERIM_THREADS", "zero")
        .args(["compute", "--s", "0.5", "--grid", "e.txt"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(diagnostic(&o)["field"], "FRACPERIM_THREADS");
}

#[test]
fn minimize_matches_oracle_and_round_trips_grid() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "e0.txt",
        "fracgrid 2 5 4 0.25 0 0\n11000\n11000\n11000\n11000\n",
    );
    let omega = r#"{"shape":"box","lo":[0.25,0.25],"hi":[1.0,0.75]}"#;
    let o = run(
        dir.path(),
        &[
            "minimize",
            "--s",
            "0.5",
            "--grid",
            "e0.txt",
            "--exterior",
            r#"{"shape":"halfspace","axis":0,"level":0.0}"#,
            "--omega",
            omega,
            "--oracle",
            "--tol",
            "1e-12",
            "--minimizer-out",
            "min.txt",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (e, m) = (
        v["energy"].as_f64().unwrap(),
        v["oracle_energy"].as_f64().unwrap(),
    );
    assert!(e <= m + 1e-9 * (1.0 + m));
    assert!(e <= v["relaxed_energy"].as_f64().unwrap() + 1e-9);

    let text = std::fs::read_to_string(dir.path().join("min.txt")).unwrap();
    let (spec, mask) = fracperim::io::parse_grid(&text).unwrap();
    assert_eq!(fracperim::io::format_grid(&spec, &mask), text);
    assert_eq!(
        mask.iter().filter(|&&b| b).count(),
        v["minimizer_cells"].as_u64().unwrap() as usize
    );
}

#[test]
fn solver_budget_exhaustion_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "e0.txt",
        "fracgrid 1 12 0.125 0\n111000000000\n",
    );
    let o = run(
        dir.path(),
        &[
            "minimize",
            "--s",
            "0.5",
            "--grid",
            "e0.txt",
            "--omega",
            r#"{"shape":"box","lo":[0.25],"hi":[1.25]}"#,
            "--max-iter",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(diagnostic(&o)["status"], "numerical_failure");
}

#[test]
fn identity_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "u.txt",
        "fracfield 2 3 3 0.5 0 0\n0 0.25 1\n0.5 0.5 0\n1 0.75 0.25\n",
    );
    let o = run(
        dir.path(),
        &[
            "coarea-check",
            "--s",
            "0.3",
            "--field",
            "u.txt",
            "--exterior-value",
            "0.5",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["relative_residual"].as_f64().unwrap() <= 1e-10);

    write(
        dir.path(),
        "e.txt",
        "fracgrid 2 4 4 0.25 0 0\n0110\n1110\n0100\n0011\n",
    );
    let o = run(
        dir.path(),
        &[
            "decomposition-check",
            "--s",
            "0.7",
            "--grid",
            "e.txt",
            "--inner",
            r#"{"shape":"box","lo":[0.25,0.25],"hi":[0.75,0.75]}"#,
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn strip_scan_reports_exponent_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let n = 64;
    let mut grid = format!("fracgrid 2 {n} {n} {} 0 0\n", 1.0 / n as f64);
    for _ in 0..n {
        grid += &"1".repeat(n);
        grid.push('\n');
    }
    write(dir.path(), "sq.txt", &grid);
    let deltas = "0.25,0.125,0.0625,0.03125,0.015625";
    let o = run(
        dir.path(),
        &[
            "strip-scan",
            "--s",
            "0.5",
            "--grid",
            "sq.txt",
            "--deltas",
            deltas,
        ],
    );
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().ends_with(",exponent"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 5);
    let exponent: f64 = rows[0][3].parse().unwrap();
    for r in &rows {
        let value: f64 = r[1].parse().unwrap();
        let bound: f64 = r[2].parse().unwrap();
        assert!(value > 0.0 && value <= bound);
        assert_eq!(r[3].parse::<f64>().unwrap(), exponent);
    }
    let expected = if (exponent - 0.5).abs() <= 0.1 { 0 } else { 2 };
    assert_eq!(o.status.code(), Some(expected));
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "e.txt", "fracgrid 2 8 8 0.125 0 0\n00000000\n00111000\n01111100\n01111110\n00111100\n00011000\n00010000\n00000000\n");
    let args = [
        "approx",
        "--s",
        "0.5",
        "--grid",
        "e.txt",
        "--eps",
        "0.5,0.25,0.125",
    ];
    let outs: Vec<Output> = ["1", "4"]
        .iter()
        .map(|t| {
            bin()
                .current_dir(dir.path())
                .env("FRACPERIM_THREADS", t)
                .args(args)
                .output()
                .unwrap()
        })
        .collect();
    assert_eq!(outs[0].stdout, outs[1].stdout);
    assert_eq!(outs[0].status.code(), outs[1].status.code());
    let rows = csv_rows(&stdout(&outs[0]));
    assert_eq!(rows.len(), 3);
    assert!(stdout(&outs[0]).starts_with("# fracperim "));
}

#[test]
fn cylinder_commands() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "v.txt",
        "fracfield 1 4 0.25 -0.5\n0.5 -0.25 0.75 0\n",
    );
    let t = "1,1.5,2,3,4,6,8,12,16";
    let o = run(
        dir.path(),
        &[
            "cylinder-scan",
            "--s",
            "0.5",
            "--heights",
            "v.txt",
            "--farfield",
            "0.25",
            "--t",
            t,
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 9);
    assert!(stdout(&o).lines().last().unwrap().starts_with("# summary "));

    let o = run(
        dir.path(),
        &[
            "sector-scan",
            "--s",
            "0.5",
            "--heights",
            "v.txt",
            "--farfield",
            "0.25",
            "--sigma",
            "0.5",
            "--bound",
            "1",
            "--t",
            &t[2..],
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    write(dir.path(), "flat.txt", "fracfield 1 4 0.25 0\n0 0 0 0\n");
    let o = run(
        dir.path(),
        &[
            "davila-scan",
            "--heights",
            "flat.txt",
            "--s-list",
            "0.6,0.9",
            "--refinements",
            "1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    let ratio: f64 = rows[1][4].parse().unwrap();
    assert!((ratio - 1.0).abs() < 0.15);
}

#[test]
fn confinement_on_flat_graph() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "v.txt",
        &format!("fracfield 1 8 0.25 -1\n{}\n", ["0"; 8].join(" ")),
    );
    let o = run(
        dir.path(),
        &[
            "confinement",
            "--s",
            "0.5",
            "--heights",
            "v.txt",
            "--omega",
            r#"{"shape":"box","lo":[-0.5],"hi":[0.5]}"#,
            "--extra",
            "1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[5] == "true"));
}

#[test]
fn diverge_1d_grows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["diverge-1d", "--s", "0.5", "--m", "8,64"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    let v8: f64 = rows[0][1].parse().unwrap();
    let v64: f64 = rows[1][1].parse().unwrap();
    assert!(v64 > 2.0 * v8);
    let o = run(
        dir.path(),
        &["diverge-1d", "--s", "0.5", "--beta", "fibonacci"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(diagnostic(&o)["field"], "beta");
}
