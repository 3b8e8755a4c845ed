use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn korovkin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_korovkin"))
        .args(args)
        .env("KOROVKIN_THREADS", "1")
        .output()
        .expect("spawn korovkin")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn moments_reports_sign_class() {
    for (op, tag) in [
        ("bernstein:5", "preserves_e1"),
        ("king:4", "leq_e1"),
        ("stancu:4:1:2", "mixed"),
    ] {
        let o = korovkin(&["moments", "--operator", op, "--format", "json"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["schema"], "v1");
        assert_eq!(v["sign_class"]["tag"], tag);
        if tag == "mixed" {
            let w = v["sign_class"]["witness"].as_f64().unwrap();
            assert!((w - 0.5).abs() < 1e-3, "{w}");
        }
    }
}

#[test]
fn malformed_operator_exits_two() {
    let o = korovkin(&["moments", "--operator", "bernstein:x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("position"), "{}", stderr(&o));
    let o = korovkin(&["moments", "--operator", "laguerre:3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_bernstein_square_passes() {
    let o = korovkin(&[
        "verify",
        "--operator",
        "bernstein:5",
        "--function",
        "e2",
        "--m",
        "1:20",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn verify_bernstein_one_has_zero_margins() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b1.csv");
    for f in ["e2", "sine_pi", "abs_shift:0.5"] {
        let o = korovkin(&[
            "verify",
            "--operator",
            "bernstein:1",
            "--function",
            f,
            "--m",
            "1,2,5",
            "--format",
            "csv",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let mut rdr = csv::Reader::from_path(&path).unwrap();
        for rec in rdr.records() {
            let margin: f64 = rec.unwrap()[4].parse().unwrap();
            assert!(margin.abs() < 1e-12);
        }
    }
}

#[test]
fn verify_csv_schema_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.csv");
    let o = korovkin(&[
        "verify",
        "--operator",
        "king:4",
        "--function",
        "abs_shift:0.5",
        "--m",
        "4,1,2",
        "--grid",
        "64",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,m,actual,bound,margin,theorem_id"));
    let rows: Vec<(f64, u64)> = lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            assert_eq!(cells.len(), 6);
            assert_eq!(cells[5], "limit-v-leq");
            let mantissa = cells[2].split('e').next().unwrap();
            assert_eq!(mantissa.replace(['.', '-'], "").len(), 17, "{}", cells[2]);
            (cells[0].parse().unwrap(), cells[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 65 * 3);
    assert!(rows.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn verify_json_mirrors_report() {
    let o = korovkin(&[
        "verify",
        "--operator",
        "bernstein:5",
        "--function",
        "e2",
        "--m",
        "3",
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], "v1");
    let r = &v["reports"][0];
    assert_eq!(r["theorem_id"], "geometric-p");
    assert_eq!(r["m"], 3);
    for key in ["xs", "actual", "bound", "margin", "violations", "slack"] {
        assert!(!r[key].is_null(), "missing {key}");
    }
    let xs = r["xs"].as_array().unwrap();
    let i = xs
        .iter()
        .position(|x| (x.as_f64().unwrap() - 0.5).abs() < 1e-12)
        .unwrap();
    assert!((r["margin"][i].as_f64().unwrap() - 0.064).abs() < 1e-9);
}

#[test]
fn non_stochastic_matrix_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "0,0.5,1\n0.5,0.5,0\n0.2,0.2,0.5\n0,0.5,0.5\n").unwrap();
    let spec = format!("matrix:{}", path.display());
    let o = korovkin(&["verify", "--operator", &spec, "--function", "e2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row-sum invariant"), "{}", stderr(&o));
}

#[test]
fn stochastic_matrix_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    fs::write(&path, "0,0.5,1\n1,0,0\n0.5,0,0.5\n0,0,1\n").unwrap();
    let spec = format!("matrix:{}", path.display());
    let o = korovkin(&["limit", "--operator", &spec, "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["kind"], "P");
}

#[test]
fn config_errors_exit_two() {
    let bad = [
        vec![
            "verify",
            "--operator",
            "bernstein:5",
            "--function",
            "e2",
            "--grid",
            "1000",
        ],
        vec![
            "verify",
            "--operator",
            "bernstein:5",
            "--function",
            "e2",
            "--m",
            "5:1",
        ],
        vec!["verify", "--operator", "bernstein:5", "--function", "nope"],
        vec![
            "verify",
            "--operator",
            "bernstein:5",
            "--function",
            "e2",
            "--slack",
            "-1",
        ],
        vec!["verify", "--operator", "stancu:4:1:2", "--function", "e2"],
    ];
    for args in bad {
        let o = korovkin(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn limit_kinds() {
    for (op, kind) in [
        ("bernstein:5", "P"),
        ("king:4", "V"),
        ("stancu:4:0:1", "eval0"),
    ] {
        let o = korovkin(&["limit", "--operator", op, "--format", "json"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["kind"], kind);
        assert!(v["closed_form_distance"].as_f64().unwrap() <= 1e-8);
    }
}

#[test]
fn limit_non_convergence_exits_three() {
    let o = korovkin(&["limit", "--operator", "bernstein:200", "--m-max", "8"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = korovkin(&[
        "verify",
        "--operator",
        "king:10",
        "--function",
        "e2",
        "--m-max",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn zhuk_defaults_pass() {
    let o = korovkin(&["zhuk", "--function", "abs_shift:0.5", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn suite_writes_one_csv_per_family() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("suite");
    let o = korovkin(&["suite", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    for fam in [
        "soundness",
        "limits",
        "envelope",
        "cauchy",
        "zhuk",
        "dini",
        "smoothness",
    ] {
        let text = fs::read_to_string(out.join(format!("{fam}.csv"))).unwrap();
        assert!(text.lines().count() > 1, "{fam}");
        assert!(!text.contains(",false"), "{fam}");
    }
}

#[test]
fn suite_at_zeroth_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let o = korovkin(&["suite", "--m", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
