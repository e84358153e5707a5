use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_borelforge"));
    c.env_remove("BORELFORGE_THREADS");
    c
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("jobs").join(format!("{name}.json"))
}

fn run(cmd: &str, job: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(cmd).arg("--job").arg(job).arg("--out").arg(out).args(extra).output().unwrap()
}

fn write_job(dir: &Path, doc: &Value) -> PathBuf {
    let p = dir.join("job.json");
    fs::write(&p, doc.to_string()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn malformed_json_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("job.json");
    fs::write(&p, "{\"version\": 1, \"command\": ").unwrap();
    let o = run("realize-borel", &p, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn unknown_field_is_rejected_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = read_json(&example("realize_borel"));
    doc["tolerances"] = json!({ "residual": 1e-9, "slack": 2 });
    let o = run("realize-borel", &write_job(dir.path(), &doc), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("slack"), "{}", stderr(&o));

    let mut doc = read_json(&example("realize_borel"));
    doc["payload"]["jet"]["extra"] = json!(0);
    let o = run("realize-borel", &write_job(dir.path(), &doc), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("payload"), "{}", stderr(&o));
}

#[test]
fn command_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("multi-borel", &example("realize_borel"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn realize_borel_writes_outputs_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("realize-borel", &example("realize_borel"), dir.path(), &["--dump-grid", "--max-order", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("report.json"));
    assert_eq!(rep["status"], "ok");
    assert_eq!(rep["exit_code"], 0);
    let expr = read_json(&dir.path().join("expr.json"));
    let f: borelforge::SmoothExpr = serde_json::from_value(expr).unwrap();
    // value at the base point is 0!^2
    assert!((f.eval(&[0.0]).unwrap() - 1.0).abs() < 1e-12);
    assert!(fs::read_to_string(dir.path().join("report.txt")).unwrap().contains("PASS"));
    let grid = fs::read_dir(dir.path()).unwrap().filter_map(|e| e.ok()).find(|e| e.path().extension().is_some_and(|x| x == "csv"));
    let grid = grid.expect("grid file").path();
    let mut rd = csv::Reader::from_path(&grid).unwrap();
    assert_eq!(rd.records().count(), 1001);
}

#[test]
fn output_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run("multi-borel", &example("multi_borel"), d.path(), &["--threads", "3"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("expr.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn singular_constraints_exit_2_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = read_json(&example("solve_constraints"));
    let first = doc["payload"]["conditions"][0].clone();
    let mut clash = first.clone();
    clash["target"] = json!(6.0);
    doc["payload"]["conditions"] = json!([first, clash]);
    let o = run("solve-constraints", &write_job(dir.path(), &doc), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("report.json"));
    assert_eq!(rep["exit_code"], 2);
    assert!(rep.to_string().contains("singular"), "{rep}");
}

#[test]
fn false_claim_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = read_json(&example("verify"));
    doc["payload"]["checks"][1]["max"] = json!(9.0);
    let o = run("verify", &write_job(dir.path(), &doc), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("report.json"));
    assert_eq!(rep["status"], "verification-failed");
}

#[test]
fn thread_variable_overrides_and_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("BORELFORGE_THREADS", "lots")
        .args(["verify", "--job"])
        .arg(example("verify"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin()
        .env("BORELFORGE_THREADS", "2")
        .args(["verify", "--threads", "0", "--job"])
        .arg(example("verify"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn filtration_flags_change_the_verdict_window() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("check-filtration", &example("check_filtration"), dir.path(), &["--j-max", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("report.json"));
    assert_eq!(rep["result"]["verdict"]["verdict"], "FORM-FAIL", "{rep}");
    // away from the accumulation point the chain is eventually constant
    let o = run("check-filtration", &example("check_filtration"), dir.path(), &["--window", "1/2,1", "--j-max", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = read_json(&dir.path().join("report.json"));
    assert_eq!(rep["result"]["verdict"]["verdict"], "FORM-OK", "{rep}");
    let o = run("check-filtration", &example("check_filtration"), dir.path(), &["--window", "1,0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn corpus_needs_its_flag() {
    let o = bin().arg("corpus").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn readme_job_runs() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "version": 1,
        "command": "realize-borel",
        "region": { "box": [["-1", "1"]] },
        "payload": { "jet": { "base": ["0"], "order": 3, "coeffs": [1.0, 0.0, 2.0, 0.0] } },
        "tolerances": { "residual": 1e-9, "max_order": 8, "h0": 0.001 },
        "outputs": { "expr": "expr.json", "report": "report.json", "text": "report.txt", "grid": "grid.csv" }
    });
    let o = run("realize-borel", &write_job(dir.path(), &doc), dir.path(), &["--dump-grid"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("grid.csv").exists());
    let f: borelforge::SmoothExpr = serde_json::from_value(read_json(&dir.path().join("expr.json"))).unwrap();
    let d = f.eval_derivs(&[0.0], 3).unwrap();
    for (g, w) in d.iter().zip([1.0, 0.0, 2.0, 0.0]) {
        assert!((g - w).abs() <= 1e-9, "{d:?}");
    }
}
