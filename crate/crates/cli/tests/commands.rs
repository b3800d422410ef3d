use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn sqg(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqg"))
        .args(args)
        .env("SQG_OUTPUT_DIR", out_dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("schema_version = 1\noutput_dir = \"ignored\"\n{body}")).unwrap();
    path.to_string_lossy().into_owned()
}

fn last_line(text: &str) -> String {
    text.lines().filter(|l| !l.is_empty()).last().unwrap_or_default().to_string()
}

#[test]
fn default_run_then_diag_reproduces_last_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "");
    let start = Instant::now();
    let run = sqg(&["run", &cfg], &out);
    let elapsed = start.elapsed().as_secs_f64();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(elapsed < 60.0, "run took {elapsed} s");
    assert!(!tmp.path().join("ignored").exists(), "environment override ignored");

    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("# seed=20240917\n"));
    assert_eq!(csv.lines().count(), 2 + 11);
    for name in ["final.sqgb", "checkpoint_00000.sqgb", "checkpoint_00010.sqgb", "run_summary.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }

    let dump = tmp.path().join("field.csv");
    let diag = sqg(
        &["diag", out.join("final.sqgb").to_str().unwrap(), "--config", &cfg, "--dump", dump.to_str().unwrap()],
        &out,
    );
    assert_eq!(diag.status.code(), Some(0), "{}", String::from_utf8_lossy(&diag.stderr));
    assert_eq!(last_line(&String::from_utf8_lossy(&diag.stdout)), last_line(&csv));
    let field = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(field.lines().count(), 1 + 129 * 129);
}

#[test]
fn run_output_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[geometry]\nn = 32\n[initial]\nkind = \"random\"\ncount = 4\nmax_mode = 5\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(sqg(&["run", &cfg], &a).status.code(), Some(0));
    assert_eq!(sqg(&["run", &cfg], &b).status.code(), Some(0));
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "diagnostics.csv"), read(&b, "diagnostics.csv"));
    assert_eq!(read(&a, "final.sqgb"), read(&b, "final.sqgb"));
}

#[test]
fn overflowing_state_exits_with_nan_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "[geometry]\nn = 16\n[initial]\nkind = \"modes\"\nmodes = [[1, 1, 1e308], [2, 1, 1e308]]\n[solver]\ndrift = { kind = \"prescribed\", stream = [] }\n",
    );
    let run = sqg(&["run", &cfg], &out);
    assert_eq!(run.status.code(), Some(2), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(out.join("last_good.sqgb").exists());
    assert!(out.join("run_summary.json").exists());
}

#[test]
fn overshoot_exits_with_monitor_code_and_keeps_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // on an 8-point grid the peaks of w_33 fall between nodes; the drift carries them onto nodes
    let cfg = write_config(
        tmp.path(),
        "[geometry]\nn = 8\n[initial]\nkind = \"modes\"\nmodes = [[3, 3, 1.0]]\n[solver]\novershoot_tolerance = 0.0\nkappa = 0.001\nt_end = 2.0\ndrift = { kind = \"prescribed\", stream = [[1, 1, 3.0]] }\n",
    );
    let run = sqg(&["run", &cfg], &out);
    assert_eq!(run.status.code(), Some(3), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 21);
    assert!(out.join("final.sqgb").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["exit_code"], 3);
    assert!(summary["overshoot"]["overshoot"].as_f64().unwrap() > 0.1);
}

#[test]
fn non_convex_phi_fails_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "[geometry]\nn = 32\n[verify]\nfamily_size = 3\ncordoba_phi = { kind = \"negated\", inner = { kind = \"power\", coeff = 1.0, exponent = 2 } }\n",
    );
    let v = sqg(&["verify", &cfg, "cordoba"], &out);
    assert_ne!(v.status.code(), Some(0));
    let text = String::from_utf8_lossy(&v.stdout);
    assert!(text.contains("precondition"), "{text}");
}

#[test]
fn verify_writes_json_and_margins() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "[geometry]\nn = 32\n[verify]\nfamily_size = 3\n");
    let v = sqg(&["verify", &cfg, "lambda_one", "bridge"], &out);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("lambda_one_lower.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], serde_json::Value::Bool(true));
    assert!(json["fitted_constants"]["c0"].as_f64().unwrap() > 0.0);
    let margins = std::fs::read_to_string(out.join("weight_norm_bridge_m2_p1.5_margins.csv")).unwrap();
    assert!(margins.starts_with("# weight_norm_bridge_m2_p1.5 seed=20240917\ncase,"));
}

#[test]
fn bad_configs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "[geometry]\nn = 4\n");
    let r = sqg(&["run", &cfg], &out);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("N >= 8"));

    let cfg = write_config(tmp.path(), "[solver]\nstep = 0.1\n");
    let r = sqg(&["run", &cfg], &out);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("step"));

    let r = sqg(&["verify", &write_config(tmp.path(), ""), "no_such_check"], &out);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no_such_check"));

    let r = sqg(&["run", tmp.path().join("missing.toml").to_str().unwrap()], &out);
    assert_eq!(r.status.code(), Some(1));
}
