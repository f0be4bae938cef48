use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ife_core::montecarlo::synthetic_lfp;

fn ife(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ife"))
        .args(args)
        .env_remove("IFE_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// A static probit panel (four regressors) and its schema.
fn probit_files(dir: &Path, t: usize) -> (String, String) {
    let panel = synthetic_lfp(150, t, false, 5).unwrap();
    let data = dir.join("probit.csv");
    panel.save_csv(&data).unwrap();
    let schema = write(dir, "probit.json", r#"{"family": "probit"}"#);
    (data.to_str().unwrap().to_string(), schema)
}

fn dynamic_files(dir: &Path) -> (String, String) {
    let panel = synthetic_lfp(120, 6, true, 5).unwrap();
    let data = dir.join("dynamic.csv");
    panel.save_csv(&data).unwrap();
    let schema = write(dir, "dynamic.json", r#"{"family": "probit", "lag_column": "lfp_lagged"}"#);
    (data.to_str().unwrap().to_string(), schema)
}

fn table_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn fit_writes_one_row_per_regressor() {
    let dir = tempfile::tempdir().unwrap();
    let (data, schema) = probit_files(dir.path(), 6);
    let out = ife(&["fit", "--data", &data, "--schema", &schema]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let rows = table_rows(&text);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "kids0_2");
    assert!(text.contains("# seed: 1"));
    assert!(text.contains("# version: ife "));
    assert!(text.contains("# dropped: "));
    assert!(text.contains("# fe_converged: true"));
}

#[test]
fn unbalanced_panel_is_rejected_with_its_id() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "u.csv", "id,t,y,x\n1,1,0,0.5\n1,2,1,0.1\n7,1,1,0.3\n");
    let out = ife(&["fit", "--data", &data, "--family", "probit"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains('7'), "{}", stderr(&out));
}

#[test]
fn neyman_scott_hand_case() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "ns.csv", "id,t,y\n1,1,1\n1,2,3\n");
    let out = ife(&["fit", "--data", &data, "--family", "neyman-scott"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = table_rows(&stdout(&out));
    assert_eq!(rows, vec![vec!["variance".to_string(), "1".into(), "1".into()]]);
}

#[test]
fn missing_inputs_are_input_errors() {
    assert_eq!(ife(&["fit"]).status.code(), Some(2));
    assert_eq!(ife(&["fit", "--data", "/nonexistent.csv", "--family", "probit"]).status.code(), Some(2));
    assert_eq!(ife(&["correct", "--data", "x.csv", "--family", "probit"]).status.code(), Some(2));
    assert_eq!(ife(&["fit", "--family", "logit"]).status.code(), Some(2));
}

#[test]
fn correct_ife_reports_both_rows_and_solver_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let (data, schema) = probit_files(dir.path(), 6);
    let out = ife(&["correct", "--method", "ife", "--H", "1", "--seed", "9", "--data", &data, "--schema", &schema]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    for key in ["# H: 1", "# seed: 9", "# residual: ", "# converged: ", "# status: "] {
        assert!(text.contains(key), "missing {key}");
    }
    let rows = table_rows(&text);
    assert_eq!(rows.len(), 8);
    assert!(rows[..4].iter().all(|r| r[0] == "fe"));
    assert!(rows[4..].iter().all(|r| r[0] == "ife-1"));
    for k in 0..4 {
        let fe: f64 = rows[k][3].parse().unwrap();
        let ife: f64 = rows[k + 4][3].parse().unwrap();
        assert!((ife / fe - 2f64.sqrt()).abs() < 1e-4);
    }
}

#[test]
fn correct_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let (data, schema) = probit_files(dir.path(), 6);
    let out_dir = dir.path().join("out");
    let out = ife(&[
        "correct", "--method", "hbc", "--data", &data, "--schema", &schema, "--format", "json", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("correct.json")).unwrap()).unwrap();
    assert_eq!(v["method"], "hbc");
    assert_eq!(v["seed"], 1);
    assert_eq!(v["config"]["method"], "hbc");
    assert_eq!(v["result"].as_array().unwrap().len(), 8);
    assert_eq!(v["subfits"].as_array().unwrap().len(), 2);
    // The presentation table goes to stdout when files are written.
    assert!(stdout(&out).contains("(0."));
}

#[test]
fn jackknife_preconditions_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (data, schema) = dynamic_files(dir.path());
    let out = ife(&["correct", "--method", "bc_hn", "--data", &data, "--schema", &schema]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not applicable due to dynamics"), "{}", stderr(&out));

    let (data, schema) = probit_files(dir.path(), 3);
    let out = ife(&["correct", "--method", "hbc", "--data", &data, "--schema", &schema]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("T >= 4"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (data, schema) = dynamic_files(dir.path());
    let mut files = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "3")] {
        let out_dir: PathBuf = dir.path().join(name);
        let out = ife(&[
            "correct", "--method", "ife", "--H", "3", "--seed", "4", "--data", &data, "--schema", &schema,
            "--threads", threads, "--out", out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        files.push(std::fs::read(out_dir.join("correct.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn mc_has_one_row_per_method_and_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("mc");
    let out = ife(&[
        "mc", "--design", "varying_T", "--n", "60", "--T", "4", "--R", "4", "--H", "2", "--methods", "fe,ife",
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(out_dir.join("mc.csv")).unwrap();
    let rows = table_rows(&text);
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0].as_str(), rows[1][0].as_str()), ("fe", "ife"));
    assert!(stdout(&out).contains("coverage"));
}

#[test]
fn mc_single_replication_and_truth_echo() {
    let out = ife(&["mc", "--design", "varying_T", "--R", "1", "--methods", "truth,fe", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows[0]["method"], "truth");
    assert_eq!(rows[0]["bias"], 0.0);
    assert_eq!(rows[0]["coverage"], 1.0);
    assert_eq!(rows[1]["R_effective"], 1);
}

#[test]
fn mc_on_calibrated_synthetic_data() {
    let out = ife(&["mc", "--design", "calibrated_dynamic", "--data", "synthetic", "--n", "80", "--T", "5", "--R", "2", "--methods", "fe"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = table_rows(&stdout(&out));
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][1], "lfp_lagged");
    let out = ife(&["mc", "--design", "calibrated_dynamic", "--data", "synthetic", "--R", "2", "--methods", "bc_hn"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mc_flags_unreliable_results() {
    let out = ife(&["mc", "--design", "varying_T", "--n", "2", "--T", "2", "--R", "30", "--methods", "fe"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("# unreliable: true"));
}

#[test]
fn ns_demo_writes_summary_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ns");
    let out = ife(&["ns-demo", "--n", "500", "--R", "100", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = table_rows(&std::fs::read_to_string(out_dir.join("ns_summary.csv")).unwrap());
    let fe: f64 = rows[0][1].parse().unwrap();
    let ife_mean: f64 = rows[1][1].parse().unwrap();
    assert!((fe - 1.6).abs() < 0.02, "{fe}");
    assert!((ife_mean - 2.0).abs() < 0.05, "{ife_mean}");
    let hist = std::fs::read_to_string(out_dir.join("ns_histogram.csv")).unwrap();
    let bins = table_rows(&hist);
    assert_eq!(bins.len(), 120);
    assert!(hist.contains("estimator,bin_left,bin_right,density"));
}

#[test]
fn config_file_with_flag_overrides_and_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("env");
    let config = write(
        dir.path(),
        "run.json",
        r#"{"n": 300, "T": 5, "R": 20, "seed": 3, "out": "/nonexistent/should/not/be/used"}"#,
    );
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_ife"))
            .args(["ns-demo", "--config", &config, "--seed", seed])
            .env("IFE_OUTPUT_DIR", &env_dir)
            .output()
            .unwrap()
    };
    let out = run("8");
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(env_dir.join("ns_summary.csv")).unwrap();
    assert!(text.contains("# seed: 8"));
    assert!(text.contains(r#""R":20"#));
    assert!(!text.contains("nonexistent"));

    let bad = write(dir.path(), "bad.json", r#"{"replications": 5}"#);
    assert_eq!(ife(&["ns-demo", "--config", &bad]).status.code(), Some(2));
}
