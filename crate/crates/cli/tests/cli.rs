use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn midecode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_midecode")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = midecode(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn small_session(dir: &Path, control: bool) -> String {
    let cfg = dir.join("synth.json");
    fs::write(&cfg, r#"{"n_runs": 6, "n_trials": 4, "calibration_s": 20.0}"#).unwrap();
    let sess = dir.join("session");
    let mut args = vec!["synth", "--config", cfg.to_str().unwrap(), "--out", sess.to_str().unwrap(), "--no-timestamp"];
    if control {
        args.push("--control");
    }
    ok(&args);
    sess.to_str().unwrap().to_string()
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("no stderr output");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not a JSON line ({e}): {line}"))
}

#[test]
fn no_arguments_prints_usage_and_fails() {
    let out = midecode(&[]);
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn missing_session_reports_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent");
    let out = midecode(&["eval-offline", "--session", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["message"].as_str().unwrap().contains("absent"));
}

#[test]
fn bad_flag_value_is_a_usage_error() {
    let out = midecode(&["features", "--task", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"]["kind"], "usage");
    let out = midecode(&["features"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"]["kind"], "usage");
}

#[test]
fn offline_evaluation_writes_a_fold_table() {
    let dir = tempfile::tempdir().unwrap();
    let sess = small_session(dir.path(), false);
    let out = dir.path().join("results");
    ok(&["eval-offline", "--session", &sess, "--task", "onset", "--out", out.to_str().unwrap(), "--no-timestamp"]);
    let table = fs::read_to_string(out.join("table_onset_dlda.csv")).unwrap();
    assert!(table.contains("# tool=midecode"));
    assert!(table.contains(&format!("# version={}", env!("CARGO_PKG_VERSION"))));
    assert!(table.contains("# config_hash="));
    assert!(!table.contains("timestamp"));
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 10);
    for (i, row) in rows[..6].iter().enumerate() {
        assert!(row.starts_with(&format!("{},", i + 1)), "{row}");
    }
    let names: Vec<&str> = rows[6..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(names, ["AVG", "STD", "MIN", "MAX"]);

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("eval_offline_onset_dlda.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["folds"].as_array().unwrap().len(), 6);
    assert_eq!(report["provenance"]["tool"], "midecode");

    ok(&["report", "--out", out.to_str().unwrap(), "--no-timestamp"]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("eval_offline_onset_dlda.json,onset,dlda_offline,6,"), "{summary}");
}

#[test]
fn reruns_without_timestamp_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sess = small_session(dir.path(), false);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let out = out.to_str().unwrap();
        ok(&["preprocess", "--session", &sess, "--out", out, "--no-timestamp"]);
        ok(&["spectrogram", "--session", out, "--channel", "C3", "--erd", "--out", out, "--no-timestamp"]);
        ok(&["eval-offline", "--session", out, "--task", "offset", "--out", out, "--no-timestamp"]);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "spectrogram_C3_erd.csv"));
    assert!(names.iter().any(|n| n == "eval_offline_offset_dlda.json"));
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?} differs");
    }
    let spec = fs::read_to_string(a.join("spectrogram_C3_erd.csv")).unwrap();
    assert!(spec.lines().any(|l| l == "channel,freq_hz,time_s,value"));
}

#[test]
fn seed_changes_the_synthetic_session() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one");
    let two = dir.path().join("two");
    ok(&["synth", "--seed", "1", "--out", one.to_str().unwrap(), "--no-timestamp"]);
    ok(&["synth", "--seed", "2", "--out", two.to_str().unwrap(), "--no-timestamp"]);
    assert_ne!(fs::read(one.join("run_1.f64")).unwrap(), fs::read(two.join("run_1.f64")).unwrap());
    let header = fs::read_to_string(one.join("session.json")).unwrap();
    assert!(header.contains("config_hash"));
}

#[test]
fn pseudo_online_and_contrast_need_the_right_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let sess = small_session(dir.path(), true);
    let pre = dir.path().join("pre");
    let pre = pre.to_str().unwrap();
    ok(&["preprocess", "--session", &sess, "--out", pre, "--no-timestamp"]);

    let out = midecode(&["eval-pseudo-online", "--session", pre, "--out", pre]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"]["kind"], "usage");

    let res = dir.path().join("res");
    ok(&["eval-pseudo-online", "--session", &sess, "--task", "offset", "--out", res.to_str().unwrap(), "--no-timestamp"]);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(res.join("eval_pseudo_online_offset_mdm.json")).unwrap()).unwrap();
    assert!(doc["class0_fraction"]["dMI"].as_f64().unwrap() > 0.5);
    assert!(res.join("trace_offset.csv").exists());

    ok(&["contrast", "--session", pre, "--out", res.to_str().unwrap(), "--no-timestamp"]);
    let contrast: serde_json::Value = serde_json::from_str(&fs::read_to_string(res.join("contrast.json")).unwrap()).unwrap();
    assert_eq!(contrast["channel"], "C3");
    assert_eq!(contrast["bmi"]["result"]["n_test"].as_u64().unwrap() + contrast["bmi"]["result"]["n_control"].as_u64().unwrap(), 24);
}
