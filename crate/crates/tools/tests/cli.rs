use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use skill_tools::eval::{read_predictions, write_predictions};

fn skill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skill"))
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = skill(args);
    assert!(out.status.success(), "skill {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rule<'a>(est: &'a Value, kind: &str) -> &'a Value {
    est["rules"].as_array().unwrap().iter().find(|r| r["kind"] == kind).unwrap()
}

#[test]
fn inject_then_estimate_recovers_straight_speed_up() {
    let d = tempfile::tempdir().unwrap();
    let rules = d.path().join("rules.json");
    fs::write(&rules, r#"[{"kind":"velocity_scale","target_class":"straight","param":2.0}]"#).unwrap();
    let path = d.path().join("path.csv");
    let traj = d.path().join("traj.csv");
    ok(&["inject", "--geometry", "l_shape", "--write-path", s(&path), "--rules", s(&rules), "--out", s(&traj)]);
    let est: Value = serde_json::from_str(&ok(&["estimate", "--trajectory", s(&traj), "--path", s(&path)])).unwrap();
    let v = rule(&est, "velocity_scale");
    assert_eq!(v["target_class"], "straight");
    assert!((v["param"].as_f64().unwrap() - 2.0).abs() <= 0.1, "{v}");
    assert_eq!(rule(&est, "orientation_offset")["target_class"], "none");
}

#[test]
fn window_corner_tilt_round_trips_through_profile_and_simulate() {
    let d = tempfile::tempdir().unwrap();
    let rules = d.path().join("rules.json");
    fs::write(&rules, r#"[{"kind":"orientation_offset","target_class":"corner","param":0.3}]"#).unwrap();
    let (profile, a, b) = (d.path().join("p.csv"), d.path().join("a.csv"), d.path().join("b.csv"));
    ok(&["inject", "--geometry", "window", "--pose-seed", "5", "--rules", s(&rules), "--out", s(&a), "--profile-out", s(&profile)]);
    ok(&["simulate", "--profile", s(&profile), "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let est: Value =
        serde_json::from_str(&ok(&["estimate", "--trajectory", s(&a), "--geometry", "window", "--pose-seed", "5"])).unwrap();
    let o = rule(&est, "orientation_offset");
    assert_eq!(o["target_class"], "corner");
    assert!((o["param"].as_f64().unwrap() - 0.3).abs() <= 0.03, "{o}");
}

#[test]
fn segment_writes_one_label_per_waypoint() {
    let d = tempfile::tempdir().unwrap();
    let (path, labels) = (d.path().join("path.csv"), d.path().join("labels.csv"));
    ok(&["segment", "--geometry", "l_shape", "--write-path", s(&path), "--out", s(&labels)]);
    let text = fs::read_to_string(&labels).unwrap();
    assert!(text.starts_with("index,part_id,class\n"));
    let waypoints = fs::read_to_string(&path).unwrap().lines().count();
    assert_eq!(text.lines().count(), waypoints);
    assert!(text.contains(",corner\n") && text.contains(",straight\n"));
}

#[test]
fn eval_scores_oracle_and_shuffled_predictions() {
    let d = tempfile::tempdir().unwrap();
    let ds = d.path().join("ds");
    let out = ok(&["gen", "--geometry", "window", "--n", "30", "--seed", "11", "--split", "0.6,0.2,0.2", "--out", s(&ds)]);
    assert!(out.contains("train 18, val 6, test 6"), "{out}");

    let preds = d.path().join("pred.jsonl");
    ok(&["estimate", "--dataset", s(&ds), "--out", s(&preds)]);
    let scatter = d.path().join("scatter.csv");
    let report: Value = serde_json::from_str(&ok(&[
        "eval",
        "--predictions",
        s(&preds),
        "--dataset",
        s(&ds),
        "--scatter",
        s(&scatter),
    ]))
    .unwrap();
    assert_eq!(report["n"], 30);
    assert_eq!(report["f1"]["macro"], 1.0);
    assert!(report["mae"]["velocity"].as_f64().unwrap() < 0.1);
    assert!(report["per_geometry"]["window"].is_object());

    let svg = d.path().join("scatter.svg");
    ok(&["scatter", "--input", s(&scatter), "--out", s(&svg)]);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    // Rotating rule lists between samples breaks the id pairing.
    let mut shuffled = read_predictions(fs::read(&preds).unwrap().as_slice()).unwrap();
    let first = shuffled[0].rules.clone();
    for i in 0..shuffled.len() - 1 {
        shuffled[i].rules = shuffled[i + 1].rules.clone();
    }
    shuffled.last_mut().unwrap().rules = first;
    let mut buf = Vec::new();
    write_predictions(&mut buf, &shuffled).unwrap();
    fs::write(&preds, buf).unwrap();
    let report: Value =
        serde_json::from_str(&ok(&["eval", "--predictions", s(&preds), "--dataset", s(&ds), "--split", "test"])).unwrap();
    assert_eq!(report["n"], 6);
    assert!(report["f1"]["macro"].as_f64().unwrap() < 0.8, "{report}");
}

#[test]
fn eval_names_missing_ids() {
    let d = tempfile::tempdir().unwrap();
    let ds = d.path().join("ds");
    ok(&["gen", "--n", "10", "--out", s(&ds)]);
    let preds = d.path().join("pred.jsonl");
    fs::write(&preds, "").unwrap();
    let out = skill(&["eval", "--predictions", s(&preds), "--dataset", s(&ds)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: ") && err.contains("l_shape_000000"), "{err}");
}

#[test]
fn bad_split_is_rejected_before_writing() {
    let d = tempfile::tempdir().unwrap();
    let ds = d.path().join("ds");
    let out = skill(&["gen", "--n", "10", "--split", "0.5,0.5,0.5", "--out", s(&ds)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sum to 1"));
    assert!(!ds.exists());
    let out = skill(&["gen", "--n", "7", "--out", s(&ds)]);
    assert!(!out.status.success());
}

#[test]
fn seed_comes_from_the_environment() {
    let d = tempfile::tempdir().unwrap();
    let run = |dir: &str, seed: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_skill"))
            .args(["--quiet", "gen", "--n", "10", "--out", s(&d.path().join(dir))])
            .env("SKILL_SEED", seed)
            .output()
            .unwrap();
        assert!(out.status.success());
        fs::read_to_string(d.path().join(dir).join("manifest.jsonl")).unwrap()
    };
    let a = run("a", "3");
    assert_eq!(a, run("b", "3"));
    assert_ne!(a, run("c", "4"));
    assert!(a.contains("\"seed\":3"));
}

#[test]
fn resolved_config_is_echoed() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    fs::write(&cfg, r#"{"sim": {"dt": 0.001}}"#).unwrap();
    let labels = d.path().join("l.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_skill"))
        .args(["--config", s(&cfg), "segment", "--geometry", "l_shape", "--out", s(&labels)])
        .output()
        .unwrap();
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("\"dt\": 0.001") && err.contains("\"kp_pos\""), "{err}");

    fs::write(&cfg, r#"{"sim": {"dtt": 0.001}}"#).unwrap();
    let out = skill(&["--config", s(&cfg), "segment", "--geometry", "l_shape", "--out", s(&labels)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn every_flag_documents_its_default() {
    for cmd in ["gen", "simulate", "segment", "inject", "estimate", "eval", "scatter"] {
        let help = ok(&[cmd, "--help"]);
        let options = help.split("Options:").nth(1).unwrap();
        for line in options.lines().filter(|l| l.trim_start().starts_with("--")) {
            assert!(line.contains("[default") || line.contains("[required"), "{cmd}: {line}");
        }
    }
}

#[test]
fn rerunning_a_command_rewrites_identical_output() {
    let d = tempfile::tempdir().unwrap();
    let rules = d.path().join("rules.json");
    fs::write(&rules, r#"[{"kind":"velocity_scale","target_class":"corner","param":0.5}]"#).unwrap();
    let traj = d.path().join("traj.csv");
    let args = ["inject", "--geometry", "l_shape", "--pose-seed", "3", "--rules", s(&rules), "--out", s(&traj)];
    ok(&args);
    let first = fs::read(&traj).unwrap();
    ok(&args);
    assert_eq!(fs::read(&traj).unwrap(), first);
}
