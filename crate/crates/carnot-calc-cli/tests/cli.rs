use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_carnot-calc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn identities_pass_on_the_xyt_graph() {
    let o = run(&["identities", "--surface", "xyt-graph", "--grid", "128"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("identity_id,surface_id,grid,residual,pass"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    assert!(rows.iter().any(|r| r.starts_with("ambient/za,xyt-graph,128,")));
}

#[test]
fn vertical_plane_has_zero_curvature() {
    let o = run(&["curvature", "--surface", "vertical-plane:1,0,0", "--points", "9"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let hp = header.iter().position(|c| *c == "H_param").unwrap();
    let hl = header.iter().position(|c| *c == "H_levelset").unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 9);
    for r in &rows {
        assert!(r[hp].parse::<f64>().unwrap().abs() <= 1e-6);
        assert!(r[hl].parse::<f64>().unwrap().abs() <= 1e-6);
    }
}

#[test]
fn stability_finds_a_witness_on_the_xyt_graph() {
    let o = run(&["stability", "--surface", "xyt-graph", "--grid", "64"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["min_value"].as_f64().unwrap() < -1e-6);
    let w = &v["witness"];
    assert!(w["value"].as_f64().unwrap() < 0.0);
    assert_eq!(v["table"].as_array().unwrap().len(), 125);
}

#[test]
fn stability_refuses_non_minimal_surfaces() {
    let o = run(&["stability", "--surface", "paraboloid", "--grid", "32"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "1", "2", "4"] {
        let path = dir.path().join(format!("out{}.json", outs.len()));
        let o = bin()
            .args(["stability", "--surface", "xyt-graph", "--grid", "32", "-o"])
            .arg(&path)
            .env("CARNOT_CALC_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
        outs.push(fs::read(&path).unwrap());
    }
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    fs::write(&cfg, r#"{"surface": "paraboloid", "points": 4, "format": "json"}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let o = run(&["curvature", "--config", cfg]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);

    let o = run(&["curvature", "--config", cfg, "--points", "6", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 7);

    fs::write(dir.path().join("bad.json"), r#"{"surface": "paraboloid", "eps": 0.1}"#).unwrap();
    let o = run(&["curvature", "--config", dir.path().join("bad.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["curvature", "--surface", "no-such-surface"]).status.code(), Some(2));
    assert_eq!(run(&["curvature"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["variation", "--surface", "t-plane", "--mode", "v3"]).status.code(), Some(2));
    assert_eq!(run(&["measure", "--surface", "t-plane", "--domain", "1,0,0,1"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn user_patch_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("graph.json");
    fs::write(
        &path,
        r#"{"x": "u", "y": "v", "t": {"terms": [[1.0, [2, 0]], [1.0, [0, 2]]]}, "domain": [0.5, 1.5, 0.5, 1.5]}"#,
    )
    .unwrap();
    let id = format!("patch:{}", path.display());
    let mine = run(&["measure", "--surface", &id, "--grid", "32"]);
    let cat = run(&["measure", "--surface", "paraboloid", "--grid", "32"]);
    assert_eq!(mine.status.code(), Some(0));
    let a: Value = serde_json::from_str(&stdout(&mine)).unwrap();
    let b: Value = serde_json::from_str(&stdout(&cat)).unwrap();
    assert!((a["value"].as_f64().unwrap() - b["value"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn variation_routes_agree() {
    let o = run(&["variation", "--surface", "xyt-graph", "--field", "normal:0,0,1.5,0.75", "--mode", "all", "--grid", "128"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["checks"].as_array().unwrap().len(), 3);
    assert!(v["values"]["v1"].as_f64().unwrap().abs() < 1e-4);
}
