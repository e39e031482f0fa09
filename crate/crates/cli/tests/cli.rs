use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wavecatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavecatch")).args(args).env_remove("WAVECATCH_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_writes_a_log_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trial.jsonl");
    let o = wavecatch(&["simulate", "--seed", "3", "--out", p(&log)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("success=true"));
    let text = fs::read_to_string(&log).unwrap();
    let last: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["record"], "summary");
    assert_eq!(last["success"], true);
}

#[test]
fn controller_override_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trial.jsonl");
    let o = wavecatch(&["simulate", "--set", "controller=fixed_horizon", "--out", p(&log)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("controller=fixed_horizon"));
    let header: Value = serde_json::from_str(fs::read_to_string(&log).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["controller"], "fixed_horizon");
}

#[test]
fn log_goes_to_stdout_without_out() {
    let o = wavecatch(&["simulate", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
    assert!(stderr(&o).contains("success=true"));
}

#[test]
fn a_miss_exits_two_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trial.jsonl");
    let short = ["simulate", "--set", "scenario.duration_s=0.3", "--out", p(&log)];
    let o = wavecatch(&short);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("success=false"));
    let mut allowed = short.to_vec();
    allowed.push("--no-fail-on-miss");
    assert_eq!(wavecatch(&allowed).status.code(), Some(0));
}

#[test]
fn config_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value = serde_json::from_str(&wavecatch::ConfigFile::default().to_json_string()).unwrap();
    doc.as_object_mut().unwrap().remove("mission");
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    let o = wavecatch(&["simulate", "--config", p(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mission"), "{}", stderr(&o));

    fs::write(&path, "{\n  \"sea_state\": {\n    \"roll_amplitude_deg\": 5.0,\n").unwrap();
    let o = wavecatch(&["simulate", "--config", p(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let o = wavecatch(&["simulate", "--set", "arm.reach_m=2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("reach_m"), "{}", stderr(&o));

    let o = wavecatch(&["simulate", "--config", p(&dir.path().join("absent.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.json"));
}

#[test]
fn shipped_config_loads() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let dir = tempfile::tempdir().unwrap();
    let o = wavecatch(&["simulate", "--config", p(&path), "--seed", "3", "--out", p(&dir.path().join("t.jsonl"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

fn campaign_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["campaign", "-n", "2", "--controllers", "shrinking_horizon,simple_following", "--seed", "4", "--out", p(dir)];
    args.extend_from_slice(extra);
    wavecatch(&args)
}

#[test]
fn campaign_writes_one_file_per_trial_and_is_repeatable() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let o = campaign_into(a.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(
        names,
        ["campaign.csv", "shrinking_horizon_000.jsonl", "shrinking_horizon_001.jsonl", "simple_following_000.jsonl", "simple_following_001.jsonl"]
    );
    assert_eq!(campaign_into(b.path(), &[]).status.code(), Some(0));
    assert_eq!(campaign_into(c.path(), &["--parallel", "3"]).status.code(), Some(0));
    for name in &names {
        let first = fs::read(a.path().join(name)).unwrap();
        assert_eq!(first, fs::read(b.path().join(name)).unwrap(), "{name} differs between runs");
        assert_eq!(first, fs::read(c.path().join(name)).unwrap(), "{name} differs under --parallel");
    }
}

#[test]
fn campaign_into_an_unwritable_place_fails() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    fs::write(&file, "x").unwrap();
    let o = campaign_into(&file.join("sub"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("plain-file"), "{}", stderr(&o));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wavecatch"))
        .args(["campaign", "-n", "1", "--out", p(dir.path())])
        .env("WAVECATCH_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("WAVECATCH_THREADS"));
}

fn write_trace(dir: &Path, rows: &[(f64, [f64; 3])]) -> std::path::PathBuf {
    let mut text = String::from("t,px,py,pz,qw,qx,qy,qz\n");
    for (t, [x, y, z]) in rows {
        text.push_str(&format!("{t},{x},{y},{z},1,0,0,0\n"));
    }
    let path = dir.join("trace.csv");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn replay_predicts_a_constant_velocity_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (p0, v) = ([1.0, 0.5, 2.0], [0.4, -0.3, 0.1]);
    let rows: Vec<(f64, [f64; 3])> = (0..=500)
        .map(|k| {
            let t = k as f64 * 0.01;
            (t, [p0[0] + v[0] * t, p0[1] + v[1] * t, p0[2] + v[2] * t])
        })
        .collect();
    let trace = write_trace(dir.path(), &rows);
    let out = dir.path().join("est.csv");
    let o = wavecatch(&["replay-eskf", p(&trace), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    let col = |name: &str| last[header.iter().position(|h| *h == name).unwrap()];
    let t = col("t") + 0.5;
    let err = ((col("pred05_px") - (p0[0] + v[0] * t)).powi(2)
        + (col("pred05_py") - (p0[1] + v[1] * t)).powi(2)
        + (col("pred05_pz") - (p0[2] + v[2] * t)).powi(2))
    .sqrt();
    assert!(err <= 1e-3, "final prediction error {err}");
    assert_eq!(text.lines().count(), rows.len() + 1);
}

#[test]
fn replay_rejects_bad_traces() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_trace(dir.path(), &[]);
    assert_eq!(wavecatch(&["replay-eskf", p(&empty)]).status.code(), Some(1));

    let shuffled = write_trace(dir.path(), &[(0.0, [0.0; 3]), (0.02, [0.0; 3]), (0.01, [0.0; 3])]);
    let o = wavecatch(&["replay-eskf", p(&shuffled)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not increasing"));

    let path = dir.path().join("bad.csv");
    fs::write(&path, "t,x,py,pz,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n").unwrap();
    let o = wavecatch(&["replay-eskf", p(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`x`"), "{}", stderr(&o));
}

#[test]
fn bench_table() {
    let o = wavecatch(&["bench", "--horizons", "1,20", "--repeats", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    let median = |r: &Vec<&str>| r[2].parse::<f64>().unwrap();
    assert!(median(&rows[0]) < median(&rows[1]));

    let o = wavecatch(&["bench", "--horizons", "20", "--repeats", "1"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().nth(1).unwrap().split(',').nth(1), Some("1"));

    assert_eq!(wavecatch(&["bench", "--horizons", "101"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(wavecatch(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(wavecatch(&["--help"]).status.code(), Some(0));
}
