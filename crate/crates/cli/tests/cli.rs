use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn racegame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_racegame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

/// A small stadium and coarse kernel grid so that kernels take well under a second.
const SMALL: &str = r#"
[track]
kind = "stadium"
straight_m = 1.0
radius_m = 0.6
halfwidth_m = 0.3
arc_pieces = 24

[kernel]
cell_m = 0.1
headings = 8
inflation = 0

[race]
duration_steps = 15

[[cars]]
name = "fast"
max_speed_mps = 1.5
pruner = "nstep"

[[cars]]
name = "slow"
max_speed_mps = 1.0
pruner = "none"
"#;

#[test]
fn solve_reports_every_concept_with_schema_version() {
    let dir = tempfile::tempdir().unwrap();
    // follower replies: row 0 -> column 0 (A=1), row 1 -> column 1 (A=2); the
    // leader commits to row 1, although only (0,0) is a Nash pair since
    // P1 deviates from (1,1) to row 0
    let m = write(dir.path(), "m.csv", "i,j,a,b\n0,0,1,2\n0,1,3,1\n1,0,0,0\n1,1,2,3\n");
    let out = racegame(&["solve", &m]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["stackelberg"][0]["pair"], serde_json::json!({"i": 1, "j": 1}));
    assert_eq!(v["stackelberg_value"], 2.0);
    let nash: Vec<&Value> = v["nash"].as_array().unwrap().iter().map(|p| &p["pair"]).collect();
    assert_eq!(nash, [&serde_json::json!({"i": 0, "j": 0})]);
    assert!(v["sequential"].is_null(), "A is not row-constant");
}

#[test]
fn malformed_matrix_file_exits_one_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.csv", "i,j,a,b\n0,0,1,2\n0,1,x,1\n");
    let out = racegame(&["solve", &m]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_exits_one_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.toml", "[race]\nhorizon = 2\nhorizon_steps = 3\n");
    let out = racegame(&["race", "--config", &c]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("line 3") && err.contains("horizon_steps"), "{err}");
}

#[test]
fn invalid_values_and_flags_exit_one() {
    let out = racegame(&["race", "--pruner", "none", "--horizon", "0"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let out = racegame(&["race", "--game", "chess"]);
    assert_eq!(out.status.code(), Some(1));
    let out = racegame(&["batch", "--pruner", "none", "--w", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = racegame(&["race", "--pruner", "none", "--concept", "sequential"]);
    assert_eq!(out.status.code(), Some(1), "sequential concept on the cooperative game");
}

#[test]
fn unwritable_output_exits_two() {
    let out = racegame(&["primitives", "--out", "/nonexistent-dir/lib.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_duration_race_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.toml", SMALL);
    let out = racegame(&["race", "--config", &c, "--duration-steps", "0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let log = stdout(&out);
    assert_eq!(log.lines().count(), 1);
    assert!(log.starts_with("step,leader,"));
}

#[test]
fn races_repeat_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.toml", SMALL);
    let run = |seed: &str| {
        let out = racegame(&["race", "--config", &c, "--seed", seed]);
        assert!(out.status.success(), "{}", stderr(&out));
        stdout(&out)
    };
    let a = run("7");
    assert_eq!(a.lines().count(), 16);
    assert_eq!(a, run("7"));
    assert_ne!(a, run("8"));
}

#[test]
fn batch_metrics_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.toml", SMALL);
    let run = |threads: &str, tag: &str| {
        let out_path = dir.path().join(format!("m{tag}.json"));
        let sums = dir.path().join(format!("s{tag}.csv"));
        let timing = dir.path().join(format!("t{tag}.json"));
        let out = racegame(&[
            "--threads",
            threads,
            "batch",
            "--config",
            &c,
            "--races",
            "4",
            "--seed",
            "10",
            "--out",
            out_path.to_str().unwrap(),
            "--summaries",
            sums.to_str().unwrap(),
            "--timing",
            timing.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let t: Value = serde_json::from_str(&fs::read_to_string(&timing).unwrap()).unwrap();
        assert_eq!(t["steps"], 60);
        (fs::read(&out_path).unwrap(), fs::read(&sums).unwrap())
    };
    let (m1, s1) = run("1", "a");
    let (m2, s2) = run("2", "b");
    assert_eq!(m1, m2);
    assert_eq!(s1, s2);
    let v: Value = serde_json::from_slice(&m1).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["metrics"]["races"], 4);
    assert_eq!(v["metrics"]["steps"], 60);
    assert!(v.get("timing").is_none() && v["metrics"].get("box_checks").is_none());
    assert_eq!(String::from_utf8(s1).unwrap().lines().count(), 5);
}

#[test]
fn kernel_file_round_trips_into_a_race() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.toml", SMALL);
    let k = dir.path().join("k.txt");
    let out = racegame(&["kernel", "--config", &c, "--max-speed-mps", "1.0", "--out", k.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["converged"], true);
    assert_eq!(summary["headings"], 8);
    assert_eq!(summary["modes"], 18);
    assert!(summary["members"].as_u64().unwrap() > 0);

    let with_kernel = SMALL.replace(
        "max_speed_mps = 1.0\npruner = \"none\"",
        &format!("max_speed_mps = 1.0\npruner = \"kernel\"\nkernel_file = {:?}", k.to_str().unwrap()),
    );
    let c2 = write(dir.path(), "c2.toml", &with_kernel);
    let out = racegame(&["race", "--config", &c2, "--seed", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 16);

    // a kernel computed for another library is rejected
    let mismatched = with_kernel.replace("max_speed_mps = 1.0", "max_speed_mps = 2.0");
    let c3 = write(dir.path(), "c3.toml", &mismatched);
    let out = racegame(&["race", "--config", &c3]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("modes"), "{}", stderr(&out));
}

#[test]
fn primitives_export_has_one_row_per_mode() {
    let out = racegame(&["primitives", "--max-speed-mps", "1.0"]);
    assert!(out.status.success());
    let csv = stdout(&out);
    assert!(csv.starts_with("id,speed_mps,yaw_rate_radps,duration_s,successors"));
    assert_eq!(csv.lines().count(), 1 + 2 * 9);
}
