use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mamnav::runner::{self, RunOptions};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario() -> String {
    root().join("scenarios/paper_case.yaml").display().to_string()
}

fn mamnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mamnav")).args(args).output().expect("binary runs")
}

#[test]
fn run_writes_three_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = mamnav(&["run", &scenario(), "--mode", "pause-resume", "-o", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trajectory.csv", "events.jsonl", "summary.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,x,y,heading,v,omega,a_z,mode,side,extruding,critical,clearance_min");
    for line in std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap().lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}

#[test]
fn missing_scenario_exits_2() {
    let o = mamnav(&["run", "no/such/file.yaml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(mamnav(&["validate", "no/such/file.yaml"]).status.code(), Some(2));
}

#[test]
fn bad_override_exits_2() {
    let o = mamnav(&["validate", &scenario(), "--set", "controller.d_turn=5.0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mamnav(&["validate", &scenario(), "--set", "controller.nonsense=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mamnav(&["validate", &scenario(), "--set", "novalue"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn override_round_trips_into_summary() {
    let o = mamnav(&["run", &scenario(), "--set", "controller.v_lim_critical=0.05", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["controller"]["v_lim_critical"], 0.05);
    assert_eq!(v["seed"], 3);
    assert!(v["max_planned_critical_speed"].as_f64().unwrap() <= 0.05 * (1.0 + 1e-4));
}

#[test]
fn cli_and_library_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = mamnav(&["run", &scenario(), "--seed", "11", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let opts = RunOptions { seed: Some(11), ..RunOptions::default() };
    let ep = runner::cmd_run(Path::new(&scenario()), &opts, None).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), ep.summary_json().unwrap());
    assert_eq!(std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap(), ep.trajectory_csv().unwrap());
    assert_eq!(std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap(), ep.events_jsonl().unwrap());
}

#[test]
fn calibrate_echoes_means_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let meas = root().join("data/table2_caseA.csv").display().to_string();
    let mut files = Vec::new();
    for name in ["a.json", "b.json"] {
        let p = dir.path().join(name);
        let o = mamnav(&["calibrate", &scenario(), &meas, "-o", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let text = String::from_utf8(o.stdout).unwrap();
        assert!(text.contains("x +0.7575 y +0.8225 z +0.0675"), "{text}");
        files.push(std::fs::read(p).unwrap());
    }
    assert_eq!(files[0], files[1]);

    // A run that references the gains echoes their id.
    let p = dir.path().join("a.json");
    let o = mamnav(&["run", &scenario(), "--calibration", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let cal: serde_json::Value = serde_json::from_slice(&files[0]).unwrap();
    assert_eq!(v["calibration_id"], cal["id"]);
}

#[test]
fn empty_measurements_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.csv");
    std::fs::write(&p, "sample,x_mm,y_mm,z_mm\n").unwrap();
    let o = mamnav(&["calibrate", &scenario(), p.to_str().unwrap(), "-o", dir.path().join("g.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_calibration_exits_5() {
    // Bumps moved off the path: nothing disturbs the print.
    let dir = tempfile::tempdir().unwrap();
    let meas = root().join("data/table2_caseA.csv").display().to_string();
    let o = mamnav(&[
        "calibrate",
        &scenario(),
        &meas,
        "--set",
        "map.bumps=[]",
        "-o",
        dir.path().join("g.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn timeout_exits_4() {
    let o = mamnav(&["run", &scenario(), "--set", "sim.t_max=20"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["timed_out"], true);
}

#[test]
fn compare_single_repeat_equals_episode() {
    let dir = tempfile::tempdir().unwrap();
    let o = mamnav(&["compare", &scenario(), "--repeats", "1", "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8(o.stdout).unwrap();
    for row in ["Design target", "Case A (avg)", "Case B (avg)", "Deviation A", "Deviation B", "Improvement"] {
        assert!(table.contains(row), "{row} missing from\n{table}");
    }
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(v["continuous"]["mean_deviations"], v["episodes"][0]["deviations"]);
    assert_eq!(v["pause_resume"]["mean_deviations"], v["episodes"][1]["deviations"]);
    assert_eq!(mamnav(&["compare", &scenario(), "--repeats", "0"]).status.code(), Some(2));
}
