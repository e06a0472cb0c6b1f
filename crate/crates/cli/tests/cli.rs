use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use traffic_cli::{run, EXIT_COLLISION, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn traffic(args: &[&dyn AsRef<std::ffi::OsStr>]) -> i32 {
    let mut argv: Vec<OsString> = vec!["traffic".into()];
    argv.extend(args.iter().map(|a| a.as_ref().to_owned()));
    run(argv)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// A short copy of a bundled scenario.
fn shortened(name: &str, t_final: f64, dir: &Path) -> PathBuf {
    let mut cfg = read_json(&scenario(name));
    cfg["integrator"]["t_final_s"] = t_final.into();
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn every_bundled_scenario_parses() {
    for entry in fs::read_dir(scenario("x").parent().unwrap()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        traffic_core::ScenarioConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn equilibrium_of_two_lane_outflow_config() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(traffic(&[&"equilibrium", &scenario("two_lane_outflow"), &"--out", &dir.path()]), EXIT_OK);
    let eq = read_json(&dir.path().join("equilibrium.json"));
    assert!((eq["headways"][0].as_f64().unwrap() - 45.4).abs() < 0.1);
    assert!((eq["headways"][1].as_f64().unwrap() - 22.4).abs() < 0.1);
    assert_eq!(eq["counts"], serde_json::json!([33, 67]));
}

#[test]
fn thresholds_file_lists_adjacent_pairs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(traffic(&[&"thresholds", &scenario("three_lane_to_fast"), &"--out", &dir.path()]), EXIT_OK);
    let t = read_json(&dir.path().join("thresholds.json"));
    let pairs: Vec<(u64, u64)> = t["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["perturbed_lane"].as_u64().unwrap(), e["target_lane"].as_u64().unwrap()))
        .collect();
    assert_eq!(pairs, vec![(1, 2), (2, 1), (2, 3), (3, 2)]);
}

#[test]
fn stability_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(traffic(&[&"stability", &scenario("single_lane_stop_and_go"), &"--out", &dir.path()]), EXIT_OK);
    let text = fs::read_to_string(dir.path().join("stability.json")).unwrap();
    let report: traffic_core::report::StabilityReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
    assert_eq!(report.lanes[0].growth.as_ref().unwrap().vehicles, 91);
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shortened("two_lane_from_rest", 120.0, dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(traffic(&[&"simulate", &cfg, &"--out", &a]), EXIT_OK);
    assert_eq!(traffic(&[&"simulate", &cfg, &"--out", &b]), EXIT_OK);
    for file in ["trajectory.csv", "lane_counts.csv", "events.csv", "trajectory.svg"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let events = fs::read_to_string(a.join("events.csv")).unwrap();
    assert!(events.lines().count() > 1);

    let c = dir.path().join("c");
    assert_eq!(traffic(&[&"simulate", &cfg, &"--out", &c, &"--seed", &"99", &"--no-svg"]), EXIT_OK);
    assert!(!c.join("trajectory.svg").exists());
    assert_ne!(fs::read(a.join("events.csv")).unwrap(), fs::read(c.join("events.csv")).unwrap());
}

#[test]
fn stride_thins_samples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shortened("two_lane_equilibrium", 20.0, dir.path());
    let out = dir.path().join("out");
    assert_eq!(traffic(&[&"simulate", &cfg, &"--out", &out, &"--stride", &"50"]), EXIT_OK);
    let rows = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    // t = 0, 5, 10, 15, 20 for 100 vehicles.
    assert_eq!(rows.lines().count(), 1 + 5 * 100);
    let counts = fs::read_to_string(out.join("lane_counts.csv")).unwrap();
    let mut lines = counts.lines();
    assert_eq!(lines.next(), Some("t,N_1,N_2"));
    assert!(lines.all(|l| l.ends_with(",33,67")));
}

#[test]
fn collision_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let status = traffic(&[&"simulate", &scenario("bando_collision"), &"--out", &dir.path()]);
    assert_eq!(status, EXIT_COLLISION);
    // What was recorded before the collision is still written.
    let rows = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(rows.lines().count() > 101);
}

#[test]
fn failures_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(traffic(&[&"simulate"]), EXIT_USAGE);
    assert_eq!(traffic(&[&"launch", &"x.json"]), EXIT_USAGE);
    assert_eq!(traffic(&[&"stability", &dir.path().join("missing.json")]), EXIT_FAILURE);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"road\": {}}").unwrap();
    assert_eq!(traffic(&[&"equilibrium", &bad]), EXIT_FAILURE);

    // No --out and no output.dir in the config.
    let mut cfg = read_json(&scenario("two_lane_equilibrium"));
    cfg.as_object_mut().unwrap().remove("output");
    let no_dir = dir.path().join("no_dir.json");
    fs::write(&no_dir, cfg.to_string()).unwrap();
    assert_eq!(traffic(&[&"simulate", &no_dir]), EXIT_FAILURE);

    // Output path blocked by a regular file.
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let short = shortened("two_lane_equilibrium", 1.0, dir.path());
    assert_eq!(traffic(&[&"simulate", &short, &"--out", &blocker]), EXIT_FAILURE);
}
