use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarm-engage"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_bundled_2d() {
    let o = bin(&["validate", "--config", &scenario("scenario_2d.toml")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("bins = 64"));
    assert!(text.contains("layers = 12"));
    assert!(text.contains("base_strongly_connected = true"));
}

#[test]
fn plan_meets_desired_ratio() {
    let o = bin(&["plan", "--config", &scenario("scenario_2d.toml")]);
    assert_eq!(o.status.code(), Some(0));
    let report: toml::Table = stdout(&o).parse().unwrap();
    let ratio = report["estimated_ratio"].as_float().unwrap();
    assert!(ratio < 0.1, "{ratio}");
}

#[test]
fn run_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = bin(&[
        "run",
        "--config",
        &scenario("scenario_2d.toml"),
        "--seed",
        "4",
        "--option",
        "replan",
        "--out",
        out.to_str().unwrap(),
        "--heatmaps",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("steps.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("step,bin,s_b,s_r,eliminated,entered_cum"));
    let summary: toml::Table = std::fs::read_to_string(out.join("summary.toml")).unwrap().parse().unwrap();
    assert_eq!(summary["seed"].as_integer(), Some(4));
    assert_eq!(summary["option"].as_str(), Some("replan"));
    assert!(out.join("heatmaps/step_0000_red.ppm").exists());

    // the echoed config reproduces the run
    let again = dir.path().join("again");
    let resolved: PathBuf = out.join("config.resolved.toml");
    let o = bin(&["run", "--config", resolved.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read(out.join("steps.csv")).unwrap(),
        std::fs::read(again.join("steps.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(out.join("summary.toml")).unwrap(),
        std::fs::read(again.join("summary.toml")).unwrap()
    );
}

#[test]
fn ensemble_writes_per_run_directories() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "ensemble",
        "--config",
        &scenario("scenario_3d.toml"),
        "--runs",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    for i in 0..3 {
        assert!(dir.path().join(format!("run_{i:03}/summary.toml")).exists());
    }
    assert!(dir.path().join("ensemble.toml").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(bin(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["plan", "--config", "/no/such/file.toml"]).status.code(), Some(1));
    assert_eq!(bin(&["ensemble", "--config", &scenario("scenario_2d.toml"), "--runs", "0"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[grid]\ndims = [3, 3]\n").unwrap();
    assert_eq!(bin(&["validate", "--config", bad.to_str().unwrap()]).status.code(), Some(1));

    // a wall cuts the far column off from the base
    let walled = dir.path().join("walled.toml");
    std::fs::write(
        &walled,
        r#"
[grid]
dims = [3, 3]
obstacles = [{ min = [0, 1], max = [2, 1] }]
base = { min = [0, 0], max = [0, 0] }

[red]
count = 5
init = { min = [0, 2], max = [2, 2] }

[blue]
count = 5
"#,
    )
    .unwrap();
    assert_eq!(bin(&["run", "--config", walled.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(bin(&["validate", "--config", walled.to_str().unwrap()]).status.code(), Some(2));

    // an obstacle inside the base box is a config error
    let split = dir.path().join("split.toml");
    std::fs::write(
        &split,
        r#"
[grid]
dims = [3, 3]
obstacles = [{ min = [0, 1], max = [0, 1] }]
base = { min = [0, 0], max = [0, 2] }

[red]
count = 5
init = { min = [2, 0], max = [2, 2] }

[blue]
count = 5
init = { min = [1, 1], max = [1, 1] }
"#,
    )
    .unwrap();
    let o = bin(&["validate", "--config", split.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}
