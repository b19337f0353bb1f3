use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("hvp-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn hvp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hvp")).args(args).env_remove("HVP_THREADS").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = hvp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn wordmetric_radius_one() {
    let d = scratch("word");
    ok(&["--out", d.to_str().unwrap(), "wordmetric", "--radius", "1"]);
    let csv = read(&d, "ball.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,two_z,dist"));
    assert_eq!(lines.count(), 5);
    let sidecar: serde_json::Value = serde_json::from_str(&read(&d, "run.json")).unwrap();
    assert_eq!(sidecar["command"], "wordmetric");
}

#[test]
fn vper_of_linear_field() {
    let d = scratch("vper");
    ok(&["--out", d.to_str().unwrap(), "vper", "--field", "z", "--a-min", "-1", "--a-max", "3", "--quad", "8"]);
    let csv = read(&d, "profile.csv");
    let mut n = 0;
    for line in csv.lines().skip(1) {
        let (a, v) = line.split_once(',').unwrap();
        let (a, v): (f64, f64) = (a.parse().unwrap(), v.parse().unwrap());
        assert!((v - (-a).exp2()).abs() < 1e-12, "a = {a}: {v}");
        n += 1;
    }
    assert!(n > 10);
}

#[test]
fn core_suite_passes() {
    let out = ok(&["check", "--suite", "core"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{text}");
}

#[test]
fn exit_codes() {
    assert_eq!(hvp(&["--help"]).status.code(), Some(0));
    assert_eq!(hvp(&["--version"]).status.code(), Some(0));
    assert_eq!(hvp(&["wordmetric", "--bogus"]).status.code(), Some(1));
    assert_eq!(hvp(&["vper", "--field", "/nonexistent/field.bin", "--out", scratch("bad").to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let d = scratch("precedence");
    let cfg = d.join("config.json");
    std::fs::write(&cfg, r#"{"seed": 5, "wordmetric": {"radius": 2}}"#).unwrap();
    let from_file = d.join("file");
    ok(&["--config", cfg.to_str().unwrap(), "--out", from_file.to_str().unwrap(), "wordmetric"]);
    let side: serde_json::Value = serde_json::from_str(&read(&from_file, "run.json")).unwrap();
    assert_eq!(side["seed"], 5);
    let rows_r2 = read(&from_file, "ball.csv").lines().count() - 1;
    assert!(rows_r2 > 5);

    let from_flag = d.join("flag");
    ok(&["--config", cfg.to_str().unwrap(), "--out", from_flag.to_str().unwrap(), "--seed", "7", "wordmetric", "--radius", "1"]);
    let side: serde_json::Value = serde_json::from_str(&read(&from_flag, "run.json")).unwrap();
    assert_eq!(side["seed"], 7);
    assert_eq!(read(&from_flag, "ball.csv").lines().count() - 1, 5);

    std::fs::write(&cfg, r#"{"wordmetric": {"radius": 2, "extra": 1}}"#).unwrap();
    assert_eq!(hvp(&["--config", cfg.to_str().unwrap(), "wordmetric"]).status.code(), Some(1));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let d = scratch("threads");
    let run = |t: &str| {
        let dir = d.join(t);
        ok(&["--threads", t, "--seed", "3", "--out", dir.to_str().unwrap(), "omega", "--field", "trig", "--samples", "2000"]);
        (std::fs::read(dir.join("run.json")).unwrap(), std::fs::read(dir.join("omega.json")).unwrap())
    };
    assert_eq!(run("1"), run("2"));
}
