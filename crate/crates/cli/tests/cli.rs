use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn gou(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gou")).args(args).output().unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn run_preset(dir: &TempDir, preset: &str, suite: &str, paths: &str) -> Output {
    let out = dir.path().to_str().unwrap();
    gou(&["run", "--preset", preset, "--seed", "11", "--suite", suite, "--paths", paths, "--out", out])
}

#[test]
fn zero_model_duality_passes() {
    let dir = TempDir::new().unwrap();
    let o = run_preset(&dir, "zero", "duality", "500");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path());
    assert_eq!(s["pass"], true);
    let rec = &s["results"][0];
    assert_eq!(rec["status"], "pass");
    // V = x and R = y, so every probability is 0 or 1 with no spread.
    let table = fs::read_to_string(dir.path().join(rec["csv"].as_str().unwrap())).unwrap();
    let mut rows = csv::Reader::from_reader(table.as_bytes());
    for row in rows.records() {
        let row = row.unwrap();
        let (p_v, p_r) = (&row[3], &row[5]);
        assert_eq!(p_v, p_r);
        assert!(p_v == "0" || p_v == "1", "{p_v}");
    }
}

#[test]
fn runs_are_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        assert_eq!(run_preset(d, "drift-ou", "inverse-flow", "200").status.code(), Some(0));
    }
    let read = |d: &TempDir| fs::read(d.path().join("summary.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    let csv = |d: &TempDir| fs::read(d.path().join("inverse-flow-drift-ou.csv")).unwrap();
    assert_eq!(csv(&a), csv(&b));
}

#[test]
fn refused_hypothesis_exits_3() {
    let dir = TempDir::new().unwrap();
    let o = run_preset(&dir, "nonmonotone", "duality", "100");
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("-1"));
}

#[test]
fn all_skips_refused_suites() {
    let dir = TempDir::new().unwrap();
    let o = run_preset(&dir, "nonmonotone", "all", "200");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let s = summary(dir.path());
    let status = |name: &str| {
        s["results"].as_array().unwrap().iter().find(|r| r["suite"] == name).unwrap()["status"].clone()
    };
    assert_eq!(status("duality"), "skipped");
    assert_eq!(status("ruin"), "skipped");
    assert_eq!(status("inverse-flow"), "pass");
    assert_eq!(status("monotonicity"), "pass");
}

#[test]
fn invalid_config_exits_2_with_line() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "schema_version = 1\nseed = 1\ngrid_dt = -0.5\n\n[[models]]\npreset = \"zero\"\n").unwrap();
    let o = gou(&["validate-config", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");

    fs::write(&path, "schema_version = 1\nseed = 1\n[[models]]\npreset = \"nope\"\n").unwrap();
    let o = gou(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn preset_needs_seed() {
    let o = gou(&["run", "--preset", "zero"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_and_list() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("ok.toml");
    fs::write(
        &path,
        "schema_version = 1\nseed = 4\nsuite = \"ruin\"\n\n[[models]]\npreset = \"dufresne\"\n\n[[models]]\nname = \"custom\"\ndrift = [-1.0, 1.0]\ncov = { uu = 1.0, ul = 0.0, ll = 0.0 }\n",
    )
    .unwrap();
    let o = gou(&["validate-config", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("2 model(s)"));

    let o = gou(&["list-presets"]);
    let listing = String::from_utf8_lossy(&o.stdout);
    for name in gou_core::PRESET_NAMES {
        assert!(listing.contains(name));
    }
}
