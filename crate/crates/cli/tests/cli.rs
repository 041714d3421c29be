use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lampshade::io::{write_png8, GrayImage};

const SMALL: &str = r#"{"resolution": 64, "voxel": 0.2,
 "pack": {"search": {"max_runs": 2, "ccvt": {"max_iterations": 30}}},
 "eval": {"tilt_samples": 3}}"#;

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let n = 64;
        let mut px = vec![0u8; n * n];
        for r in 0..n {
            for c in 0..n {
                let (x, y) = (c as f64 - 31.5, r as f64 - 31.5);
                if x.hypot(y) <= 8.0 {
                    px[r * n + c] = (60.0 + 150.0 * c as f64 / 63.0) as u8;
                }
            }
        }
        write_png8(&dir.path().join("target.png"), &GrayImage::new(n, n, px)).unwrap();
        std::fs::write(dir.path().join("config.json"), SMALL).unwrap();
        Fixture { dir }
    }

    fn path(&self, p: &str) -> PathBuf {
        self.dir.path().join(p)
    }

    fn run(&self, out: &str, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_lampshade"))
            .args(args)
            .arg("--config")
            .arg(self.path("config.json"))
            .arg("--target")
            .arg(self.path("target.png"))
            .arg("--out")
            .arg(self.path(out))
            .env("RUST_LOG", "info")
            .output()
            .unwrap()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn pipeline_writes_artifacts_and_reuses_them() {
    let f = Fixture::new();
    let o = f.run("a", &["pipeline"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for file in [
        "refs/level_+00.png",
        "density.png",
        "density.json",
        "layout.jsonl",
        "pack.json",
        "tessellation.svg",
        "tubes.jsonl",
        "validation.json",
        "lamp.stl",
        "mesh_audit.json",
        "simulated.png",
        "eval/report.json",
        "eval/histogram.svg",
        "eval/tilt.csv",
    ] {
        assert!(f.path("a").join(file).is_file(), "missing {file}");
    }
    for stage in [
        "refs", "density", "pack", "tubes", "mesh", "simulate", "eval",
    ] {
        assert!(f
            .path("a")
            .join("manifests")
            .join(format!("{stage}.json"))
            .is_file());
    }
    let audit: serde_json::Value =
        serde_json::from_slice(&read(&f.path("a/mesh_audit.json"))).unwrap();
    assert_eq!(audit["ok"], true);

    let stl_before = std::fs::metadata(f.path("a/lamp.stl"))
        .unwrap()
        .modified()
        .unwrap();
    let again = f.run("a", &["pipeline"]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(
        stderr(&again).matches("up to date").count(),
        7,
        "{}",
        stderr(&again)
    );
    assert_eq!(
        std::fs::metadata(f.path("a/lamp.stl"))
            .unwrap()
            .modified()
            .unwrap(),
        stl_before
    );
}

#[test]
fn same_seed_gives_identical_outputs() {
    let f = Fixture::new();
    for out in ["a", "b"] {
        for stage in ["refs", "density", "pack", "tubes"] {
            let o = f.run(out, &[stage, "--seed", "5"]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        }
    }
    for file in ["layout.jsonl", "tubes.jsonl", "pack.json"] {
        assert_eq!(
            read(&f.path("a").join(file)),
            read(&f.path("b").join(file)),
            "{file}"
        );
    }
}

#[test]
fn stage_without_upstream_names_the_missing_stage() {
    let f = Fixture::new();
    let o = f.run("a", &["pack"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("`density`"), "{}", stderr(&o));
}

#[test]
fn edited_upstream_output_is_stale_until_forced() {
    let f = Fixture::new();
    for stage in ["refs", "density"] {
        assert_eq!(f.run("a", &[stage]).status.code(), Some(0));
    }
    let density = f.path("a/density.json");
    let mut text = read(&density);
    text.push(b'\n');
    std::fs::write(&density, text).unwrap();
    let o = f.run("a", &["pack"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(
        stderr(&o).contains("stale cache for stage `density`"),
        "{}",
        stderr(&o)
    );
    assert_eq!(f.run("a", &["pack", "--force"]).status.code(), Some(0));
}

#[test]
fn colliding_tubes_exit_with_constraint_code() {
    let f = Fixture::new();
    for stage in ["refs", "density", "pack"] {
        assert_eq!(f.run("a", &[stage]).status.code(), Some(0));
    }
    // a copy of the first disk, nudged sideways, forces its tube through the original
    let layout = f.path("a/layout.jsonl");
    let text = String::from_utf8(read(&layout)).unwrap();
    let mut disk: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    disk["id"] = 1_000_000.into();
    disk["center"]["x"] = (disk["center"]["x"].as_f64().unwrap() + 0.5).into();
    std::fs::write(&layout, format!("{text}{disk}\n")).unwrap();
    let o = f.run("a", &["tubes", "--force"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&read(&f.path("a/validation.json"))).unwrap();
    assert!(!report["violations"].as_array().unwrap().is_empty());
}

#[test]
fn capacity_failure_exits_with_convergence_code() {
    let f = Fixture::new();
    std::fs::write(
        f.path("config.json"),
        r#"{"resolution": 64, "pack": {"search": {"max_runs": 1,
            "ccvt": {"max_iterations": 3, "max_newton": 1, "capacity_tol": 1e-15}}}}"#,
    )
    .unwrap();
    for stage in ["refs", "density"] {
        assert_eq!(f.run("a", &[stage]).status.code(), Some(0));
    }
    let o = f.run("a", &["pack"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let f = Fixture::new();
    std::fs::write(f.path("config.json"), r#"{"resolutoin": 64}"#).unwrap();
    let o = f.run("a", &["refs"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("resolutoin"), "{}", stderr(&o));
}

#[test]
fn missing_target_is_a_config_error() {
    let f = Fixture::new();
    assert_eq!(f.run("a", &["refs"]).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_lampshade"))
        .arg("density")
        .arg("--config")
        .arg(f.path("config.json"))
        .arg("--out")
        .arg(f.path("a"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("no target image"), "{}", stderr(&o));
}
