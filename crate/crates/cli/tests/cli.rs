use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn magloc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magloc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MAGLOC_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SMALL: &str = "[phantom]\nresolution = 0.03\n[simulation]\nruns_per_point = 3\nseed = 11\n";

#[test]
fn phantom_writes_voxels() {
    let tmp = TempDir::new().unwrap();
    let out = magloc(
        &["phantom", "--resolution", "0.02", "--out", "ph.txt"],
        tmp.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("9193 voxels"), "{stdout}");
    let text = std::fs::read_to_string(tmp.path().join("ph.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 9193);
}

#[test]
fn phantom_without_out_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(magloc(&["phantom"], tmp.path()).status.code(), Some(2));
    assert_eq!(
        magloc(&["phantom", "--out", "a", "--bogus"], tmp.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn validate_default_cage_passes() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", SMALL);
    let out = magloc(&["validate", "--config", "c.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("max field = ") && stdout.contains(" uT"),
        "{stdout}"
    );
}

#[test]
fn malformed_config_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "bad.toml", "[wires]\narrangement = \"W7\"\n");
    assert_eq!(
        magloc(&["validate", "--config", "bad.toml"], tmp.path())
            .status
            .code(),
        Some(2)
    );
    write(tmp.path(), "bad2.toml", "[magnetometer\n");
    assert_eq!(
        magloc(&["run", "--config", "bad2.toml", "--out", "o"], tmp.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        magloc(&["validate", "--config", "missing.toml"], tmp.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn wire_through_phantom_fails_validation() {
    let tmp = TempDir::new().unwrap();
    let body = magloc::body::generate_phantom(1.75, 0.03).unwrap();
    let v = body.voxels()[body.len() / 2];
    let wires = format!(
        "[[wire]]\naxis = \"X\"\noffset_a = {y}\noffset_b = {z}\ncurrent = 100.0\n\
         [[wire]]\naxis = \"Y\"\noffset_a = {x}\noffset_b = {z}\ncurrent = 100.0\n\
         [[wire]]\naxis = \"Z\"\noffset_a = {x}\noffset_b = {y}\ncurrent = 100.0\n",
        x = v.x,
        y = v.y,
        z = v.z
    );
    write(tmp.path(), "w.toml", &wires);
    write(
        tmp.path(),
        "c.toml",
        "[wires]\nfile = \"w.toml\"\n[phantom]\nresolution = 0.03\n",
    );
    let out = magloc(&["validate", "--config", "c.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(
        magloc(&["run", "--config", "c.toml", "--out", "o"], tmp.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn run_is_deterministic_across_repeats_and_threads() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", SMALL);
    for (dir, threads) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let out = magloc(
            &[
                "run",
                "--config",
                "c.toml",
                "--out",
                dir,
                "--threads",
                threads,
            ],
            tmp.path(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("points.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_eq!(read("a"), read("c"));

    let out = magloc(
        &["run", "--config", "c.toml", "--out", "d", "--seed", "12"],
        tmp.path(),
    );
    assert!(out.status.success());
    assert_ne!(read("a"), read("d"));
}

#[test]
fn run_writes_summary_and_manifest() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", SMALL);
    let out = magloc(
        &[
            "run",
            "--config",
            "c.toml",
            "--out",
            "o",
            "--arrangement",
            "W15",
            "--current",
            "10",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let summary = std::fs::read_to_string(tmp.path().join("o/summary.txt")).unwrap();
    assert!(summary.contains("Median position error = "));
    let manifest = std::fs::read_to_string(tmp.path().join("o/manifest.txt")).unwrap();
    assert!(manifest.contains("arrangement = \"W15\""));
    assert!(manifest.contains("current = 10.0"));
    assert!(manifest.contains("runs_per_point = 3"));
    assert_eq!(manifest.matches("[[wire]]").count(), 15);
}

#[test]
fn threads_come_from_environment() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_magloc"))
        .args(["run", "--config", "c.toml", "--out", "o"])
        .current_dir(tmp.path())
        .env("MAGLOC_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest = std::fs::read_to_string(tmp.path().join("o/manifest.txt")).unwrap();
    assert!(manifest.contains("threads = 2"));
}

#[test]
fn report_writes_grids() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", SMALL);
    assert!(
        magloc(&["run", "--config", "c.toml", "--out", "o"], tmp.path())
            .status
            .success()
    );

    let out = magloc(
        &[
            "report",
            "--in",
            "o",
            "--projection",
            "xz",
            "--out",
            "xz.csv",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let grid = std::fs::read_to_string(tmp.path().join("xz.csv")).unwrap();
    assert!(grid.starts_with("z\\x,"));
    let rows: Vec<&str> = grid.lines().collect();
    let width = rows[0].split(',').count();
    assert!(rows.iter().all(|r| r.split(',').count() == width));

    let out = magloc(&["report", "--in", "o", "--slice", "z=1.0"], tmp.path());
    assert!(out.status.success());
    assert!(tmp.path().join("o/map_slice_z_1.0.csv").exists());

    assert_eq!(
        magloc(&["report", "--in", "o", "--slice", "z=5.0"], tmp.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        magloc(&["report", "--in", "o", "--slice", "q=1"], tmp.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        magloc(&["report", "--in", "o"], tmp.path()).status.code(),
        Some(2)
    );
}
