use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn coupling(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coupling"))
        .args(args)
        .current_dir(dir)
        .env_remove("COUPLING_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn staircase(n: usize) -> String {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if j < n - i { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(" ")
                + "\n"
        })
        .collect()
}

/// A noisy nested pattern, deterministic.
fn noisy(n: usize) -> String {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let inside = j + i < n;
                    let flip = (i * 7 + j * 13) % 11 == 0;
                    if inside ^ flip {
                        "1"
                    } else {
                        "0"
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
                + "\n"
        })
        .collect()
}

#[test]
fn count_of_permutation_matrices() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.txt"), "1 0 0\n0 1 0\n0 0 1\n").unwrap();
    let o = coupling(&["count", "p.txt", "--format", "csv"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().nth(1).unwrap().split(',').next(), Some("6"));
    let v = json(&coupling(&["count", "--rows", "1,1,1", "--cols", "1,1,1"], dir.path()));
    assert_eq!(v["count"], "6");
}

#[test]
fn indices_of_a_staircase() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.txt"), staircase(9)).unwrap();
    let v = json(&coupling(&["indices", "s.txt", "--no-timestamp"], dir.path()));
    assert_eq!(v["n_plus"], 0);
    assert_eq!(v["temperature"].as_f64(), Some(0.0));
    assert_eq!(v["nodf"].as_f64(), Some(100.0));
    assert!(v["ncg"].as_f64().unwrap() < 0.0);
    assert!(v.get("created_unix").is_none());
    let v = json(&coupling(&["indices", "s.txt"], dir.path()));
    assert!(v["created_unix"].is_u64());
}

#[test]
fn malformed_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("nonbinary.txt", "1 0\n0 2\n"),
        ("ragged.txt", "1 0 1\n0 1\n"),
        ("empty.txt", "\n"),
        ("dupcol.csv", ",a,a\nx,1,0\n"),
        ("duprow.csv", ",a,b\nx,1,0\nx,0,1\n"),
        ("badcell.csv", ",a,b\nx,1,yes\n"),
    ];
    for (name, text) in cases {
        fs::write(dir.path().join(name), text).unwrap();
        let o = coupling(&["energy", name], dir.path());
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("line"), "{name}");
    }
    assert_eq!(coupling(&["energy", "missing.txt"], dir.path()).status.code(), Some(1));
    assert_eq!(coupling(&["count", "--rows", "3", "--cols", "1,1"], dir.path()).status.code(), Some(0));
    // a corrupted geometry file
    fs::write(dir.path().join("g.json"), "{\"schema_version\": 1").unwrap();
    assert_eq!(coupling(&["entropy", "g.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.txt"), "1 0\n0 1\n").unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["energy", "p.txt", "--bogus"],
        vec!["energy"],
        vec!["count", "--rows", "1,1"],
        vec!["sample", "p.txt", "--grid", "finest"],
        vec!["energy", "p.txt", "--format", "xml"],
    ] {
        let o = coupling(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    assert_eq!(coupling(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn runs_are_byte_identical_without_timestamps() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.txt"), noisy(12)).unwrap();
    let run = |out: &str| {
        let o = coupling(
            &["geometry", "m.txt", "--seed", "3", "--anneal-steps", "2000", "--no-timestamp", "--out", out],
            dir.path(),
        );
        assert!(o.status.success());
        let g = format!("{out}/geometry.json");
        let o = coupling(
            &["test", &g, "--statistic", "n_plus", "-n", "100", "--seed", "5", "--no-timestamp", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read(dir.path().join(&g)).unwrap(),
            fs::read(dir.path().join(out).join("test_n_plus.json")).unwrap(),
            o.stdout,
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn profile_csvs_feed_back_into_summary() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.txt"), noisy(10)).unwrap();
    let o = coupling(&["geometry", "m.txt", "--anneal-steps", "1000", "--out", "o"], dir.path());
    assert!(o.status.success());
    let v = json(&coupling(
        &["profile", "o/geometry.json", "--statistic", "nodf", "-n", "40", "--out", "o", "--no-timestamp"],
        dir.path(),
    ));
    let written: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/profile_nodf.json")).unwrap()).unwrap();
    assert_eq!(v, written);
    let entries = v["profile"].as_array().unwrap();
    assert!(!entries.is_empty());
    for e in entries {
        let file = format!("o/{}", e["values_file"].as_str().unwrap());
        let s = json(&coupling(&["summary", &file, "--name", "nodf"], dir.path()));
        assert_eq!(s["summary"], e["summary"]);
    }
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.txt"), noisy(8)).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_coupling"))
        .args(["geometry", "m.txt", "--anneal-steps", "500"])
        .current_dir(dir.path())
        .env("COUPLING_OUT_DIR", "envout")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("envout/geometry.json").exists());
}

#[test]
fn samples_keep_margins() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.txt"), noisy(8)).unwrap();
    let o = coupling(
        &["sample", "m.txt", "-n", "3", "--sampler", "curveball", "--burn-in", "50", "--out", "s"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sums = |text: &str| -> Vec<usize> { text.lines().map(|l| l.matches('1').count()).collect() };
    let original = fs::read_to_string(dir.path().join("m.txt")).unwrap();
    let files: Vec<_> = fs::read_dir(dir.path().join("s")).unwrap().collect();
    assert_eq!(files.len(), 3);
    for f in files {
        let text = fs::read_to_string(f.unwrap().path()).unwrap();
        assert_eq!(sums(&text), sums(&original));
    }
}
