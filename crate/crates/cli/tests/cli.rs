//! End-to-end tests of the `atoll` binary: the shell lifecycle, batch
//! commands, output formats, exit codes and seed determinism.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn atoll() -> Command {
    Command::new(env!("CARGO_BIN_EXE_atoll"))
}

fn write_fixtures(dir: &Path) {
    std::fs::write(
        dir.join("a.csv"),
        "d0:int64,d1:int64,val:float64\n0,0,1.0\n0,1,2.0\n1,0,3.0\n1,1,4.0\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("b.arr"),
        "{\"name\":\"B\",\"dims\":[{\"name\":\"d0\",\"length\":2},{\"name\":\"d1\",\"length\":2}]}\n\
         5.0,6.0,7.0,8.0\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("notes.jsonl"),
        "{\"key\":\"n1\",\"fields\":{\"text\":\"stable overnight\"}}\n\
         {\"key\":\"n2\",\"fields\":{\"text\":\"pain stable\"}}\n",
    )
    .unwrap();
}

fn run_shell(dir: &Path, script: &str) -> Output {
    let mut child = atoll()
        .arg("shell")
        .current_dir(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(script.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn shell_runs_the_flagship_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path());
    let out = run_shell(
        dir.path(),
        "load rel-csv a.csv A\n\
         load array b.arr\n\
         load kv-jsonl notes.jsonl notes\n\
         training ARRAY(multiply(RELATIONAL(select * from A),B))\n\
         query ARRAY(multiply(RELATIONAL(select * from A),B))\n\
         query TEXT(termcount(notes, '', 'text'))\n\
         idle\n\
         monitor\n\
         quit\n",
    );
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("4 rows into A"), "{stdout}");
    assert!(stdout.contains("4 cells into B"), "{stdout}");
    assert!(stdout.contains("2 documents into notes"), "{stdout}");
    assert!(stdout.contains("training report"), "{stdout}");
    assert!(stdout.contains("monitor hit"), "{stdout}");
    // A·B for the fixture
    assert!(stdout.contains("19.0") && stdout.contains("50.0"), "{stdout}");
    // termcount saw both notes
    assert!(stdout.contains("stable"), "{stdout}");
}

#[test]
fn error_goes_to_stderr_with_prefix_and_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = atoll()
        .args(["query", "BOGUS(select 1)"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error:"), "{stderr}");
    assert!(stderr.contains("BOGUS"), "{stderr}");
}

#[test]
fn malformed_csv_header_names_line_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "a=int64\n1\n").unwrap();
    let out = atoll()
        .args(["load", "rel-csv", "bad.csv", "T"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line 1"), "{stderr}");
}

#[test]
fn batch_query_with_preloads_and_training_flag() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path());
    let out = atoll()
        .args([
            "query",
            "--training",
            "--load",
            "rel-csv:a.csv:A",
            "--load",
            "array:b.arr",
            "ARRAY(multiply(RELATIONAL(select * from A),B))",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("training report"), "{stdout}");
}

#[test]
fn monitor_store_persists_between_invocations() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path());
    let store = dir.path().join("monitor.jsonl");
    let store_arg = store.to_str().unwrap();

    let out = atoll()
        .args([
            "--monitor-store",
            store_arg,
            "query",
            "--training",
            "--load",
            "rel-csv:a.csv:A",
            "--load",
            "array:b.arr",
            "ARRAY(multiply(RELATIONAL(select * from A),B))",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(store.exists());

    let out = atoll()
        .args(["--monitor-store", store_arg, "monitor-dump"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("c0=relational;host=array"), "{stdout}");
    assert!(stdout.contains("c0=relational;host=relational"), "{stdout}");
}

#[test]
fn bench_csv_follows_the_fixed_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = atoll()
        .args([
            "--format",
            "csv",
            "bench",
            "micro",
            "--sizes",
            "1000,10000",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("suite,case,engine_or_mode,size,elapsed_ms"));
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5, "{line}");
        assert_eq!(fields[0], "micro");
        assert!(fields[1] == "count" || fields[1] == "distinct");
        assert!(fields[4].parse::<f64>().is_ok(), "{line}");
    }
}

/// Strips every key ending in `_ms` (timing is excluded from the
/// determinism guarantee) and compares the rest.
fn strip_timing(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.retain(|k, _| !k.ends_with("_ms"));
            for (_, child) in map.iter_mut() {
                strip_timing(child);
            }
        }
        serde_json::Value::Array(items) => {
            for item in items {
                strip_timing(item);
            }
        }
        _ => (),
    }
}

#[test]
fn equal_seeds_give_identical_json_reports_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let run = || -> serde_json::Value {
        let out = atoll()
            .args([
                "--seed",
                "21",
                "--format",
                "json",
                "bench",
                "medical",
                "--patients",
                "12",
                "--length",
                "64",
            ])
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let mut a = run();
    let mut b = run();
    strip_timing(&mut a);
    strip_timing(&mut b);
    assert_eq!(a, b);
    assert_eq!(a["labels_identical"], serde_json::Value::Bool(true));
}

#[test]
fn production_miss_choice_is_seed_deterministic_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path());
    let run = |seed: &str| -> serde_json::Value {
        let out = atoll()
            .args([
                "--seed",
                seed,
                "--format",
                "json",
                "query",
                "--load",
                "rel-csv:a.csv:A",
                "--load",
                "array:b.arr",
                "ARRAY(multiply(RELATIONAL(select * from A),B))",
            ])
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let mut a = run("5");
    let mut b = run("5");
    strip_timing(&mut a);
    strip_timing(&mut b);
    assert_eq!(a, b);
    assert_eq!(a["source"], serde_json::Value::String("random-miss".into()));
    assert_eq!(a["queued"], serde_json::Value::Number(1.into()));
}
