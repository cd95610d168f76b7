mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pcaot::campaign::{read_records, RECORDS_FILE};

fn pcaot(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcaot")).args(args).current_dir(cwd).env("RUST_LOG", "warn").output().unwrap()
}

fn config() -> String {
    common::samples().join("campaign.json").to_string_lossy().into_owned()
}

const REPORTS: [&str; 6] =
    ["records.jsonl", "records.csv", "metrics.json", "failure_by_size.svg", "pattern_categories.svg", "speedups.svg"];

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcaot(&["run", "--config", &config(), "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(pcaot(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(pcaot(&["run", "--api-key", "x", "--config", &config()], dir.path()).status.code(), Some(2));
    assert_eq!(pcaot(&["capture", "--out", "o"], dir.path()).status.code(), Some(2), "no inputs");
    assert_eq!(pcaot(&["run", "--config", "missing.json", "--out", "o"], dir.path()).status.code(), Some(2));
    assert_eq!(
        pcaot(&["run", "--config", &config(), "--section", "nope", "--dry-run"], dir.path()).status.code(),
        Some(2)
    );
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none(), "nothing written");
}

#[test]
fn dry_run_prints_the_plan() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcaot(&["run", "--config", &config(), "--dry-run"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["sections"], 3);
    assert_eq!(v["versions_per_section"], 5);
    assert_eq!(v["llm_attempts"], 9);
}

#[test]
fn prepare_lists_sections() {
    let dir = tempfile::tempdir().unwrap();
    let src = common::samples().join("smooth.c");
    let o = pcaot(&["prepare", "--src", &src.to_string_lossy()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["id"], "smooth");
    assert_eq!(v[0]["line_count"], 6);
}

#[test]
fn run_then_report_is_reproducible() {
    if !common::gcc_available() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let o = pcaot(&["run", "--config", &config(), "--out", "results", "--json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout_metrics: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout_metrics["passes"], 12);
    let out = dir.path().join("results");
    for f in REPORTS {
        assert!(out.join(f).exists(), "{f}");
    }
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("results")], "only the output directory is written");

    let snapshot = |d: &Path| -> Vec<Vec<u8>> { REPORTS[1..].iter().map(|f| fs::read(d.join(f)).unwrap()).collect() };
    let before = snapshot(&out);
    let records = out.join(RECORDS_FILE);
    let args = ["report", "--records", records.to_str().unwrap(), "--config", &config()];
    assert_eq!(pcaot(&args, dir.path()).status.code(), Some(0));
    let first = snapshot(&out);
    assert_eq!(pcaot(&args, dir.path()).status.code(), Some(0));
    assert_eq!(first, snapshot(&out));
    assert_eq!(first, before, "report reproduces what run wrote");
}

#[test]
fn staged_commands_match_run() {
    if !common::gcc_available() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = config();
    for stage in ["prepare", "capture", "optimize", "validate"] {
        let o = pcaot(&[stage, "--config", &cfg, "--out", "staged"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(pcaot(&["report", "--out", "staged", "--config", &cfg], dir.path()).status.code(), Some(0));
    assert_eq!(pcaot(&["run", "--config", &cfg, "--out", "oneshot"], dir.path()).status.code(), Some(0));

    let key = |d: &str| -> BTreeSet<String> {
        read_records(&dir.path().join(d).join(RECORDS_FILE))
            .unwrap()
            .iter()
            .map(|r| format!("{} {} {} {} {:?}", r.section_id, r.origin, r.status, r.category, r.detected))
            .collect()
    };
    assert_eq!(key("staged"), key("oneshot"));
    for f in REPORTS {
        assert!(dir.path().join("staged").join(f).exists(), "{f}");
    }
}

#[test]
fn failures_exit_1() {
    if !common::gcc_available() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.c"), "int x;\nint main(void)\n{\n#pragma experimental section start id=p\n    x = 7;\n#pragma experimental section stop\n    return 0;\n}\n").unwrap();
    fs::write(
        dir.path().join("p.json"),
        r#"{"section_id":"p","parallelizable":false,"non_parallel_reason":"FC","variables":[{"name":"x","elem_type":"i32","extents":[],"direction":"out"}]}"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"sections":[{"source":"p.c","manifest":"p.json"}],
            "llm_backends":[{"kind":"mock","tool_id":"m","rules":[{"action":{"code":"x = 8;"}}]}],
            "strategies":["IP"],"attempts":1}"#,
    )
    .unwrap();
    let o = pcaot(&["run", "--config", "c.json", "--out", "r", "--threads", "2", "--tolerance-rel", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let records = read_records(&dir.path().join("r").join(RECORDS_FILE)).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].status, pcaot::ValidationStatus::NumericMismatch);
}
