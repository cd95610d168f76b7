mod common;

use std::collections::BTreeMap;
use std::fs;

use pcaot::instrument::{GeneratedSource, SourceKind};
use pcaot::runner::{build, collect_timing, run, run_env, BuildError, BuildSpec, ExitStatus, OMP_THREADS_VAR};

fn source(id: &str, text: &str) -> GeneratedSource {
    GeneratedSource { kind: SourceKind::ReplayDriver, text: text.into(), section_id: id.into() }
}

macro_rules! need_gcc {
    () => {
        if !common::gcc_available() {
            eprintln!("gcc not found; skipping");
            return;
        }
    };
}

#[test]
fn builds_and_runs_with_timing_lines() {
    need_gcc!();
    let dir = tempfile::tempdir().unwrap();
    let spec = BuildSpec::default().in_dir(dir.path());
    let bin = build(
        &source(
            "ok",
            "#include <stdio.h>\n#include <stdlib.h>\nint main(void){ printf(\"PCAOT_TIME_NS 30\\nPCAOT_TIME_NS 10\\nPCAOT_TIME_NS 20\\n\"); printf(\"%s\\n\", getenv(\"OMP_NUM_THREADS\")); return 0; }\n",
        ),
        &spec,
    )
    .unwrap();
    let r = run(&bin, 10.0, &run_env(3, &BTreeMap::new())).unwrap();
    assert!(r.success(), "{r:?}");
    assert!(!r.timed_out);
    assert!(r.stdout.lines().any(|l| l == "3"), "{OMP_THREADS_VAR} passed through");
    let t = collect_timing(&r).unwrap();
    assert_eq!(t.samples_ns, vec![30, 10, 20]);
    assert_eq!(t.median_ns, 20);
}

#[test]
fn syntax_error_is_compile_failure() {
    need_gcc!();
    let dir = tempfile::tempdir().unwrap();
    let err =
        build(&source("bad", "int main(void) { return 0 }\n"), &BuildSpec::default().in_dir(dir.path())).unwrap_err();
    match err {
        BuildError::CompileFailure { stderr, code } => {
            assert!(code.is_some_and(|c| c != 0));
            assert!(stderr.contains("error"), "{stderr}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_compiler_is_tool_missing() {
    let dir = tempfile::tempdir().unwrap();
    let spec =
        BuildSpec { compiler_cmd: "pcaot-no-such-cc {src} -o {out}".into(), flags: vec![], workdir: dir.path().into() };
    assert!(matches!(build(&source("x", "int main(void){return 0;}"), &spec), Err(BuildError::ToolMissing(_))));
}

#[test]
fn infinite_loop_times_out() {
    need_gcc!();
    let dir = tempfile::tempdir().unwrap();
    let bin = build(
        &source("spin", "int main(void){ volatile int x = 1; while (x) {} return 0; }\n"),
        &BuildSpec::default().in_dir(dir.path()),
    )
    .unwrap();
    let started = std::time::Instant::now();
    let r = run(&bin, 0.5, &BTreeMap::new()).unwrap();
    assert!(r.timed_out);
    assert_eq!(r.exit_code, None);
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn abort_reports_signal_and_exit_codes_pass_through() {
    need_gcc!();
    let dir = tempfile::tempdir().unwrap();
    let spec = BuildSpec::default().in_dir(dir.path());
    let bin = build(&source("abrt", "#include <stdlib.h>\nint main(void){ abort(); }\n"), &spec).unwrap();
    let r = run(&bin, 10.0, &BTreeMap::new()).unwrap();
    assert_eq!(r.exit_code, Some(ExitStatus::Signal(6)));
    assert!(!r.success());
    let bin = build(&source("three", "int main(void){ return 3; }\n"), &spec).unwrap();
    assert_eq!(run(&bin, 10.0, &BTreeMap::new()).unwrap().exit_code, Some(ExitStatus::Code(3)));
}

#[test]
fn runs_in_the_binary_directory() {
    need_gcc!();
    let dir = tempfile::tempdir().unwrap();
    let bin = build(
        &source("cwd", "#include <stdio.h>\nint main(void){ FILE *f = fopen(\"marker.txt\", \"w\"); fputs(\"hi\", f); fclose(f); return 0; }\n"),
        &BuildSpec::default().in_dir(dir.path()),
    )
    .unwrap();
    assert!(run(&bin, 10.0, &BTreeMap::new()).unwrap().success());
    assert_eq!(fs::read_to_string(dir.path().join("marker.txt")).unwrap(), "hi");
}
