#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

use pcaot::sections::{load_manifest, StateManifest};

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn samples() -> PathBuf {
    crate_dir().join("samples")
}

pub fn gcc_available() -> bool {
    Command::new("gcc").arg("--version").output().is_ok_and(|o| o.status.success())
}

pub fn manifest(json: &str) -> StateManifest {
    load_manifest(json).expect("test manifest")
}

/// Reads `/* expect: A;B */` from the first line of a fixture.
pub fn expected_labels(text: &str) -> String {
    let first = text.lines().next().unwrap_or_default();
    first.trim().trim_start_matches("/*").trim_end_matches("*/").trim().trim_start_matches("expect:").trim().to_string()
}
