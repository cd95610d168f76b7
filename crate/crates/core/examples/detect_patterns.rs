//! Runs the OpenMP pattern detector over the fixture corpus, or over the
//! files given on the command line.
//!
//! cargo run --example detect_patterns [file.c ...]

use std::path::PathBuf;

use pcaot::pattern::{analyze, format_labels};

fn main() {
    let mut files: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if files.is_empty() {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/patterns");
        files = std::fs::read_dir(dir).expect("fixtures").map(|e| e.expect("entry").path()).collect();
        files.sort();
    }
    for f in files {
        let code = std::fs::read_to_string(&f).expect("readable file");
        let d = analyze(&code);
        let labels = if d.labels.is_empty() { "-".to_string() } else { format_labels(&d.labels) };
        println!("{:<28} {:<8} {} directive(s)", f.file_stem().unwrap().to_string_lossy(), labels, d.directive_count);
    }
}
