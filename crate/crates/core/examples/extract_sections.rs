//! Lists the marked sections of a C file.
//!
//! cargo run --example extract_sections [file.c]

use std::path::PathBuf;

use pcaot::sections::extract_sections_from;

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("samples/smooth.c"));
    let text = std::fs::read_to_string(&path).expect("readable source");
    match extract_sections_from(&text, &path.to_string_lossy()) {
        Ok(sections) => {
            for s in sections {
                println!("{} lines {}-{} ({} body lines)", s.id, s.start_line, s.end_line, s.line_count);
                for line in s.body_text.lines() {
                    println!("    | {line}");
                }
            }
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            std::process::exit(1);
        }
    }
}
