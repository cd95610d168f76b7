//! Aggregates a records file into metrics and charts.
//!
//! cargo run --example report <records.jsonl> [outdir]

use std::collections::BTreeMap;
use std::path::PathBuf;

use pcaot::campaign::{aggregate, emit_reports, read_records};

fn main() {
    let mut args = std::env::args().skip(1);
    let Some(records_path) = args.next().map(PathBuf::from) else {
        eprintln!("usage: report <records.jsonl> [outdir]");
        std::process::exit(2);
    };
    let out =
        args.next().map(PathBuf::from).unwrap_or_else(|| records_path.parent().unwrap_or(".".as_ref()).to_path_buf());
    let records = read_records(&records_path).expect("readable records");
    let metrics = aggregate(&records, &[10, 20, 40, 80], &BTreeMap::new());
    println!("{} attempts, {} passes", metrics.attempts, metrics.passes);
    for b in &metrics.failure_rate_by_bucket {
        println!("  {:>6} lines: {:.1}% failed of {}", b.bucket, b.rate * 100.0, b.attempts);
    }
    for (tool, s) in &metrics.max_mean_speedup {
        println!("  {tool}: best mean speedup {s:.2}x");
    }
    for path in emit_reports(&metrics, &records, &out).expect("reports") {
        println!("wrote {}", path.display());
    }
}
