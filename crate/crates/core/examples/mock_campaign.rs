//! Runs the sample campaign end to end with table-driven backends and
//! writes records, metrics and charts. Needs gcc.
//!
//! cargo run --example mock_campaign [outdir]

use std::path::{Path, PathBuf};

use pcaot::campaign::{aggregate, emit_reports, execute, plan, CampaignConfig};

fn main() {
    let config =
        CampaignConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("samples/campaign.json")).expect("config");
    let out =
        std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("pcaot-mock-campaign"));
    let run = execute(&plan(&config).expect("plan"), &config, &out).expect("campaign");
    for f in &run.failures {
        println!("section {} failed at {}: {}", f.section, f.stage, f.message);
    }
    for r in &run.records {
        let speedup = r.speedup.map(|s| format!("{s:.2}x")).unwrap_or_else(|| "-".into());
        println!(
            "{:<12} {:<24} {:<16} {:<22} {speedup}",
            r.section_id,
            r.origin.to_string(),
            r.status.to_string(),
            r.category.to_string()
        );
    }
    let metrics = aggregate(&run.records, &config.size_buckets, &config.hand_optimized_ns);
    for path in emit_reports(&metrics, &run.records, &out).expect("reports") {
        println!("wrote {}", path.display());
    }
}
