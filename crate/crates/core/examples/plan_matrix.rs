//! Shows how many versions and runs a campaign configuration expands to.
//!
//! cargo run --example plan_matrix [campaign.json]

use std::path::PathBuf;

use pcaot::campaign::{plan, CampaignConfig, Task};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("samples/campaign.json"));
    let config = CampaignConfig::load(&path).expect("valid config");
    let p = plan(&config).expect("plannable config");
    println!("sections:             {}", p.sections);
    println!("versions per section: {}", p.versions_per_section);
    println!("LLM attempts:         {}", p.llm_attempts);
    println!("compiler runs:        {}", p.compiler_runs);
    let candidates = p.tasks.iter().filter(|t| matches!(t, Task::Candidate { .. })).count();
    println!("tasks:                {} ({candidates} candidates)", p.tasks.len());
    for (origin, kind) in p.candidates(0) {
        println!("  {kind:?} {origin}");
    }
}
