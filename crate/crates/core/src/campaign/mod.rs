//! Experiment matrix, pipeline orchestration, metrics and reports.
//!
//! Output layout under the campaign directory:
//!
//! ```text
//! records.jsonl                 one line per validated candidate (resume log)
//! records.csv  metrics.json  *.svg
//! sections/<id>/section.json    extracted section and manifest
//! sections/<id>/capture/        instrumented program and checkpoints
//! sections/<id>/serial/         replay of the original body
//! sections/<id>/baseline.json   serial timing
//! sections/<id>/candidates.jsonl
//! sections/<id>/candidates/<origin>/
//! ```

mod config;
mod metrics;
mod plan;
mod records;
mod report;
mod stages;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{BackendConfig, CampaignConfig, SectionEntry};
pub use metrics::{aggregate, bucket_bounds, BucketRate, CategoryRates, HandBaseline, Metrics, SpeedupRow};
pub use plan::{candidate_origins, plan, ExperimentPlan, Task};
pub use records::{append_record, pattern_key, read_records, OutcomeRecord, RECORDS_FILE};
pub use report::{
    emit_reports, failure_by_size_svg, metrics_json, pattern_categories_svg, records_csv, speedups_svg, CATEGORY_SVG,
    CSV_COLUMNS, CSV_FILE, FAILURE_SVG, METRICS_FILE, SPEEDUP_SVG,
};
pub use stages::{
    capture_section, execute, instantiate_backends, load_baseline, load_prepared, optimize_section, prepare,
    prepare_section, read_candidates, section_dir, validate_candidate, validate_section, CampaignRun, CandidateEntry,
    PreparedSection, SectionFailure, SerialBaseline,
};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("the campaign has no sections")]
    EmptyCampaign,
    #[error("invalid campaign config: {0}")]
    InvalidConfig(String),
    #[error("invalid records: {0}")]
    InvalidRecords(String),
    #[error("capture failed for `{section}`: {reason}")]
    CaptureFailure { section: String, reason: String },
    #[error("{path}: {source}")]
    IoFailure { path: PathBuf, source: std::io::Error },
}

impl CampaignError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CampaignError::IoFailure { path: path.to_path_buf(), source }
    }
}

/// Aggregates and emits every report for the records in `outdir`.
pub fn report_dir(outdir: &Path, config: Option<&CampaignConfig>) -> Result<Metrics, CampaignError> {
    let records = read_records(&outdir.join(RECORDS_FILE))?;
    let defaults = CampaignConfig::with_sections(Vec::new());
    let config = config.unwrap_or(&defaults);
    let metrics = aggregate(&records, &config.size_buckets, &config.hand_optimized_ns);
    emit_reports(&metrics, &records, outdir)?;
    Ok(metrics)
}
