use std::collections::{BTreeSet, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::backends::Origin;
use crate::outcome::ValidationStatus;
use crate::pattern::{OutcomeCategory, PatternLabel};
use crate::sections::StateManifest;

pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub section_id: String,
    pub origin: Origin,
    pub status: ValidationStatus,
    pub category: OutcomeCategory,
    pub detected: BTreeSet<PatternLabel>,
    /// Line count of the original section.
    pub lines: usize,
    /// Expected pattern, non-parallel reason, or `None`.
    pub pattern_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_time_ns: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub serial_time_ns: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl OutcomeRecord {
    pub fn is_llm(&self) -> bool {
        self.origin.is_llm()
    }
}

/// Grouping key for per-pattern category histograms.
pub fn pattern_key(manifest: &StateManifest) -> String {
    if let Some(p) = manifest.expected_pattern {
        return p.as_str().to_string();
    }
    match manifest.non_parallel_reason {
        Some(r) => format!("{r:?}"),
        None => "None".to_string(),
    }
}

pub fn append_record(path: &Path, record: &OutcomeRecord) -> Result<(), CampaignError> {
    let mut line = serde_json::to_string(record).expect("records serialize");
    line.push('\n');
    // Start a fresh line if an earlier write was cut short.
    if ends_mid_line(path) {
        line.insert(0, '\n');
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| CampaignError::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| CampaignError::io(path, e))
}

fn ends_mid_line(path: &Path) -> bool {
    let Ok(mut f) = fs::File::open(path) else { return false };
    let mut last = [0u8; 1];
    f.seek(SeekFrom::End(-1)).is_ok() && f.read_exact(&mut last).is_ok() && last[0] != b'\n'
}

/// Reads a JSON-lines record file. A missing file is an empty list; a torn
/// final line (interrupted write) is ignored.
pub fn read_records(path: &Path) -> Result<Vec<OutcomeRecord>, CampaignError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CampaignError::io(path, e)),
    };
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => break,
            Err(e) => return Err(CampaignError::InvalidRecords(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

pub fn completed(records: &[OutcomeRecord]) -> HashSet<(String, Origin)> {
    records.iter().map(|r| (r.section_id.clone(), r.origin.clone())).collect()
}
