use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::records::OutcomeRecord;
use crate::backends::PromptStrategy;
use crate::outcome::ValidationStatus;
use crate::pattern::OutcomeCategory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRate {
    pub bucket: String,
    pub lower: usize,
    /// Inclusive; absent for the open-ended last bucket.
    pub upper: Option<usize>,
    pub failures: usize,
    pub attempts: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRates {
    pub pattern: String,
    pub tool: String,
    pub strategy: Option<PromptStrategy>,
    pub attempts: usize,
    pub counts: BTreeMap<OutcomeCategory, usize>,
    pub rates: BTreeMap<OutcomeCategory, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub tool: String,
    pub strategy: Option<PromptStrategy>,
    pub passing: usize,
    pub mean_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandBaseline {
    pub section_id: String,
    pub serial_ns: u64,
    pub hand_ns: u64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Metrics {
    pub attempts: usize,
    pub passes: usize,
    /// LLM-origin attempts only, ascending by bucket.
    pub failure_rate_by_bucket: Vec<BucketRate>,
    pub category_rates: Vec<CategoryRates>,
    /// Mean speedup over passing records per (tool, strategy).
    pub speedup_table: Vec<SpeedupRow>,
    /// Per tool, the best of its per-strategy means.
    pub max_mean_speedup: BTreeMap<String, f64>,
    /// Passes over all candidate attempts; absent without records.
    pub overall_success_rate: Option<f64>,
    pub hand_optimized: Vec<HandBaseline>,
}

/// `(label, lower, upper)` for each bucket; `bounds` are inclusive upper
/// limits and an open bucket follows the last.
pub fn bucket_bounds(bounds: &[usize]) -> Vec<(String, usize, Option<usize>)> {
    let mut out = Vec::with_capacity(bounds.len() + 1);
    let mut lower = 0;
    for &b in bounds {
        out.push((format!("{lower}-{b}"), lower, Some(b)));
        lower = b + 1;
    }
    out.push((format!("{lower}+"), lower, None));
    out
}

fn bucket_of(lines: usize, bounds: &[usize]) -> usize {
    bounds.iter().position(|&b| lines <= b).unwrap_or(bounds.len())
}

fn mean_sorted(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Aggregates records into metrics. The result does not depend on record
/// order.
pub fn aggregate(
    records: &[OutcomeRecord],
    size_buckets: &[usize],
    hand_optimized_ns: &BTreeMap<String, u64>,
) -> Metrics {
    let attempts = records.len();
    let passes = records.iter().filter(|r| r.status == ValidationStatus::Pass).count();

    let labels = bucket_bounds(size_buckets);
    let mut buckets = vec![(0usize, 0usize); labels.len()];
    for r in records.iter().filter(|r| r.is_llm()) {
        let b = &mut buckets[bucket_of(r.lines, size_buckets)];
        b.1 += 1;
        if r.status != ValidationStatus::Pass {
            b.0 += 1;
        }
    }
    let failure_rate_by_bucket = labels
        .into_iter()
        .zip(buckets)
        .filter(|(_, (_, n))| *n > 0)
        .map(|((bucket, lower, upper), (failures, attempts))| BucketRate {
            bucket,
            lower,
            upper,
            failures,
            attempts,
            rate: failures as f64 / attempts as f64,
        })
        .collect();

    let mut hist: BTreeMap<(String, String, Option<PromptStrategy>), BTreeMap<OutcomeCategory, usize>> =
        BTreeMap::new();
    for r in records {
        let key = (r.pattern_key.clone(), r.origin.tool_id.clone(), r.origin.strategy);
        *hist.entry(key).or_default().entry(r.category).or_default() += 1;
    }
    let category_rates = hist
        .into_iter()
        .map(|((pattern, tool, strategy), counts)| {
            let attempts: usize = counts.values().sum();
            let rates = counts.iter().map(|(c, n)| (*c, *n as f64 / attempts as f64)).collect();
            CategoryRates { pattern, tool, strategy, attempts, counts, rates }
        })
        .collect();

    let mut speeds: BTreeMap<(String, Option<PromptStrategy>), Vec<f64>> = BTreeMap::new();
    for r in records {
        if let (ValidationStatus::Pass, Some(s)) = (r.status, r.speedup) {
            speeds.entry((r.origin.tool_id.clone(), r.origin.strategy)).or_default().push(s);
        }
    }
    let speedup_table: Vec<SpeedupRow> = speeds
        .into_iter()
        .map(|((tool, strategy), xs)| SpeedupRow { tool, strategy, passing: xs.len(), mean_speedup: mean_sorted(xs) })
        .collect();
    let mut max_mean_speedup: BTreeMap<String, f64> = BTreeMap::new();
    for row in &speedup_table {
        let best = max_mean_speedup.entry(row.tool.clone()).or_insert(row.mean_speedup);
        *best = best.max(row.mean_speedup);
    }

    let mut serial: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records {
        if let Some(ns) = r.serial_time_ns {
            // Every record of a section carries the same baseline; take the
            // smallest so the choice is order-independent anyway.
            let e = serial.entry(&r.section_id).or_insert(ns);
            *e = (*e).min(ns);
        }
    }
    let hand_optimized = hand_optimized_ns
        .iter()
        .filter_map(|(id, &hand_ns)| {
            serial.get(id.as_str()).map(|&serial_ns| HandBaseline {
                section_id: id.clone(),
                serial_ns,
                hand_ns,
                speedup: serial_ns as f64 / hand_ns.max(1) as f64,
            })
        })
        .collect();

    Metrics {
        attempts,
        passes,
        failure_rate_by_bucket,
        category_rates,
        speedup_table,
        max_mean_speedup,
        overall_success_rate: (attempts > 0).then(|| passes as f64 / attempts as f64),
        hand_optimized,
    }
}
