use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::metrics::Metrics;
use super::records::OutcomeRecord;
use super::CampaignError;
use crate::pattern::{format_labels, OutcomeCategory};

pub const CSV_FILE: &str = "records.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const FAILURE_SVG: &str = "failure_by_size.svg";
pub const CATEGORY_SVG: &str = "pattern_categories.svg";
pub const SPEEDUP_SVG: &str = "speedups.svg";

pub const CSV_COLUMNS: [&str; 10] = [
    "section_id",
    "tool",
    "strategy",
    "attempt",
    "status",
    "category",
    "detected_patterns",
    "lines",
    "median_time_ns",
    "speedup",
];

/// One row per record, in record order.
pub fn records_csv(records: &[OutcomeRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory csv");
    for r in records {
        w.write_record([
            r.section_id.clone(),
            r.origin.tool_id.clone(),
            r.origin.strategy.map(|s| s.to_string()).unwrap_or_default(),
            r.origin.attempt.map(|a| a.to_string()).unwrap_or_default(),
            r.status.to_string(),
            r.category.to_string(),
            format_labels(&r.detected),
            r.lines.to_string(),
            r.median_time_ns.map(|n| n.to_string()).unwrap_or_default(),
            r.speedup.map(|s| format!("{s:.4}")).unwrap_or_default(),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 fields")
}

pub fn metrics_json(metrics: &Metrics) -> String {
    let mut s = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    s.push('\n');
    s
}

fn esc(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const WIDTH: f64 = 720.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 50.0;

fn svg_open(height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{height}" fill="white"/>"#);
    let _ =
        writeln!(s, r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#, WIDTH / 2.0, esc(title));
    s
}

fn empty_note(s: &mut String, y: f64) {
    let _ = writeln!(s, r##"<text x="{}" y="{y}" text-anchor="middle" fill="#666">no data</text>"##, WIDTH / 2.0);
}

/// Vertical bars, one per bucket, height = failure rate.
pub fn failure_by_size_svg(metrics: &Metrics) -> String {
    let plot_h = 260.0;
    let height = TOP + plot_h + 60.0;
    let mut s = svg_open(height, "LLM failure rate by section size (lines)");
    let base = TOP + plot_h;
    let plot_w = WIDTH - LEFT - 30.0;
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = base - v * plot_h;
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, LEFT + plot_w);
        let _ =
            writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.0}%</text>"#, LEFT - 6.0, y + 4.0, v * 100.0);
    }
    let rows = &metrics.failure_rate_by_bucket;
    if rows.is_empty() {
        empty_note(&mut s, TOP + plot_h / 2.0);
    }
    let slot = plot_w / rows.len().max(1) as f64;
    for (i, b) in rows.iter().enumerate() {
        let h = b.rate * plot_h;
        let x = LEFT + i as f64 * slot + slot * 0.2;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#c0504d"><title>{} of {}</title></rect>"##,
            base - h,
            slot * 0.6,
            b.failures,
            b.attempts
        );
        let cx = x + slot * 0.3;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{:.1}%</text>"#,
            base - h - 5.0,
            b.rate * 100.0
        );
        let _ =
            writeln!(s, r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, base + 18.0, esc(&b.bucket));
        let _ = writeln!(
            s,
            r##"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" fill="#666">n={}</text>"##,
            base + 34.0,
            b.attempts
        );
    }
    let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{base}" x2="{:.1}" y2="{base}" stroke="#000"/>"##, LEFT + plot_w);
    s.push_str("</svg>\n");
    s
}

fn category_color(c: OutcomeCategory) -> &'static str {
    match c {
        OutcomeCategory::ExpectedApplied => "#4f81bd",
        OutcomeCategory::UnexpectedCorrect => "#9bbb59",
        OutcomeCategory::Error => "#c0504d",
        OutcomeCategory::CorrectlyRefused => "#8064a2",
        OutcomeCategory::IncorrectlyParallelized => "#f79646",
    }
}

/// One stacked horizontal bar per (pattern, tool, strategy).
pub fn pattern_categories_svg(metrics: &Metrics) -> String {
    let rows = &metrics.category_rates;
    let row_h = 22.0;
    let label_w = 220.0;
    let plot_w = WIDTH - label_w - 30.0;
    let height = TOP + rows.len().max(1) as f64 * row_h + 70.0;
    let mut s = svg_open(height, "Outcome categories per pattern and tool");
    if rows.is_empty() {
        empty_note(&mut s, TOP + 20.0);
    }
    for (i, row) in rows.iter().enumerate() {
        let y = TOP + i as f64 * row_h;
        let label = match row.strategy {
            Some(st) => format!("{} / {} / {}", row.pattern, row.tool, st),
            None => format!("{} / {}", row.pattern, row.tool),
        };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            label_w - 8.0,
            y + 15.0,
            esc(&label)
        );
        let mut x = label_w;
        for c in OutcomeCategory::ALL {
            let Some(rate) = row.rates.get(&c) else { continue };
            let w = rate * plot_w;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="{}"><title>{}: {}</title></rect>"#,
                y + 3.0,
                row_h - 6.0,
                category_color(c),
                c,
                row.counts.get(&c).copied().unwrap_or(0)
            );
            x += w;
        }
    }
    let ly = height - 30.0;
    let mut lx = 20.0;
    for c in OutcomeCategory::ALL {
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="12" fill="{}"/>"#,
            ly - 10.0,
            category_color(c)
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, lx + 16.0, c);
        lx += 16.0 + 6.5 * c.as_str().len() as f64 + 14.0;
    }
    s.push_str("</svg>\n");
    s
}

/// Mean speedup bars per tool and strategy, with hand-optimized versions
/// when available.
pub fn speedups_svg(metrics: &Metrics) -> String {
    let mut bars: Vec<(String, f64)> = metrics
        .speedup_table
        .iter()
        .map(|r| {
            let label = match r.strategy {
                Some(st) => format!("{} {}", r.tool, st),
                None => r.tool.clone(),
            };
            (label, r.mean_speedup)
        })
        .collect();
    for h in &metrics.hand_optimized {
        bars.push((format!("hand {}", h.section_id), h.speedup));
    }
    let plot_h = 260.0;
    let height = TOP + plot_h + 90.0;
    let mut s = svg_open(height, "Mean speedup of correct versions");
    let base = TOP + plot_h;
    let plot_w = WIDTH - LEFT - 30.0;
    let top_value = bars.iter().map(|b| b.1).fold(1.0f64, f64::max).ceil();
    for tick in 0..=4 {
        let v = top_value * tick as f64 / 4.0;
        let y = base - v / top_value * plot_h;
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, LEFT + plot_w);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}x</text>"#, LEFT - 6.0, y + 4.0);
    }
    let one = base - plot_h / top_value;
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{one:.1}" x2="{:.1}" y2="{one:.1}" stroke="#888" stroke-dasharray="4 3"/>"##,
        LEFT + plot_w
    );
    if bars.is_empty() {
        empty_note(&mut s, TOP + plot_h / 2.0);
    }
    let slot = plot_w / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = v / top_value * plot_h;
        let x = LEFT + i as f64 * slot + slot * 0.15;
        let fill = if label.starts_with("hand ") { "#7f7f7f" } else { "#4f81bd" };
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{fill}"/>"#,
            base - h,
            slot * 0.7
        );
        let cx = x + slot * 0.35;
        let _ = writeln!(s, r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{v:.2}</text>"#, base - h - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="end" transform="rotate(-35 {cx:.1} {:.1})">{}</text>"#,
            base + 16.0,
            base + 16.0,
            esc(label)
        );
    }
    let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{base}" x2="{:.1}" y2="{base}" stroke="#000"/>"##, LEFT + plot_w);
    s.push_str("</svg>\n");
    s
}

/// Writes the CSV, metrics JSON and three charts; returns the paths written.
pub fn emit_reports(
    metrics: &Metrics,
    records: &[OutcomeRecord],
    outdir: &Path,
) -> Result<Vec<PathBuf>, CampaignError> {
    fs::create_dir_all(outdir).map_err(|e| CampaignError::io(outdir, e))?;
    let files = [
        (CSV_FILE, records_csv(records)),
        (METRICS_FILE, metrics_json(metrics)),
        (FAILURE_SVG, failure_by_size_svg(metrics)),
        (CATEGORY_SVG, pattern_categories_svg(metrics)),
        (SPEEDUP_SVG, speedups_svg(metrics)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = outdir.join(name);
        fs::write(&path, text).map_err(|e| CampaignError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
