use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::plan::{candidate_origins, ExperimentPlan};
use super::records::{append_record, completed, pattern_key, read_records, OutcomeRecord, RECORDS_FILE};
use super::{CampaignConfig, CampaignError};
use crate::backends::{BackendKind, OptimizationRequest, Origin, SectionContext, SharedBackend};
use crate::checkpoint::{compare, Checkpoint};
use crate::instrument::{
    generate_capture_program, generate_replay_driver_with_support, input_checkpoint_name, output_checkpoint_name,
};
use crate::outcome::ValidationStatus;
use crate::pattern::{analyze, categorize, Detection};
use crate::runner::{build, collect_timing, default_timeout_s, run, run_env, ExitStatus, RunResult};
use crate::sections::{extract_sections_from, file_stem, load_manifest, ExperimentalSection, StateManifest};

pub const SECTIONS_DIR: &str = "sections";
const SECTION_FILE: &str = "section.json";
const BASELINE_FILE: &str = "baseline.json";
const CANDIDATES_FILE: &str = "candidates.jsonl";

/// A section that could not be carried through capture; its candidates are
/// skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionFailure {
    pub section: String,
    pub stage: String,
    pub message: String,
}

impl SectionFailure {
    fn new(section: impl Into<String>, stage: &str, message: impl Into<String>) -> Self {
        Self { section: section.into(), stage: stage.to_string(), message: message.into() }
    }
}

impl From<SectionFailure> for CampaignError {
    fn from(f: SectionFailure) -> Self {
        CampaignError::CaptureFailure { section: f.section, reason: format!("{}: {}", f.stage, f.message) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedSection {
    /// Position in the campaign's section list.
    pub index: usize,
    pub section: ExperimentalSection,
    pub manifest: StateManifest,
    #[serde(default)]
    pub support_code: String,
}

impl PreparedSection {
    pub fn id(&self) -> &str {
        &self.manifest.section_id
    }

    pub fn context(&self) -> SectionContext<'_> {
        SectionContext { section: &self.section, manifest: &self.manifest, support_code: &self.support_code }
    }
}

/// Timing of the untransformed section replayed in isolation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerialBaseline {
    pub section_id: String,
    pub median_ns: u64,
    pub samples_ns: Vec<u64>,
    pub wall_time_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub origin: Origin,
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CampaignRun {
    pub records: Vec<OutcomeRecord>,
    pub failures: Vec<SectionFailure>,
}

impl CampaignRun {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.records.iter().all(|r| r.status == ValidationStatus::Pass)
    }
}

/// Per-section working directory under `out`.
pub fn section_dir(out: &Path, section_id: &str) -> PathBuf {
    out.join(SECTIONS_DIR).join(file_stem(section_id))
}

fn origin_stem(origin: &Origin) -> String {
    match (origin.strategy, origin.attempt) {
        (Some(s), Some(a)) => file_stem(&format!("{}_{}_{}", origin.tool_id, s, a)),
        _ => file_stem(&origin.tool_id),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| CampaignError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CampaignError> {
    let text = fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CampaignError::InvalidRecords(format!("{}: {e}", path.display())))
}

fn mkdir(path: &Path) -> Result<(), CampaignError> {
    fs::create_dir_all(path).map_err(|e| CampaignError::io(path, e))
}

fn describe_run(r: &RunResult) -> String {
    let status = match r.exit_code {
        Some(ExitStatus::Code(c)) => format!("exit code {c}"),
        Some(ExitStatus::Signal(s)) => format!("signal {s}"),
        None => "timed out".to_string(),
    };
    let tail: String =
        r.stderr.lines().rev().take(5).collect::<Vec<_>>().into_iter().rev().collect::<Vec<_>>().join("\n");
    if tail.is_empty() {
        status
    } else {
        format!("{status}: {tail}")
    }
}

// ---------------------------------------------------------------- prepare

/// Extracts section `index` of the campaign and writes `section.json`.
pub fn prepare_section(config: &CampaignConfig, index: usize, out: &Path) -> Result<PreparedSection, SectionFailure> {
    let entry = &config.sections[index];
    let label = entry.manifest.display().to_string();
    let fail = |m: String| SectionFailure::new(label.clone(), "prepare", m);
    let manifest_text =
        fs::read_to_string(&entry.manifest).map_err(|e| fail(format!("{}: {e}", entry.manifest.display())))?;
    let manifest = load_manifest(&manifest_text).map_err(|e| fail(e.to_string()))?;
    let source = fs::read_to_string(&entry.source).map_err(|e| fail(format!("{}: {e}", entry.source.display())))?;
    let sections = extract_sections_from(&source, &entry.source.to_string_lossy()).map_err(|e| fail(e.to_string()))?;
    let section = sections
        .into_iter()
        .find(|s| s.id == manifest.section_id)
        .ok_or_else(|| fail(format!("no section `{}` in {}", manifest.section_id, entry.source.display())))?;
    let prepared =
        PreparedSection { index, section, manifest, support_code: entry.support_code.clone().unwrap_or_default() };
    let dir = section_dir(out, prepared.id());
    mkdir(&dir).map_err(|e| fail(e.to_string()))?;
    write_json(&dir.join(SECTION_FILE), &prepared).map_err(|e| fail(e.to_string()))?;
    log::info!("prepared {} ({} lines)", prepared.id(), prepared.section.line_count);
    Ok(prepared)
}

/// Prepared sections for the whole campaign, in config order.
pub fn prepare(config: &CampaignConfig, out: &Path) -> Vec<Result<PreparedSection, SectionFailure>> {
    (0..config.sections.len()).map(|i| prepare_section(config, i, out)).collect()
}

/// Reloads what `prepare` wrote for every campaign section.
pub fn load_prepared(config: &CampaignConfig, out: &Path) -> Vec<Result<PreparedSection, SectionFailure>> {
    (0..config.sections.len())
        .map(|index| {
            let entry = &config.sections[index];
            let label = entry.manifest.display().to_string();
            let fail = |m: String| SectionFailure::new(label.clone(), "prepare", m);
            let text = fs::read_to_string(&entry.manifest).map_err(|e| fail(e.to_string()))?;
            let manifest = load_manifest(&text).map_err(|e| fail(e.to_string()))?;
            let path = section_dir(out, &manifest.section_id).join(SECTION_FILE);
            read_json::<PreparedSection>(&path).map_err(|e| fail(format!("{e} (run prepare first)")))
        })
        .collect()
}

// ---------------------------------------------------------------- capture

fn replay(
    config: &CampaignConfig,
    prepared: &PreparedSection,
    body: &str,
    dir: &Path,
    input_ckpt: &Path,
    timeout_s: f64,
) -> Result<RunResult, (ValidationStatus, String)> {
    let id = prepared.id();
    let driver =
        generate_replay_driver_with_support(body, &prepared.manifest, config.timing_repeats, &prepared.support_code)
            .map_err(|e| (ValidationStatus::CompileError, e.to_string()))?;
    mkdir(dir).map_err(|e| (ValidationStatus::RuntimeError, e.to_string()))?;
    let binary = build(&driver, &config.build.in_dir(dir)).map_err(|e| {
        let detail = match &e {
            crate::runner::BuildError::CompileFailure { stderr, .. } => {
                format!("{e}: {}", stderr.lines().take(5).collect::<Vec<_>>().join("\n"))
            }
            _ => e.to_string(),
        };
        (ValidationStatus::CompileError, detail)
    })?;
    let local_in = dir.join(input_checkpoint_name(id));
    if local_in != input_ckpt {
        fs::copy(input_ckpt, &local_in)
            .map_err(|e| (ValidationStatus::RuntimeError, format!("input checkpoint: {e}")))?;
    }
    let _ = fs::remove_file(dir.join(output_checkpoint_name(id)));
    let result = run(&binary, timeout_s, &run_env(config.threads, &config.env))
        .map_err(|e| (ValidationStatus::RuntimeError, e.to_string()))?;
    if result.timed_out {
        return Err((ValidationStatus::Timeout, format!("exceeded {timeout_s:.1} s")));
    }
    if !result.success() {
        return Err((ValidationStatus::RuntimeError, describe_run(&result)));
    }
    Ok(result)
}

fn capture_paths(out: &Path, id: &str) -> (PathBuf, PathBuf, PathBuf) {
    let dir = section_dir(out, id).join("capture");
    let input = dir.join(input_checkpoint_name(id));
    let reference = dir.join(output_checkpoint_name(id));
    (dir, input, reference)
}

/// Runs the instrumented program once, then replays the original body to
/// check the manifest is complete and to time the serial baseline.
pub fn capture_section(
    config: &CampaignConfig,
    prepared: &PreparedSection,
    out: &Path,
) -> Result<SerialBaseline, SectionFailure> {
    let id = prepared.id().to_string();
    let fail = |stage: &str, m: String| SectionFailure::new(id.clone(), stage, m);
    let (dir, input, reference) = capture_paths(out, &id);
    mkdir(&dir).map_err(|e| fail("capture", e.to_string()))?;

    let source = fs::read_to_string(&prepared.section.source_path).map_err(|e| fail("capture", e.to_string()))?;
    let program = generate_capture_program(&source, &prepared.section, &prepared.manifest)
        .map_err(|e| fail("capture", e.to_string()))?;
    let binary = build(&program, &config.build.in_dir(&dir)).map_err(|e| {
        let stderr = match &e {
            crate::runner::BuildError::CompileFailure { stderr, .. } => stderr.clone(),
            _ => String::new(),
        };
        fail("capture", format!("{e} {stderr}").trim().to_string())
    })?;
    for p in [&input, &reference] {
        let _ = fs::remove_file(p);
    }
    let result = run(&binary, config.capture_timeout_s, &run_env(config.threads, &config.env))
        .map_err(|e| fail("capture", e.to_string()))?;
    if result.timed_out || !result.success() {
        return Err(fail("capture", describe_run(&result)));
    }
    if !input.exists() || !reference.exists() {
        return Err(fail("capture", "the program never executed the section".into()));
    }
    let reference_ckpt = Checkpoint::read(&reference).map_err(|e| fail("capture", e.to_string()))?;

    let serial_dir = section_dir(out, &id).join("serial");
    let result = replay(config, prepared, &prepared.section.body_text, &serial_dir, &input, config.capture_timeout_s)
        .map_err(|(status, m)| fail("serial", format!("{status}: {m}")))?;
    let replayed =
        Checkpoint::read(&serial_dir.join(output_checkpoint_name(&id))).map_err(|e| fail("serial", e.to_string()))?;
    let report = compare(&reference_ckpt, &replayed, &prepared.manifest, config.tolerance);
    if !report.passed() {
        return Err(fail(
            "serial",
            format!(
                "replay of the original section disagrees with the capture ({:?}); the manifest is likely incomplete",
                report.status
            ),
        ));
    }
    let timing = collect_timing(&result).map_err(|e| fail("serial", e.to_string()))?;
    let baseline = SerialBaseline {
        section_id: id.clone(),
        median_ns: timing.median_ns,
        samples_ns: timing.samples_ns,
        wall_time_ns: result.wall_time_ns,
    };
    write_json(&section_dir(out, &id).join(BASELINE_FILE), &baseline).map_err(|e| fail("serial", e.to_string()))?;
    log::info!("captured {id}: serial median {} ns", baseline.median_ns);
    Ok(baseline)
}

/// The stored baseline, if capture already succeeded for this section.
pub fn load_baseline(out: &Path, section_id: &str) -> Option<SerialBaseline> {
    let (_, input, reference) = capture_paths(out, section_id);
    if !input.exists() || !reference.exists() {
        return None;
    }
    read_json(&section_dir(out, section_id).join(BASELINE_FILE)).ok()
}

// ---------------------------------------------------------------- optimize

pub fn instantiate_backends(
    config: &CampaignConfig,
    out: &Path,
) -> Result<HashMap<String, SharedBackend>, CampaignError> {
    let scratch = out.join("scratch");
    let mut map = HashMap::new();
    for b in &config.llm_backends {
        map.insert(b.tool_id().to_string(), b.instantiate(BackendKind::Llm, &scratch)?);
    }
    for b in &config.compiler_backends {
        map.insert(b.tool_id().to_string(), b.instantiate(BackendKind::Compiler, &scratch)?);
    }
    Ok(map)
}

pub fn read_candidates(out: &Path, section_id: &str) -> Result<Vec<CandidateEntry>, CampaignError> {
    let path = section_dir(out, section_id).join(CANDIDATES_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(CampaignError::io(&path, e)),
    };
    // A torn last line is dropped; that candidate is simply requested again.
    Ok(text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
}

/// Requests every planned candidate not already in `candidates.jsonl`,
/// with at most `max_in_flight` requests outstanding.
pub fn optimize_section(
    config: &CampaignConfig,
    prepared: &PreparedSection,
    backends: &HashMap<String, SharedBackend>,
    out: &Path,
) -> Result<Vec<CandidateEntry>, CampaignError> {
    let id = prepared.id();
    let path = section_dir(out, id).join(CANDIDATES_FILE);
    let existing = read_candidates(out, id)?;
    let have: BTreeSet<Origin> = existing.iter().map(|c| c.origin.clone()).collect();
    let pending: Vec<(Origin, BackendKind)> =
        candidate_origins(config).into_iter().filter(|(o, _)| !have.contains(o)).collect();
    if pending.is_empty() {
        return Ok(existing);
    }
    mkdir(&section_dir(out, id))?;
    let file =
        Mutex::new(OpenOptions::new().create(true).append(true).open(&path).map_err(|e| CampaignError::io(&path, e))?);
    let next = AtomicUsize::new(0);
    let ctx = prepared.context();
    let produced = Mutex::new(Vec::new());
    let write_error = Mutex::new(None);

    thread::scope(|scope| {
        for _ in 0..config.max_in_flight.min(pending.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((origin, kind)) = pending.get(i) else { break };
                let request = OptimizationRequest {
                    section_code: prepared.section.body_text.clone(),
                    strategy: origin.strategy,
                    attempt: origin.attempt.unwrap_or(1),
                };
                let entry = match backends.get(&origin.tool_id).map(|b| b.optimize(&request, &ctx)) {
                    Some(Ok(c)) => CandidateEntry {
                        origin: origin.clone(),
                        kind: *kind,
                        code: Some(c.code),
                        raw_response: c.raw_response,
                        error: None,
                    },
                    Some(Err(e)) => {
                        log::warn!("{id} {origin}: {e}");
                        CandidateEntry {
                            origin: origin.clone(),
                            kind: *kind,
                            code: None,
                            raw_response: None,
                            error: Some(e.to_string()),
                        }
                    }
                    None => CandidateEntry {
                        origin: origin.clone(),
                        kind: *kind,
                        code: None,
                        raw_response: None,
                        error: Some(format!("no backend `{}`", origin.tool_id)),
                    },
                };
                let mut line = serde_json::to_string(&entry).expect("serializable");
                line.push('\n');
                if let Err(e) = file.lock().unwrap_or_else(|p| p.into_inner()).write_all(line.as_bytes()) {
                    *write_error.lock().unwrap_or_else(|p| p.into_inner()) = Some(e);
                }
                produced.lock().unwrap_or_else(|p| p.into_inner()).push(entry);
            });
        }
    });
    if let Some(e) = write_error.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(CampaignError::io(&path, e));
    }
    log::info!("{id}: {} candidates requested", pending.len());
    let mut all = existing;
    all.extend(produced.into_inner().unwrap_or_else(|p| p.into_inner()));
    Ok(all)
}

// ---------------------------------------------------------------- validate

fn record_for(
    prepared: &PreparedSection,
    origin: &Origin,
    status: ValidationStatus,
    detection: &Detection,
    baseline: &SerialBaseline,
    median: Option<u64>,
    diagnostic: Option<String>,
) -> OutcomeRecord {
    let speedup = match (status, median) {
        (ValidationStatus::Pass, Some(m)) => Some(baseline.median_ns as f64 / m.max(1) as f64),
        _ => None,
    };
    OutcomeRecord {
        section_id: prepared.id().to_string(),
        origin: origin.clone(),
        status,
        category: categorize(&prepared.manifest, detection, status),
        detected: detection.labels.clone(),
        lines: prepared.section.line_count,
        pattern_key: pattern_key(&prepared.manifest),
        median_time_ns: if speedup.is_some() { median } else { None },
        serial_time_ns: Some(baseline.median_ns),
        speedup,
        diagnostic,
    }
}

/// Builds, runs, compares and times one candidate against the stored
/// capture.
pub fn validate_candidate(
    config: &CampaignConfig,
    prepared: &PreparedSection,
    baseline: &SerialBaseline,
    candidate: &CandidateEntry,
    out: &Path,
) -> OutcomeRecord {
    let id = prepared.id();
    let empty = Detection::default();
    let Some(code) = &candidate.code else {
        let why = candidate.error.clone().unwrap_or_else(|| "no code produced".into());
        return record_for(
            prepared,
            &candidate.origin,
            ValidationStatus::ExtractionError,
            &empty,
            baseline,
            None,
            Some(why),
        );
    };
    let detection = analyze(code);
    let (_, input, reference) = capture_paths(out, id);
    let dir = section_dir(out, id).join("candidates").join(origin_stem(&candidate.origin));
    let timeout = config.timeout_s.unwrap_or_else(|| default_timeout_s(baseline.wall_time_ns));

    let outcome = replay(config, prepared, code, &dir, &input, timeout).and_then(|result| {
        let produced = Checkpoint::read(&dir.join(output_checkpoint_name(id)))
            .map_err(|e| (ValidationStatus::RuntimeError, format!("output checkpoint: {e}")))?;
        let reference = Checkpoint::read(&reference)
            .map_err(|e| (ValidationStatus::RuntimeError, format!("reference checkpoint: {e}")))?;
        let report = compare(&reference, &produced, &prepared.manifest, config.tolerance);
        if !report.passed() {
            let at = report
                .offending
                .as_ref()
                .map(|o| match o.index {
                    Some(i) => format!(" at {}[{i}]", o.variable),
                    None => format!(" in {}", o.variable),
                })
                .unwrap_or_default();
            return Err((
                ValidationStatus::NumericMismatch,
                format!(
                    "{:?}{at}; abs err {:e}, rel err {:e}",
                    report.status, report.worst_abs_err, report.worst_rel_err
                ),
            ));
        }
        collect_timing(&result).map(|t| t.median_ns).map_err(|e| (ValidationStatus::RuntimeError, e.to_string()))
    });
    match outcome {
        Ok(median) => {
            record_for(prepared, &candidate.origin, ValidationStatus::Pass, &detection, baseline, Some(median), None)
        }
        Err((status, why)) => record_for(prepared, &candidate.origin, status, &detection, baseline, None, Some(why)),
    }
}

/// Validates the section's candidates in plan order, appending each record
/// to `records.jsonl` as it completes. Candidates already recorded are
/// skipped.
pub fn validate_section(
    config: &CampaignConfig,
    prepared: &PreparedSection,
    baseline: &SerialBaseline,
    candidates: &[CandidateEntry],
    out: &Path,
) -> Result<Vec<OutcomeRecord>, CampaignError> {
    let records_path = out.join(RECORDS_FILE);
    let done = completed(&read_records(&records_path)?);
    let by_origin: BTreeMap<&Origin, &CandidateEntry> = candidates.iter().map(|c| (&c.origin, c)).collect();
    let mut fresh = Vec::new();
    for (origin, kind) in candidate_origins(config) {
        if done.contains(&(prepared.id().to_string(), origin.clone())) {
            continue;
        }
        let missing;
        let candidate = match by_origin.get(&origin) {
            Some(c) => *c,
            None => {
                missing = CandidateEntry {
                    origin: origin.clone(),
                    kind,
                    code: None,
                    raw_response: None,
                    error: Some("candidate was never generated (run optimize first)".into()),
                };
                &missing
            }
        };
        let record = validate_candidate(config, prepared, baseline, candidate, out);
        log::info!(
            "{} {}: {}{}",
            record.section_id,
            record.origin,
            record.status,
            record.speedup.map(|s| format!(" speedup {s:.2}")).unwrap_or_default()
        );
        append_record(&records_path, &record)?;
        fresh.push(record);
    }
    Ok(fresh)
}

// ---------------------------------------------------------------- execute

/// Runs prepare, capture, optimize and validate for every planned section.
/// Section-level failures are collected, never fatal; only I/O on the
/// output directory aborts.
pub fn execute(plan: &ExperimentPlan, config: &CampaignConfig, out: &Path) -> Result<CampaignRun, CampaignError> {
    mkdir(out)?;
    let backends = instantiate_backends(config, out)?;
    let mut run = CampaignRun::default();
    for index in 0..plan.sections {
        let prepared = match prepare_section(config, index, out) {
            Ok(p) => p,
            Err(f) => {
                log::error!("skipping {}: {}", f.section, f.message);
                run.failures.push(f);
                continue;
            }
        };
        let baseline = match load_baseline(out, prepared.id()) {
            Some(b) => b,
            None => match capture_section(config, &prepared, out) {
                Ok(b) => b,
                Err(f) => {
                    log::error!("skipping {}: {} failed: {}", f.section, f.stage, f.message);
                    run.failures.push(f);
                    continue;
                }
            },
        };
        let candidates = optimize_section(config, &prepared, &backends, out)?;
        validate_section(config, &prepared, &baseline, &candidates, out)?;
    }
    let ids: BTreeSet<String> = read_prepared_ids(config, out);
    run.records = read_records(&out.join(RECORDS_FILE))?.into_iter().filter(|r| ids.contains(&r.section_id)).collect();
    Ok(run)
}

fn read_prepared_ids(config: &CampaignConfig, out: &Path) -> BTreeSet<String> {
    load_prepared(config, out).into_iter().filter_map(Result::ok).map(|p| p.manifest.section_id).collect()
}
