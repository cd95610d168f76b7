//! Subcommand front end: `prepare`, `capture`, `optimize`, `validate`,
//! `report` and `run`.
//!
//! Exit codes: 0 success, 1 failures recorded or a stage error, 2 usage or
//! configuration error. Progress is logged to stderr; stdout only carries
//! JSON.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::campaign::{
    capture_section, execute, instantiate_backends, load_baseline, load_prepared, optimize_section, plan, prepare,
    read_candidates, report_dir, validate_section, CampaignConfig, CampaignError, SectionEntry, RECORDS_FILE,
};
use crate::checkpoint::Tolerance;
use crate::outcome::ValidationStatus;
use crate::runner::OMP_THREADS_VAR;
use crate::sections::{extract_sections_from, load_manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pcaot", version, about = "Validate and time optimizer-produced variants of marked code sections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Inputs {
    /// Campaign config (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// C source holding experimental sections; with --manifest, a
    /// one-section campaign.
    #[arg(long, value_name = "PATH")]
    pub src: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// Restrict to one section id.
    #[arg(long, value_name = "ID")]
    pub section: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// Relative tolerance for floating-point outputs.
    #[arg(long, value_name = "FLOAT")]
    pub tolerance_rel: Option<f64>,
    /// OpenMP threads for timed runs.
    #[arg(long, value_name = "N")]
    pub threads: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the sections of --src, or extract the campaign's sections into --out.
    Prepare {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run the instrumented programs and record reference checkpoints.
    Capture {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Request candidates from every backend.
    Optimize {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Validate and time candidates against the stored checkpoints.
    Validate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute metrics and charts from records.jsonl.
    Report {
        #[arg(long, value_name = "PATH")]
        records: Option<PathBuf>,
        /// Report directory; defaults to the records file's directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Campaign config, for size buckets and hand-optimized timings.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Print metrics JSON on stdout.
        #[arg(long)]
        json: bool,
    },
    /// The whole pipeline from a campaign config.
    Run {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Print the plan and exit.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        json: bool,
    },
}

enum Failure {
    Usage(String),
    Stage(String),
}

impl From<CampaignError> for Failure {
    fn from(e: CampaignError) -> Self {
        match e {
            CampaignError::InvalidConfig(_) | CampaignError::EmptyCampaign => Failure::Usage(e.to_string()),
            other => Failure::Stage(other.to_string()),
        }
    }
}

type Outcome = Result<i32, Failure>;

fn load_config(inputs: &Inputs, overrides: Option<&Overrides>) -> Result<CampaignConfig, Failure> {
    let mut config = match (&inputs.config, &inputs.src, &inputs.manifest) {
        (Some(path), None, None) => CampaignConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))?,
        (None, Some(src), Some(manifest)) => CampaignConfig::with_sections(vec![SectionEntry {
            source: src.clone(),
            manifest: manifest.clone(),
            support_code: None,
        }]),
        (None, _, _) => return Err(Failure::Usage("either --config or both --src and --manifest are required".into())),
        _ => return Err(Failure::Usage("--config cannot be combined with --src/--manifest".into())),
    };
    if let Some(o) = overrides {
        if let Some(rel) = o.tolerance_rel {
            config.tolerance = Tolerance::new(config.tolerance.abs, rel)
                .ok_or_else(|| Failure::Usage("--tolerance-rel must be finite and non-negative".into()))?;
        }
        let env_threads = std::env::var(OMP_THREADS_VAR).ok().and_then(|v| v.trim().parse::<u32>().ok());
        if let Some(t) = o.threads.or(env_threads) {
            if t == 0 {
                return Err(Failure::Usage("--threads must be positive".into()));
            }
            config.threads = t;
        }
    }
    if let Some(id) = &inputs.section {
        let keep: Vec<SectionEntry> = config
            .sections
            .iter()
            .filter(|s| {
                fs::read_to_string(&s.manifest)
                    .ok()
                    .and_then(|t| load_manifest(&t).ok())
                    .is_some_and(|m| &m.section_id == id)
            })
            .cloned()
            .collect();
        if keep.is_empty() {
            return Err(Failure::Usage(format!("no section `{id}` in the campaign")));
        }
        config.sections = keep;
    }
    config.validate()?;
    Ok(config)
}

fn list_sections(src: &Path) -> Outcome {
    let text = fs::read_to_string(src).map_err(|e| Failure::Usage(format!("{}: {e}", src.display())))?;
    let sections = extract_sections_from(&text, &src.to_string_lossy()).map_err(|e| Failure::Stage(e.to_string()))?;
    for s in &sections {
        log::info!("{} lines {}-{} ({} lines)", s.id, s.start_line, s.end_line, s.line_count);
    }
    let listing: Vec<_> = sections
        .iter()
        .map(|s| json!({"id": s.id, "start_line": s.start_line, "end_line": s.end_line, "line_count": s.line_count}))
        .collect();
    println!("{}", serde_json::to_string_pretty(&listing).expect("json"));
    Ok(EXIT_OK)
}

fn cmd_prepare(inputs: &Inputs, out: Option<&Path>) -> Outcome {
    if inputs.config.is_none() && inputs.manifest.is_none() {
        return match &inputs.src {
            Some(src) => list_sections(src),
            None => Err(Failure::Usage("prepare needs --src or --config".into())),
        };
    }
    let out = out.ok_or_else(|| Failure::Usage("prepare needs --out".into()))?;
    let config = load_config(inputs, None)?;
    let mut code = EXIT_OK;
    for r in prepare(&config, out) {
        if let Err(f) = r {
            log::error!("{}: {}", f.section, f.message);
            code = EXIT_FAILURES;
        }
    }
    Ok(code)
}

fn cmd_capture(inputs: &Inputs, out: &Path, overrides: &Overrides) -> Outcome {
    let config = load_config(inputs, Some(overrides))?;
    let mut code = EXIT_OK;
    for p in load_prepared(&config, out) {
        let result = p.and_then(|p| capture_section(&config, &p, out));
        if let Err(f) = result {
            log::error!("{}: {} failed: {}", f.section, f.stage, f.message);
            code = EXIT_FAILURES;
        }
    }
    Ok(code)
}

fn cmd_optimize(inputs: &Inputs, out: &Path) -> Outcome {
    let config = load_config(inputs, None)?;
    let backends = instantiate_backends(&config, out)?;
    let mut code = EXIT_OK;
    for p in load_prepared(&config, out) {
        match p {
            Ok(p) => {
                let produced = optimize_section(&config, &p, &backends, out)?;
                if produced.iter().any(|c| c.error.is_some()) {
                    code = EXIT_FAILURES;
                }
            }
            Err(f) => {
                log::error!("{}: {}", f.section, f.message);
                code = EXIT_FAILURES;
            }
        }
    }
    Ok(code)
}

fn cmd_validate(inputs: &Inputs, out: &Path, overrides: &Overrides) -> Outcome {
    let config = load_config(inputs, Some(overrides))?;
    let mut code = EXIT_OK;
    for p in load_prepared(&config, out) {
        let p = match p {
            Ok(p) => p,
            Err(f) => {
                log::error!("{}: {}", f.section, f.message);
                code = EXIT_FAILURES;
                continue;
            }
        };
        let Some(baseline) = load_baseline(out, p.id()) else {
            log::error!("{}: no capture (run capture first)", p.id());
            code = EXIT_FAILURES;
            continue;
        };
        let candidates = read_candidates(out, p.id())?;
        let records = validate_section(&config, &p, &baseline, &candidates, out)?;
        if records.iter().any(|r| r.status != ValidationStatus::Pass) {
            code = EXIT_FAILURES;
        }
    }
    Ok(code)
}

fn cmd_report(records: Option<&Path>, out: Option<&Path>, config: Option<&Path>, json: bool) -> Outcome {
    let config = config.map(CampaignConfig::load).transpose().map_err(|e| Failure::Usage(e.to_string()))?;
    let dir = match (records, out) {
        (_, Some(out)) => out.to_path_buf(),
        (Some(r), None) => r.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
        (None, None) => return Err(Failure::Usage("report needs --records or --out".into())),
    };
    if let Some(r) = records {
        if !r.exists() {
            return Err(Failure::Usage(format!("{}: no such file", r.display())));
        }
        let target = dir.join(RECORDS_FILE);
        let same = fs::canonicalize(r).ok().zip(fs::canonicalize(&target).ok()).is_some_and(|(a, b)| a == b);
        if !same {
            fs::create_dir_all(&dir).map_err(|e| Failure::Stage(e.to_string()))?;
            fs::copy(r, &target).map_err(|e| Failure::Stage(format!("{}: {e}", target.display())))?;
        }
    }
    let metrics = report_dir(&dir, config.as_ref())?;
    log::info!("{} records, reports in {}", metrics.attempts, dir.display());
    if json {
        print!("{}", crate::campaign::metrics_json(&metrics));
    }
    Ok(EXIT_OK)
}

fn cmd_run(inputs: &Inputs, out: Option<&Path>, overrides: &Overrides, dry_run: bool, json: bool) -> Outcome {
    let config = load_config(inputs, Some(overrides))?;
    let plan = plan(&config)?;
    if dry_run {
        let summary = json!({
            "sections": plan.sections,
            "versions_per_section": plan.versions_per_section,
            "candidates_per_section": plan.candidates_per_section,
            "llm_attempts": plan.llm_attempts,
            "compiler_runs": plan.compiler_runs,
            "tasks": plan.tasks.len(),
        });
        log::info!(
            "{} sections x {} versions, {} LLM attempts",
            plan.sections,
            plan.versions_per_section,
            plan.llm_attempts
        );
        println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
        return Ok(EXIT_OK);
    }
    let out = out.ok_or_else(|| Failure::Usage("run needs --out".into()))?;
    let run = execute(&plan, &config, out)?;
    let metrics = report_dir(out, Some(&config))?;
    for f in &run.failures {
        log::error!("section {} skipped at {}: {}", f.section, f.stage, f.message);
    }
    log::info!("{} of {} candidates passed; reports in {}", metrics.passes, metrics.attempts, out.display());
    if json {
        print!("{}", crate::campaign::metrics_json(&metrics));
    }
    Ok(if run.all_passed() { EXIT_OK } else { EXIT_FAILURES })
}

/// Runs one invocation and returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Prepare { inputs, out } => cmd_prepare(inputs, out.as_deref()),
        Command::Capture { inputs, out, overrides } => cmd_capture(inputs, out, overrides),
        Command::Optimize { inputs, out } => cmd_optimize(inputs, out),
        Command::Validate { inputs, out, overrides } => cmd_validate(inputs, out, overrides),
        Command::Report { records, out, config, json } => {
            cmd_report(records.as_deref(), out.as_deref(), config.as_deref(), *json)
        }
        Command::Run { inputs, out, overrides, dry_run, json } => {
            cmd_run(inputs, out.as_deref(), overrides, *dry_run, *json)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Stage(m)) => {
            eprintln!("error: {m}");
            EXIT_FAILURES
        }
    }
}

/// Parses `args` (program name first) and dispatches; usage errors exit 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
    }
}
