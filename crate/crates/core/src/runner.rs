//! Building generated sources with an external C compiler and running the
//! resulting binaries under a timeout.
//!
//! Every [`run`] holds a process-wide lock for its whole duration, so at most
//! one measured process exists at a time regardless of how many threads
//! drive builds.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::instrument::{GeneratedSource, SourceKind, TIME_LINE_PREFIX};
use crate::sections::file_stem;

/// Standard OpenMP thread-count variable.
pub const OMP_THREADS_VAR: &str = "OMP_NUM_THREADS";
pub const DEFAULT_THREADS: u32 = 4;
/// Lower bound for the derived per-candidate timeout.
pub const MIN_TIMEOUT_S: f64 = 10.0;

static TIMED_RUN: Mutex<()> = Mutex::new(());

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("compilation failed (exit {code:?})")]
    CompileFailure { code: Option<i32>, stderr: String },
    #[error("compiler `{0}` not found")]
    ToolMissing(String),
    #[error("invalid build spec: {0}")]
    InvalidSpec(String),
    #[error("build i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot spawn {path}: {source}")]
    SpawnFailure { path: String, source: io::Error },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimingError {
    #[error("no {TIME_LINE_PREFIX} lines in output")]
    NoTimingLines,
    #[error("malformed timing line `{0}`")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSpec {
    /// Command template; `{src}` and `{out}` are substituted, `{flags}`
    /// expands to `flags` (which are otherwise appended).
    #[serde(default = "default_compiler_cmd")]
    pub compiler_cmd: String,
    #[serde(default = "default_flags")]
    pub flags: Vec<String>,
    #[serde(default)]
    pub workdir: PathBuf,
}

fn default_compiler_cmd() -> String {
    "gcc {src} -o {out} -lm".to_string()
}

fn default_flags() -> Vec<String> {
    vec!["-O3".to_string(), "-fopenmp".to_string()]
}

impl Default for BuildSpec {
    fn default() -> Self {
        Self { compiler_cmd: default_compiler_cmd(), flags: default_flags(), workdir: PathBuf::from(".") }
    }
}

impl BuildSpec {
    pub fn in_dir(&self, workdir: impl Into<PathBuf>) -> Self {
        Self { workdir: workdir.into(), ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), BuildError> {
        for placeholder in ["{src}", "{out}"] {
            if !self.compiler_cmd.contains(placeholder) {
                return Err(BuildError::InvalidSpec(format!("compiler_cmd lacks {placeholder}")));
            }
        }
        Ok(())
    }

    fn argv(&self, src: &Path, out: &Path) -> Vec<String> {
        let mut argv = Vec::new();
        let mut flags_used = false;
        for tok in self.compiler_cmd.split_whitespace() {
            if tok == "{flags}" {
                argv.extend(self.flags.iter().cloned());
                flags_used = true;
            } else {
                argv.push(tok.replace("{src}", &src.to_string_lossy()).replace("{out}", &out.to_string_lossy()));
            }
        }
        if !flags_used {
            argv.extend(self.flags.iter().cloned());
        }
        argv
    }
}

/// Writes `source` into the build workdir and compiles it.
pub fn build(source: &GeneratedSource, spec: &BuildSpec) -> Result<PathBuf, BuildError> {
    spec.validate()?;
    fs::create_dir_all(&spec.workdir)?;
    let stem = match source.kind {
        SourceKind::CaptureProgram => format!("{}_capture", file_stem(&source.section_id)),
        SourceKind::ReplayDriver => format!("{}_replay", file_stem(&source.section_id)),
    };
    let workdir = fs::canonicalize(&spec.workdir)?;
    let src = workdir.join(format!("{stem}.c"));
    let out = workdir.join(&stem);
    fs::write(&src, &source.text)?;
    let _ = fs::remove_file(&out);

    let argv = spec.argv(&src, &out);
    let output = match Command::new(&argv[0]).args(&argv[1..]).current_dir(&workdir).stdin(Stdio::null()).output() {
        Ok(o) => o,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(BuildError::ToolMissing(argv[0].clone())),
        Err(e) => return Err(e.into()),
    };
    if !output.status.success() {
        return Err(BuildError::CompileFailure {
            code: output.status.code(),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        });
    }
    if !out.exists() {
        return Err(BuildError::CompileFailure {
            code: output.status.code(),
            stderr: format!("compiler exited 0 but produced no {}", out.display()),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitStatus {
    Code(i32),
    Signal(i32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    /// Absent when the process was killed for exceeding its timeout.
    pub exit_code: Option<ExitStatus>,
    pub stdout: String,
    pub stderr: String,
    pub wall_time_ns: u64,
    pub timed_out: bool,
}

impl RunResult {
    pub fn success(&self) -> bool {
        self.exit_code == Some(ExitStatus::Code(0))
    }
}

fn exit_status(status: std::process::ExitStatus) -> ExitStatus {
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        if let Some(sig) = status.signal() {
            return ExitStatus::Signal(sig);
        }
    }
    ExitStatus::Code(status.code().unwrap_or(-1))
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        buf
    })
}

/// Runs `binary` with its parent directory as working directory.
///
/// `env` is added to the inherited environment verbatim. Runs are serialised
/// process-wide.
pub fn run(binary: &Path, timeout_s: f64, env: &BTreeMap<String, String>) -> Result<RunResult, RunError> {
    let _exclusive = TIMED_RUN.lock().unwrap_or_else(|e| e.into_inner());
    let cwd = binary.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let started = Instant::now();
    let mut child = Command::new(binary)
        .current_dir(cwd)
        .envs(env)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| RunError::SpawnFailure { path: binary.display().to_string(), source })?;
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());

    let timeout = Duration::from_secs_f64(timeout_s.max(0.0));
    let (exit_code, timed_out) = match child.wait_timeout(timeout) {
        Ok(Some(status)) => (Some(exit_status(status)), false),
        Ok(None) | Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            (None, true)
        }
    };
    let wall_time_ns = started.elapsed().as_nanos() as u64;
    let stdout = String::from_utf8_lossy(&out.join().unwrap_or_default()).into_owned();
    let stderr = String::from_utf8_lossy(&err.join().unwrap_or_default()).into_owned();
    Ok(RunResult { exit_code, stdout, stderr, wall_time_ns, timed_out })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingSample {
    pub samples_ns: Vec<u64>,
    pub median_ns: u64,
}

/// Median that is always an observed value: the lower middle for even counts.
pub fn lower_median(samples: &[u64]) -> Option<u64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    Some(sorted[(sorted.len() - 1) / 2])
}

pub fn collect_timing(result: &RunResult) -> Result<TimingSample, TimingError> {
    let mut samples = Vec::new();
    for line in result.stdout.lines() {
        let Some(rest) = line.trim().strip_prefix(TIME_LINE_PREFIX) else { continue };
        let value = rest.trim().parse::<u64>().map_err(|_| TimingError::Malformed(line.to_string()))?;
        samples.push(value);
    }
    let median_ns = lower_median(&samples).ok_or(TimingError::NoTimingLines)?;
    Ok(TimingSample { samples_ns: samples, median_ns })
}

/// Default candidate timeout: ten times the serial wall time, at least
/// [`MIN_TIMEOUT_S`].
pub fn default_timeout_s(serial_wall_time_ns: u64) -> f64 {
    (serial_wall_time_ns as f64 * 10.0 / 1e9).max(MIN_TIMEOUT_S)
}

/// Environment for a timed run: the thread count plus any passthrough.
pub fn run_env(threads: u32, passthrough: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    let mut env = passthrough.clone();
    env.insert(OMP_THREADS_VAR.to_string(), threads.to_string());
    env
}
