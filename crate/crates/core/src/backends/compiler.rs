use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendKind, CandidateVersion, OptimizationRequest, Origin, SectionContext};
use crate::sections::{extract_sections, file_stem, START_PRAGMA, STOP_PRAGMA};

/// How to invoke an external source-to-source compiler.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompilerDriverConfig {
    pub tool_id: String,
    /// Whitespace-separated template with `{src}` and `{out}` placeholders.
    pub command: String,
    /// Where the transformed file appears, relative to the scratch directory.
    /// `{out}` and `{src_stem}` are substituted; defaults to `{out}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

pub struct CompilerBackend {
    config: CompilerDriverConfig,
    scratch_root: PathBuf,
}

/// A compilable file holding the section inside a function, with the
/// manifest variables as file-scope definitions.
pub fn wrap_translation_unit(ctx: &SectionContext<'_>) -> String {
    let mut s = String::from("#include <stdio.h>\n#include <stdlib.h>\n#include <stdint.h>\n#include <math.h>\n\n");
    for var in &ctx.manifest.variables {
        let dims: String = var.extents.iter().map(|e| format!("[{e}]")).collect();
        let _ = writeln!(s, "{} {}{};", var.elem_type.c_type(), var.name, dims);
    }
    s.push('\n');
    if !ctx.support_code.trim().is_empty() {
        s.push_str(ctx.support_code);
        if !ctx.support_code.ends_with('\n') {
            s.push('\n');
        }
        s.push('\n');
    }
    let _ = writeln!(s, "void pcaot_section(void)\n{{\n{START_PRAGMA} id={}", ctx.section.id);
    if !ctx.section.body_text.is_empty() {
        s.push_str(&ctx.section.body_text);
        s.push('\n');
    }
    let _ = writeln!(s, "{STOP_PRAGMA}\n}}\n\nint main(void)\n{{\n    pcaot_section();\n    return 0;\n}}");
    s
}

impl CompilerBackend {
    pub fn new(config: CompilerDriverConfig, scratch_root: impl Into<PathBuf>) -> Self {
        Self { config, scratch_root: scratch_root.into() }
    }

    pub fn request_compiler(
        &self,
        _request: &OptimizationRequest,
        ctx: &SectionContext<'_>,
    ) -> Result<CandidateVersion, BackendError> {
        let dir = self.scratch_root.join(file_stem(&self.config.tool_id)).join(file_stem(&ctx.section.id));
        fs::create_dir_all(&dir)?;
        let dir = fs::canonicalize(&dir)?;
        let stem = file_stem(&ctx.section.id);
        let src = dir.join(format!("{stem}.c"));
        let out = dir.join(format!("{stem}.out.c"));
        fs::write(&src, wrap_translation_unit(ctx))?;
        let _ = fs::remove_file(&out);

        let subst = |t: &str| {
            t.replace("{src}", &src.to_string_lossy())
                .replace("{out}", &out.to_string_lossy())
                .replace("{src_stem}", &stem)
        };
        let argv: Vec<String> = self.config.command.split_whitespace().map(subst).collect();
        let tool_failure = |code, stderr| BackendError::ToolFailure { tool: self.config.tool_id.clone(), code, stderr };
        let Some((program, args)) = argv.split_first() else {
            return Err(tool_failure(None, "empty command".into()));
        };
        let output = Command::new(program)
            .args(args)
            .current_dir(&dir)
            .stdin(Stdio::null())
            .output()
            .map_err(|e| tool_failure(None, format!("cannot run `{program}`: {e}")))?;
        if !output.status.success() {
            return Err(tool_failure(output.status.code(), String::from_utf8_lossy(&output.stderr).into_owned()));
        }

        let produced = match &self.config.output_path {
            Some(rule) => dir.join(subst(rule)),
            None => out,
        };
        let text = fs::read_to_string(&produced)
            .map_err(|e| BackendError::OutputMissing(format!("{}: {e}", produced.display())))?;
        let sections =
            extract_sections(&text).map_err(|e| BackendError::OutputMissing(format!("{}: {e}", produced.display())))?;
        let section = sections
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::OutputMissing(format!("{}: no experimental section", produced.display())))?;
        Ok(CandidateVersion {
            origin: Origin::compiler(self.config.tool_id.clone()),
            code: section.body_text,
            raw_response: None,
        })
    }
}

impl Backend for CompilerBackend {
    fn tool_id(&self) -> &str {
        &self.config.tool_id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Compiler
    }

    fn optimize(
        &self,
        request: &OptimizationRequest,
        ctx: &SectionContext<'_>,
    ) -> Result<CandidateVersion, BackendError> {
        self.request_compiler(request, ctx)
    }
}
