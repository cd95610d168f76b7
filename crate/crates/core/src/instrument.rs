//! C source generation: an instrumented copy of the original program that
//! dumps boundary checkpoints, and a standalone replay driver that runs one
//! section variant against a captured input.
//!
//! Both embed the same checkpoint reader/writer ([`emit_helpers`]), so the
//! generated programs only need libc and the OpenMP runtime.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sections::{extract_sections_from, file_stem, ExperimentalSection, StateManifest, VariableSpec};

/// Arrays whose storage exceeds this many bytes are heap-allocated by the
/// replay driver.
pub const HEAP_THRESHOLD_BYTES: u64 = 64 * 1024;

/// Timing line prefix printed by replay drivers.
pub const TIME_LINE_PREFIX: &str = "PCAOT_TIME_NS";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstrumentError {
    #[error("section `{0}` not found in the source")]
    UnknownSection(String),
    #[error("unsupported variable `{0}`: {1}")]
    UnsupportedType(String, String),
    #[error("timing repeats must be positive")]
    ZeroRepeats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    CaptureProgram,
    ReplayDriver,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedSource {
    pub kind: SourceKind,
    pub text: String,
    pub section_id: String,
}

pub fn input_checkpoint_name(section_id: &str) -> String {
    format!("{}.in.ckpt", file_stem(section_id))
}

pub fn output_checkpoint_name(section_id: &str) -> String {
    format!("{}.out.ckpt", file_stem(section_id))
}

const HELPERS: &str = r#"/* ---- pcaot checkpoint helpers (generated) ---- */
#include <stdio.h>
#include <stdlib.h>
#include <stdint.h>
#include <string.h>

#if defined(__GNUC__)
#define PCAOT_UNUSED __attribute__((unused))
#else
#define PCAOT_UNUSED
#endif

static PCAOT_UNUSED int pcaot_host_is_le(void) {
    const uint16_t one = 1;
    return *(const unsigned char *)&one == 1;
}

static PCAOT_UNUSED void pcaot_die(const char *what, const char *detail) {
    fprintf(stderr, "pcaot: %s: %s\n", what, detail);
    exit(97);
}

static PCAOT_UNUSED void pcaot_put_uint(FILE *f, uint64_t v, int nbytes) {
    for (int i = 0; i < nbytes; i++) fputc((int)((v >> (8 * i)) & 0xFFu), f);
}

static PCAOT_UNUSED uint64_t pcaot_get_uint(FILE *f, int nbytes, const char *path) {
    uint64_t v = 0;
    for (int i = 0; i < nbytes; i++) {
        int c = fgetc(f);
        if (c == EOF) pcaot_die("truncated checkpoint", path);
        v |= (uint64_t)(unsigned char)c << (8 * i);
    }
    return v;
}

static PCAOT_UNUSED void pcaot_put_elems(FILE *f, const void *src, size_t elem_size, uint64_t count) {
    const unsigned char *p = (const unsigned char *)src;
    if (pcaot_host_is_le() || elem_size == 1) {
        if (count && fwrite(p, elem_size, (size_t)count, f) != (size_t)count) pcaot_die("write failed", "checkpoint");
        return;
    }
    for (uint64_t i = 0; i < count; i++)
        for (size_t b = elem_size; b-- > 0;) fputc(p[i * elem_size + b], f);
}

static PCAOT_UNUSED void pcaot_get_elems(FILE *f, void *dst, size_t elem_size, uint64_t count, const char *path) {
    unsigned char *p = (unsigned char *)dst;
    if (count && fread(p, elem_size, (size_t)count, f) != (size_t)count) pcaot_die("truncated checkpoint", path);
    if (!pcaot_host_is_le() && elem_size > 1) {
        for (uint64_t i = 0; i < count; i++) {
            unsigned char *e = p + i * elem_size;
            for (size_t lo = 0, hi = elem_size - 1; lo < hi; lo++, hi--) {
                unsigned char t = e[lo]; e[lo] = e[hi]; e[hi] = t;
            }
        }
    }
}

static PCAOT_UNUSED FILE *pcaot_ckpt_begin(const char *path, uint32_t count) {
    FILE *f = fopen(path, "wb");
    if (!f) pcaot_die("cannot create checkpoint", path);
    fwrite("PCAO", 1, 4, f);
    pcaot_put_uint(f, 1, 4);
    pcaot_put_uint(f, count, 4);
    return f;
}

static PCAOT_UNUSED void pcaot_ckpt_put(FILE *f, const char *name, unsigned tag, unsigned rank,
                                        const uint64_t *extents, const void *data, size_t elem_size) {
    size_t len = strlen(name);
    uint64_t count = 1;
    pcaot_put_uint(f, len, 2);
    fwrite(name, 1, len, f);
    fputc((int)tag, f);
    fputc((int)rank, f);
    for (unsigned r = 0; r < rank; r++) {
        pcaot_put_uint(f, extents[r], 8);
        count *= extents[r];
    }
    pcaot_put_elems(f, data, elem_size, count);
}

static PCAOT_UNUSED void pcaot_ckpt_end(FILE *f) {
    fputc(0xFF, f);
    if (fclose(f) != 0) pcaot_die("cannot close checkpoint", "");
}

static PCAOT_UNUSED void pcaot_ckpt_get(const char *path, const char *name, unsigned tag, unsigned rank,
                                        const uint64_t *extents, void *data, size_t elem_size) {
    static const size_t sizes[5] = {1, 4, 8, 4, 8};
    char magic[4];
    FILE *f = fopen(path, "rb");
    if (!f) pcaot_die("cannot open checkpoint", path);
    if (fread(magic, 1, 4, f) != 4 || memcmp(magic, "PCAO", 4) != 0) pcaot_die("bad checkpoint magic", path);
    if (pcaot_get_uint(f, 4, path) != 1) pcaot_die("unsupported checkpoint version", path);
    uint64_t records = pcaot_get_uint(f, 4, path);
    for (uint64_t r = 0; r < records; r++) {
        size_t len = (size_t)pcaot_get_uint(f, 2, path);
        char *rec_name = (char *)malloc(len + 1);
        if (!rec_name) pcaot_die("out of memory", path);
        if (len && fread(rec_name, 1, len, f) != len) pcaot_die("truncated checkpoint", path);
        rec_name[len] = '\0';
        unsigned rec_tag = (unsigned)pcaot_get_uint(f, 1, path);
        unsigned rec_rank = (unsigned)pcaot_get_uint(f, 1, path);
        if (rec_tag > 4) pcaot_die("unknown type tag", path);
        int shape_ok = rec_tag == tag && rec_rank == rank;
        uint64_t count = 1;
        for (unsigned k = 0; k < rec_rank; k++) {
            uint64_t e = pcaot_get_uint(f, 8, path);
            if (k < rank && e != extents[k]) shape_ok = 0;
            count *= e;
        }
        if (strcmp(rec_name, name) == 0) {
            free(rec_name);
            if (!shape_ok) pcaot_die("type or shape mismatch for", name);
            pcaot_get_elems(f, data, elem_size, count, path);
            fclose(f);
            return;
        }
        free(rec_name);
        if (fseek(f, (long)(count * sizes[rec_tag]), SEEK_CUR) != 0) pcaot_die("truncated checkpoint", path);
    }
    fclose(f);
    pcaot_die("variable missing from checkpoint", name);
}
/* ---- end pcaot checkpoint helpers ---- */
"#;

/// The checkpoint reader/writer block embedded in every generated program.
pub fn emit_helpers() -> String {
    HELPERS.to_string()
}

fn extents_literal(var: &VariableSpec) -> String {
    if var.extents.is_empty() {
        "NULL".to_string()
    } else {
        let items: Vec<String> = var.extents.iter().map(|e| format!("{e}ULL")).collect();
        format!("(const uint64_t[]){{{}}}", items.join(", "))
    }
}

fn data_pointer(var: &VariableSpec) -> String {
    if var.is_scalar() {
        format!("&({})", var.name)
    } else {
        format!("({})", var.name)
    }
}

fn put_call(var: &VariableSpec) -> String {
    format!(
        "pcaot_ckpt_put(pcaot_f, \"{}\", {}u, {}u, {}, (const void *){}, {});",
        var.name,
        var.elem_type.tag(),
        var.extents.len(),
        extents_literal(var),
        data_pointer(var),
        var.elem_type.size()
    )
}

/// One-line dump of `vars` into `file`, executed on the first pass only.
fn dump_site(vars: &[&VariableSpec], file: &str, guard: &str) -> String {
    let mut s = format!("{{ static int {guard} = 0; if (!{guard}) {{ ");
    for v in vars.iter().filter(|v| v.is_scalar()) {
        let _ = write!(s, "(void)sizeof(char[(sizeof({}) == {}) ? 1 : -1]); ", v.name, v.elem_type.size());
    }
    let _ = write!(s, "FILE *pcaot_f = pcaot_ckpt_begin(\"{file}\", {}u); ", vars.len());
    for v in vars {
        s.push_str(&put_call(v));
        s.push(' ');
    }
    let _ = write!(s, "pcaot_ckpt_end(pcaot_f); {guard} = 1; }} }}");
    s
}

/// Rewrites `original_source` so a normal run writes `<id>.in.ckpt` right
/// after the start pragma and `<id>.out.ckpt` right before the stop pragma.
///
/// Only insertions are made: the helper block goes after the last `#include`
/// above the section (or at the top), and each dump is a single line.
pub fn generate_capture_program(
    original_source: &str,
    section: &ExperimentalSection,
    manifest: &StateManifest,
) -> Result<GeneratedSource, InstrumentError> {
    let found = extract_sections_from(original_source, &section.source_path)
        .ok()
        .and_then(|all| {
            all.into_iter()
                .find(|s| s.start_line == section.start_line && s.end_line == section.end_line && s.id == section.id)
        })
        .is_some();
    if !found {
        return Err(InstrumentError::UnknownSection(section.id.clone()));
    }

    let lines: Vec<&str> = original_source.split_inclusive('\n').collect();
    let helper_after = lines[..section.start_line - 1]
        .iter()
        .rposition(|l| l.trim_start().starts_with("#include") || l.trim_start().starts_with("# include"))
        .map(|i| i + 1)
        .unwrap_or(0);

    let inputs: Vec<&VariableSpec> = manifest.inputs().collect();
    let outputs: Vec<&VariableSpec> = manifest.outputs().collect();

    let mut text = String::with_capacity(original_source.len() + HELPERS.len() + 1024);
    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        if idx == helper_after {
            text.push_str(HELPERS);
        }
        if line_no == section.end_line {
            text.push_str(&dump_site(&outputs, &output_checkpoint_name(&section.id), "pcaot_captured_out"));
            text.push('\n');
        }
        text.push_str(line);
        if line_no == section.start_line {
            if !line.ends_with('\n') {
                text.push('\n');
            }
            text.push_str(&dump_site(&inputs, &input_checkpoint_name(&section.id), "pcaot_captured_in"));
            text.push('\n');
        }
    }
    if helper_after == lines.len() {
        text.push_str(HELPERS);
    }
    Ok(GeneratedSource { kind: SourceKind::CaptureProgram, text, section_id: section.id.clone() })
}

fn check_supported(var: &VariableSpec) -> Result<(), InstrumentError> {
    let unsupported = |why: &str| InstrumentError::UnsupportedType(var.name.clone(), why.to_string());
    if var.extents.len() > u8::MAX as usize {
        return Err(unsupported("rank above 255"));
    }
    if var.extents.contains(&0) {
        return Err(unsupported("zero extent"));
    }
    match var.byte_len() {
        Some(n) if usize::try_from(n).is_ok() => Ok(()),
        _ => Err(unsupported("storage size does not fit in memory")),
    }
}

fn is_heap(var: &VariableSpec) -> bool {
    !var.is_scalar() && var.byte_len().unwrap_or(u64::MAX) > HEAP_THRESHOLD_BYTES
}

fn declaration(var: &VariableSpec) -> String {
    let ty = var.elem_type.c_type();
    let dims = |ext: &[u64]| ext.iter().map(|e| format!("[{e}]")).collect::<String>();
    if var.is_scalar() {
        format!("static {ty} {};", var.name)
    } else if is_heap(var) {
        if var.extents.len() == 1 {
            format!("static {ty} *{};", var.name)
        } else {
            format!("static {ty} (*{}){};", var.name, dims(&var.extents[1..]))
        }
    } else {
        format!("static {ty} {}{};", var.name, dims(&var.extents))
    }
}

fn byte_size_expr(var: &VariableSpec) -> String {
    format!("{}ULL", var.byte_len().unwrap_or(0))
}

pub fn generate_replay_driver(
    section_body: &str,
    manifest: &StateManifest,
    timing_repeats: u32,
) -> Result<GeneratedSource, InstrumentError> {
    generate_replay_driver_with_support(section_body, manifest, timing_repeats, "")
}

/// Replay driver with `support_code` (helper functions, macros, extra
/// declarations) placed after the state declarations and before `main`.
pub fn generate_replay_driver_with_support(
    section_body: &str,
    manifest: &StateManifest,
    timing_repeats: u32,
    support_code: &str,
) -> Result<GeneratedSource, InstrumentError> {
    if timing_repeats == 0 {
        return Err(InstrumentError::ZeroRepeats);
    }
    for var in &manifest.variables {
        check_supported(var)?;
    }
    let id = &manifest.section_id;
    let in_file = input_checkpoint_name(id);
    let out_file = output_checkpoint_name(id);

    let mut s = String::new();
    s.push_str("#ifndef _GNU_SOURCE\n#define _GNU_SOURCE\n#endif\n");
    s.push_str(HELPERS);
    s.push_str("#include <time.h>\n#ifdef _OPENMP\n#include <omp.h>\n#endif\n\n");

    let _ = writeln!(s, "/* state of section {id} */");
    for var in &manifest.variables {
        s.push_str(&declaration(var));
        s.push('\n');
    }
    s.push('\n');
    if !support_code.trim().is_empty() {
        s.push_str("/* support code */\n");
        s.push_str(support_code);
        if !support_code.ends_with('\n') {
            s.push('\n');
        }
        s.push('\n');
    }

    s.push_str(
        "static int64_t pcaot_now_ns(void) {\n    struct timespec ts;\n    clock_gettime(CLOCK_MONOTONIC, &ts);\n    return (int64_t)ts.tv_sec * 1000000000LL + (int64_t)ts.tv_nsec;\n}\n\n",
    );

    s.push_str("static void pcaot_load_state(void) {\n");
    for var in &manifest.variables {
        if var.direction.is_input() {
            let _ = writeln!(
                s,
                "    pcaot_ckpt_get(\"{in_file}\", \"{}\", {}u, {}u, {}, (void *){}, {});",
                var.name,
                var.elem_type.tag(),
                var.extents.len(),
                extents_literal(var),
                data_pointer(var),
                var.elem_type.size()
            );
        } else {
            let _ = writeln!(s, "    memset((void *){}, 0, (size_t){});", data_pointer(var), byte_size_expr(var));
        }
    }
    s.push_str("}\n\n");

    s.push_str("static void pcaot_store_state(void) {\n");
    let outputs: Vec<&VariableSpec> = manifest.outputs().collect();
    let _ = writeln!(s, "    FILE *pcaot_f = pcaot_ckpt_begin(\"{out_file}\", {}u);", outputs.len());
    for var in &outputs {
        let _ = writeln!(s, "    {}", put_call(var));
    }
    s.push_str("    pcaot_ckpt_end(pcaot_f);\n}\n\n");

    s.push_str("int main(void) {\n");
    for var in manifest.variables.iter().filter(|v| is_heap(v)) {
        let _ = writeln!(
            s,
            "    {name} = calloc({first}, sizeof *{name});\n    if (!{name}) pcaot_die(\"out of memory allocating\", \"{name}\");",
            name = var.name,
            first = var.extents[0]
        );
    }
    let _ = writeln!(s, "    for (int pcaot_rep = 0; pcaot_rep < {timing_repeats}; pcaot_rep++) {{");
    s.push_str("        pcaot_load_state();\n        int64_t pcaot_t0 = pcaot_now_ns();\n        {\n");
    for line in section_body.lines() {
        s.push_str(line);
        s.push('\n');
    }
    s.push_str("        }\n        int64_t pcaot_t1 = pcaot_now_ns();\n");
    let _ = writeln!(s, "        printf(\"{TIME_LINE_PREFIX} %lld\\n\", (long long)(pcaot_t1 - pcaot_t0));");
    s.push_str("    }\n    pcaot_store_state();\n    fflush(stdout);\n    return 0;\n}\n");

    Ok(GeneratedSource { kind: SourceKind::ReplayDriver, text: s, section_id: id.clone() })
}
