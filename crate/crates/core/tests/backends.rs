mod common;

use std::fs;

use pcaot::backends::{
    extract_code, wrap_translation_unit, Backend, BackendError, BackendKind, CompilerBackend, CompilerDriverConfig,
    MockAction, MockBackend, MockRule, OptimizationRequest, PromptStrategy, SectionContext,
};
use pcaot::sections::{extract_sections, ExperimentalSection};

const SRC: &str = "int main(void) {\n#pragma experimental section start id=loop\n    for (int i = 0; i < 8; i++)\n        x[i] = 2 * x[i];\n#pragma experimental section stop\n}\n";

fn section() -> ExperimentalSection {
    extract_sections(SRC).unwrap().remove(0)
}

fn manifest() -> pcaot::StateManifest {
    common::manifest(
        r#"{"section_id":"loop","parallelizable":true,"expected_pattern":"PO",
            "variables":[{"name":"x","elem_type":"i32","extents":[8],"direction":"inout"}]}"#,
    )
}

fn request(strategy: Option<PromptStrategy>) -> OptimizationRequest {
    OptimizationRequest { section_code: section().body_text, strategy, attempt: 1 }
}

fn driver(command: &str) -> (tempfile::TempDir, CompilerBackend) {
    let dir = tempfile::tempdir().unwrap();
    let backend = CompilerBackend::new(
        CompilerDriverConfig { tool_id: "tool".into(), command: command.into(), output_path: None },
        dir.path(),
    );
    (dir, backend)
}

#[test]
fn wrapped_unit_compiles_and_keeps_the_section() {
    let (s, m) = (section(), manifest());
    let ctx = SectionContext { section: &s, manifest: &m, support_code: "" };
    let tu = wrap_translation_unit(&ctx);
    let again = extract_sections(&tu).unwrap();
    assert_eq!(again.len(), 1);
    assert_eq!(again[0].id, "loop");
    assert_eq!(again[0].body_text, s.body_text);
    assert!(tu.contains("int32_t x[8];"));
    if common::gcc_available() {
        let dir = tempfile::tempdir().unwrap();
        let c = dir.path().join("tu.c");
        fs::write(&c, &tu).unwrap();
        let st = std::process::Command::new("gcc").arg("-fsyntax-only").arg(&c).status().unwrap();
        assert!(st.success());
    }
}

#[test]
fn copying_compiler_returns_the_same_body() {
    let (s, m) = (section(), manifest());
    let ctx = SectionContext { section: &s, manifest: &m, support_code: "" };
    let (_d, b) = driver("cp {src} {out}");
    let c = b.optimize(&request(None), &ctx).unwrap();
    assert_eq!(c.code, s.body_text);
    assert_eq!(c.origin.tool_id, "tool");
    assert!(!c.origin.is_llm());
    assert_eq!(b.kind(), BackendKind::Compiler);
}

#[test]
fn failing_tool_is_reported() {
    let (s, m) = (section(), manifest());
    let ctx = SectionContext { section: &s, manifest: &m, support_code: "" };
    let (_d, b) = driver("false {src} {out}");
    assert!(matches!(b.optimize(&request(None), &ctx), Err(BackendError::ToolFailure { code: Some(1), .. })));
    let (_d, b) = driver("no-such-tool-pcaot {src} {out}");
    assert!(matches!(b.optimize(&request(None), &ctx), Err(BackendError::ToolFailure { .. })));
}

#[test]
fn output_without_section_is_missing() {
    let (s, m) = (section(), manifest());
    let ctx = SectionContext { section: &s, manifest: &m, support_code: "" };
    // `touch` leaves an empty file: no markers at all.
    let (_d, b) = driver("touch {out}");
    assert!(matches!(b.optimize(&request(None), &ctx), Err(BackendError::OutputMissing(_))));
    // An in-place tool that drops the stop marker.
    let dir = tempfile::tempdir().unwrap();
    let b = CompilerBackend::new(
        CompilerDriverConfig {
            tool_id: "inplace".into(),
            command: "sed -i /section.stop/d {src}".into(),
            output_path: Some("{src_stem}.c".into()),
        },
        dir.path(),
    );
    assert!(matches!(b.optimize(&request(None), &ctx), Err(BackendError::OutputMissing(_))));
    // The same tool, harmless edit: the output rule finds the file.
    let b = CompilerBackend::new(
        CompilerDriverConfig {
            tool_id: "inplace".into(),
            command: "sed -i s/2/2/ {src}".into(),
            output_path: Some("{src_stem}.c".into()),
        },
        dir.path(),
    );
    assert_eq!(b.optimize(&request(None), &ctx).unwrap().code, s.body_text);
}

#[test]
fn mock_rules_first_match_wins() {
    let (s, m) = (section(), manifest());
    let ctx = SectionContext { section: &s, manifest: &m, support_code: "" };
    let rules = vec![
        MockRule {
            section: Some("other".into()),
            strategy: None,
            attempt: None,
            action: MockAction::Fail("no".into()),
        },
        MockRule {
            section: None,
            strategy: Some(PromptStrategy::DIP),
            attempt: None,
            action: MockAction::Code("#pragma omp parallel for\nfor (int i = 0; i < 8; i++) x[i] *= 2;".into()),
        },
        MockRule {
            section: Some("loop".into()),
            strategy: None,
            attempt: Some(2),
            action: MockAction::Fail("boom".into()),
        },
    ];
    let b = MockBackend::new("m", BackendKind::Llm, rules);
    let ip = b.optimize(&request(Some(PromptStrategy::IP)), &ctx).unwrap();
    assert_eq!(ip.code, s.body_text);
    assert_eq!(extract_code(ip.raw_response.as_deref().unwrap()).unwrap(), ip.code);
    let dip = b.optimize(&request(Some(PromptStrategy::DIP)), &ctx).unwrap();
    assert!(dip.code.starts_with("#pragma omp parallel for"));
    let mut second = request(Some(PromptStrategy::CoT));
    second.attempt = 2;
    assert!(matches!(b.optimize(&second, &ctx), Err(BackendError::Injected(m)) if m == "boom"));
    assert!(matches!(b.optimize(&request(None), &ctx), Err(BackendError::InvalidRequest(_))));
}

#[test]
fn mock_actions_deserialize_from_json() {
    let rules: Vec<MockRule> = serde_json::from_str(
        r#"[{"action":"identity"},{"strategy":"CoT","action":{"append":"x[0] = 1;"}},
            {"attempt":3,"action":{"replace":{"from":"2 *","to":"3 *"}}},{"action":{"code_file":"c.c"}}]"#,
    )
    .unwrap();
    assert_eq!(rules[0].action, MockAction::Identity);
    assert_eq!(rules[1].strategy, Some(PromptStrategy::CoT));
    assert!(matches!(&rules[2].action, MockAction::Replace { to, .. } if to == "3 *"));
}
