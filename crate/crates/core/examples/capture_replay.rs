//! Captures a section's state from its program, replays the section alone
//! and checks the replay reproduces the captured outputs. Needs gcc.
//!
//! cargo run --example capture_replay

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use pcaot::instrument::{
    generate_capture_program, generate_replay_driver_with_support, input_checkpoint_name, output_checkpoint_name,
};
use pcaot::runner::{build, collect_timing, run, BuildSpec};
use pcaot::sections::extract_sections_from;
use pcaot::{compare, load_manifest, Checkpoint, Tolerance};

fn main() {
    let samples = Path::new(env!("CARGO_MANIFEST_DIR")).join("samples");
    let source_path = samples.join("vector_sum.c");
    let source = fs::read_to_string(&source_path).expect("sample source");
    let manifest =
        load_manifest(&fs::read_to_string(samples.join("vector_sum.json")).expect("sample manifest")).expect("valid");
    let section = extract_sections_from(&source, &source_path.to_string_lossy()).expect("sections").remove(0);

    let work = tempfile::tempdir().expect("scratch dir");
    let capture_dir = work.path().join("capture");
    let replay_dir = work.path().join("replay");

    let capture = generate_capture_program(&source, &section, &manifest).expect("capture program");
    let bin = build(&capture, &BuildSpec::default().in_dir(&capture_dir)).expect("capture builds");
    let r = run(&bin, 30.0, &BTreeMap::new()).expect("capture runs");
    println!("capture exited {:?}, stdout: {}", r.exit_code, r.stdout.trim());

    fs::create_dir_all(&replay_dir).expect("replay dir");
    let input = input_checkpoint_name(&manifest.section_id);
    fs::copy(capture_dir.join(&input), replay_dir.join(&input)).expect("input checkpoint");
    // The replay has no access to the original macros, so N comes back as support code.
    let driver =
        generate_replay_driver_with_support(&section.body_text, &manifest, 5, "#define N 4096").expect("driver");
    let bin = build(&driver, &BuildSpec::default().in_dir(&replay_dir)).expect("driver builds");
    let r = run(&bin, 30.0, &BTreeMap::new()).expect("driver runs");
    let timing = collect_timing(&r).expect("timing lines");
    println!("replay samples {:?} ns, median {} ns", timing.samples_ns, timing.median_ns);

    let output = output_checkpoint_name(&manifest.section_id);
    let reference = Checkpoint::read(&capture_dir.join(&output)).expect("captured outputs");
    let replayed = Checkpoint::read(&replay_dir.join(&output)).expect("replayed outputs");
    let report = compare(&reference, &replayed, &manifest, Tolerance::EXACT);
    println!("exact comparison: {:?}", report.status);
}
