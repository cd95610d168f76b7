//! Encodes a checkpoint, decodes it back and compares a perturbed copy.
//!
//! cargo run --example checkpoint_codec

use pcaot::checkpoint::{compare, decode, encode, Values};
use pcaot::{load_manifest, Checkpoint, Tolerance, VarRecord};

fn main() {
    let manifest = load_manifest(
        r#"{"section_id":"demo","parallelizable":true,"expected_pattern":"PO","variables":[
            {"name":"grid","elem_type":"f64","extents":[4,8],"direction":"inout"},
            {"name":"steps","elem_type":"i32","extents":[],"direction":"in"}]}"#,
    )
    .expect("valid manifest");

    let grid: Vec<f64> = (0..32).map(|i| (i as f64).sqrt()).collect();
    let reference = Checkpoint::new(vec![
        VarRecord::new("grid", vec![4, 8], Values::F64(grid.clone())),
        VarRecord::new("steps", vec![], Values::I32(vec![3])),
    ]);
    let bytes = encode(&reference);
    println!("encoded {} bytes, magic {:?}", bytes.len(), String::from_utf8_lossy(&bytes[..4]));
    assert_eq!(decode(&bytes).expect("decodes"), reference);

    let mut nudged = grid;
    nudged[13] *= 1.0 + 1e-9;
    nudged[21] += 0.5;
    let candidate = Checkpoint::new(vec![
        VarRecord::new("grid", vec![4, 8], Values::F64(nudged)),
        VarRecord::new("steps", vec![], Values::I32(vec![3])),
    ]);
    for tol in [Tolerance::default(), Tolerance::new(0.0, 1.0).expect("valid")] {
        let r = compare(&reference, &candidate, &manifest, tol);
        println!("abs {:e} rel {:e}: {:?} offending {:?}", tol.abs, tol.rel, r.status, r.offending);
    }
}
