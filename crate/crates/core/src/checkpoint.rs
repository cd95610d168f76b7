//! Binary snapshots of section-boundary state.
//!
//! Wire layout, all integers little-endian:
//!
//! ```text
//! "PCAO" | u32 version (=1) | u32 record count
//! per record: u16 name length | name (UTF-8) | u8 type tag | u8 rank
//!             | rank x u64 extents | payload (row-major LE elements)
//! 0xFF terminator
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sections::{ElemType, StateManifest};

pub const MAGIC: &[u8; 4] = b"PCAO";
pub const VERSION: u32 = 1;
pub const TERMINATOR: u8 = 0xFF;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload: needed {needed} bytes at offset {offset}, {available} available")]
    TruncatedPayload { offset: usize, needed: usize, available: usize },
    #[error("unknown type tag {0}")]
    UnknownTypeTag(u8),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("checkpoint i/o on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarRecord {
    pub name: String,
    pub elem_type: ElemType,
    pub extents: Vec<u64>,
    pub payload: Vec<u8>,
}

/// Element values of a record, decoded from its payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    I8(Vec<i8>),
    I32(Vec<i32>),
    I64(Vec<i64>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl Values {
    pub fn elem_type(&self) -> ElemType {
        match self {
            Self::I8(_) => ElemType::I8,
            Self::I32(_) => ElemType::I32,
            Self::I64(_) => ElemType::I64,
            Self::F32(_) => ElemType::F32,
            Self::F64(_) => ElemType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::I8(v) => v.len(),
            Self::I32(v) => v.len(),
            Self::I64(v) => v.len(),
            Self::F32(v) => v.len(),
            Self::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            Self::I8(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Self::I32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Self::I64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Self::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Self::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }
}

impl VarRecord {
    /// Builds a record; panics if the value count disagrees with `extents`.
    pub fn new(name: impl Into<String>, extents: Vec<u64>, values: Values) -> Self {
        let count: u64 = extents.iter().product();
        assert_eq!(count, values.len() as u64, "value count must match extents");
        Self { name: name.into(), elem_type: values.elem_type(), extents, payload: values.to_le_bytes() }
    }

    pub fn scalar_f64(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, vec![], Values::F64(vec![value]))
    }

    pub fn element_count(&self) -> u64 {
        self.extents.iter().product()
    }

    pub fn values(&self) -> Values {
        fn chunks<const N: usize, T>(p: &[u8], f: fn([u8; N]) -> T) -> Vec<T> {
            p.chunks_exact(N).map(|c| f(c.try_into().unwrap())).collect()
        }
        match self.elem_type {
            ElemType::I8 => Values::I8(chunks(&self.payload, i8::from_le_bytes)),
            ElemType::I32 => Values::I32(chunks(&self.payload, i32::from_le_bytes)),
            ElemType::I64 => Values::I64(chunks(&self.payload, i64::from_le_bytes)),
            ElemType::F32 => Values::F32(chunks(&self.payload, f32::from_le_bytes)),
            ElemType::F64 => Values::F64(chunks(&self.payload, f64::from_le_bytes)),
        }
    }

    /// Element `index` widened to f64, for floating records.
    fn float_at(&self, index: usize) -> f64 {
        match self.elem_type {
            ElemType::F32 => f32::from_le_bytes(self.payload[index * 4..index * 4 + 4].try_into().unwrap()) as f64,
            ElemType::F64 => f64::from_le_bytes(self.payload[index * 8..index * 8 + 8].try_into().unwrap()),
            _ => unreachable!("float_at on an integer record"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub version: u32,
    pub records: Vec<VarRecord>,
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self { version: VERSION, records: Vec::new() }
    }
}

impl Checkpoint {
    pub fn new(records: Vec<VarRecord>) -> Self {
        Self { version: VERSION, records }
    }

    pub fn get(&self, name: &str) -> Option<&VarRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn read(path: &Path) -> Result<Self, CheckpointError> {
        let bytes =
            fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Ok(decode(&bytes)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, encode(self)).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
    }
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let payload: usize = ckpt.records.iter().map(|r| 4 + r.name.len() + 8 * r.extents.len() + r.payload.len()).sum();
    let mut out = Vec::with_capacity(13 + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&ckpt.version.to_le_bytes());
    out.extend_from_slice(&(ckpt.records.len() as u32).to_le_bytes());
    for r in &ckpt.records {
        out.extend_from_slice(&(r.name.len() as u16).to_le_bytes());
        out.extend_from_slice(r.name.as_bytes());
        out.push(r.elem_type.tag());
        out.push(r.extents.len() as u8);
        for e in &r.extents {
            out.extend_from_slice(&e.to_le_bytes());
        }
        out.extend_from_slice(&r.payload);
    }
    out.push(TERMINATOR);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(DecodeError::TruncatedPayload { offset: self.pos, needed: n, available });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, DecodeError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let mut rd = Reader { bytes, pos: 4 };
    let version = rd.u32()?;
    if version != VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let count = rd.u32()?;
    let mut records = Vec::new();
    let mut names = HashSet::new();
    for _ in 0..count {
        let name_len = rd.u16()? as usize;
        let name = std::str::from_utf8(rd.take(name_len)?)
            .map_err(|_| DecodeError::Malformed("record name is not UTF-8".into()))?
            .to_string();
        let tag = rd.u8()?;
        let elem_type = ElemType::from_tag(tag).ok_or(DecodeError::UnknownTypeTag(tag))?;
        let rank = rd.u8()?;
        let extents = (0..rank).map(|_| rd.u64()).collect::<Result<Vec<_>, _>>()?;
        if extents.contains(&0) {
            return Err(DecodeError::Malformed(format!("record `{name}` has a zero extent")));
        }
        let len = extents
            .iter()
            .try_fold(elem_type.size() as u64, |acc, &e| acc.checked_mul(e))
            .and_then(|n| usize::try_from(n).ok())
            .ok_or_else(|| DecodeError::Malformed(format!("record `{name}` is too large")))?;
        let payload = rd.take(len)?.to_vec();
        if !names.insert(name.clone()) {
            return Err(DecodeError::Malformed(format!("duplicate record `{name}`")));
        }
        records.push(VarRecord { name, elem_type, extents, payload });
    }
    match rd.u8() {
        Ok(TERMINATOR) => {}
        Ok(b) => return Err(DecodeError::Malformed(format!("expected terminator, found {b:#04x}"))),
        Err(e) => return Err(e),
    }
    if rd.pos != bytes.len() {
        return Err(DecodeError::Malformed(format!("{} trailing bytes", bytes.len() - rd.pos)));
    }
    Ok(Checkpoint { version, records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 0.0, rel: 1e-6 }
    }
}

impl Tolerance {
    pub const EXACT: Tolerance = Tolerance { abs: 0.0, rel: 0.0 };

    pub fn new(abs: f64, rel: f64) -> Option<Self> {
        (abs.is_finite() && rel.is_finite() && abs >= 0.0 && rel >= 0.0).then_some(Self { abs, rel })
    }

    /// `reference` vs `candidate` with NaN == NaN.
    pub fn accepts(&self, reference: f64, candidate: f64) -> bool {
        match (reference.is_nan(), candidate.is_nan()) {
            (true, true) => true,
            (false, false) => {
                if reference == candidate {
                    return true;
                }
                (reference - candidate).abs() <= self.abs + self.rel * reference.abs()
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComparisonStatus {
    Pass,
    NumericMismatch,
    MissingVariable,
    ShapeMismatch,
    TypeMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offending {
    pub variable: String,
    /// Flat row-major element index; absent for structural mismatches.
    pub index: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub status: ComparisonStatus,
    pub worst_abs_err: f64,
    pub worst_rel_err: f64,
    pub offending: Option<Offending>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.status == ComparisonStatus::Pass
    }
}

fn structural(status: ComparisonStatus, variable: &str) -> ComparisonReport {
    ComparisonReport {
        status,
        worst_abs_err: 0.0,
        worst_rel_err: 0.0,
        offending: Some(Offending { variable: variable.to_string(), index: None }),
    }
}

/// Compares the out/inout variables of `manifest` between two checkpoints.
///
/// Structural problems are reported in the order missing, shape, type,
/// across all variables, before any element is inspected. Integers must be
/// bit-equal; floats pass when `|a - b| <= abs + rel * |a|`.
pub fn compare(
    reference: &Checkpoint,
    candidate: &Checkpoint,
    manifest: &StateManifest,
    tol: Tolerance,
) -> ComparisonReport {
    let mut pairs = Vec::new();
    for var in manifest.outputs() {
        match (reference.get(&var.name), candidate.get(&var.name)) {
            (Some(r), Some(c)) => pairs.push((r, c)),
            _ => return structural(ComparisonStatus::MissingVariable, &var.name),
        }
    }
    if let Some((r, _)) = pairs.iter().find(|(r, c)| r.extents != c.extents) {
        return structural(ComparisonStatus::ShapeMismatch, &r.name);
    }
    if let Some((r, _)) = pairs.iter().find(|(r, c)| r.elem_type != c.elem_type) {
        return structural(ComparisonStatus::TypeMismatch, &r.name);
    }

    let mut worst_abs = 0.0f64;
    let mut worst_rel = 0.0f64;
    let mut offending = None;
    for (r, c) in pairs {
        if r.elem_type.is_float() {
            for i in 0..r.element_count() as usize {
                let (a, b) = (r.float_at(i), c.float_at(i));
                let ok = tol.accepts(a, b);
                let (abs_err, rel_err) = if a.is_nan() && b.is_nan() {
                    (0.0, 0.0)
                } else if a.is_nan() || b.is_nan() {
                    (f64::INFINITY, f64::INFINITY)
                } else {
                    let d = (a - b).abs();
                    let rel = if d == 0.0 { 0.0 } else { d / a.abs() };
                    (d, rel)
                };
                worst_abs = worst_abs.max(abs_err);
                worst_rel = worst_rel.max(rel_err);
                if !ok && offending.is_none() {
                    offending = Some(Offending { variable: r.name.clone(), index: Some(i as u64) });
                }
            }
        } else if offending.is_none() && r.payload != c.payload {
            let size = r.elem_type.size();
            let index = r
                .payload
                .chunks_exact(size)
                .zip(c.payload.chunks_exact(size))
                .position(|(x, y)| x != y)
                .expect("payloads differ");
            offending = Some(Offending { variable: r.name.clone(), index: Some(index as u64) });
        }
    }
    ComparisonReport {
        status: if offending.is_some() { ComparisonStatus::NumericMismatch } else { ComparisonStatus::Pass },
        worst_abs_err: worst_abs,
        worst_rel_err: worst_rel,
        offending,
    }
}
