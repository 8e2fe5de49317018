//! Binary geometry payload.
//!
//! All fields little-endian:
//! - header: `AVGM`, u32 layout version, u32 revision, u32 section count
//! - section table: per section u32 kind, u32 index, u32 byte offset, u32 element count
//! - kind 0 (body) and 1 (garment, index = attach slot): count × 6 f32, position then normal
//! - kind 2 (joints): count × 3 f32 world positions in skeleton order

use avatar_core::geometry::{Mesh, Vec3};
use avatar_core::pipeline::Evaluation;
use serde::Serialize;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"AVGM";
pub const LAYOUT_VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 16;
pub const SECTION_BYTES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Body = 0,
    Garment = 1,
    Joints = 2,
}

impl SectionKind {
    fn from_u32(v: u32) -> Option<Self> {
        match v {
            0 => Some(SectionKind::Body),
            1 => Some(SectionKind::Garment),
            2 => Some(SectionKind::Joints),
            _ => None,
        }
    }

    /// f32 values per element.
    pub fn stride(self) -> usize {
        match self {
            SectionKind::Joints => 3,
            _ => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub kind: SectionKind,
    pub index: u32,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub revision: u32,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PayloadError {
    #[error("payload too short")]
    Truncated,
    #[error("bad magic")]
    Magic,
    #[error("unsupported layout version {0}")]
    Version(u32),
    #[error("section {0} has unknown kind {1}")]
    Kind(usize, u32),
    #[error("section {0} lies outside the payload")]
    Bounds(usize),
}

fn interleaved(mesh: &Mesh) -> Vec<f32> {
    let zero = Vec3::zeros();
    let normals = mesh.normals.as_deref();
    let mut out = Vec::with_capacity(mesh.vertex_count() * 6);
    for (i, p) in mesh.vertices.iter().enumerate() {
        let n = normals.map_or(&zero, |ns| &ns[i]);
        out.extend([p.x, p.y, p.z, n.x, n.y, n.z].map(|c| c as f32));
    }
    out
}

pub fn encode(revision: u32, eval: &Evaluation) -> Vec<u8> {
    let mut sections = vec![(SectionKind::Body, 0u32, interleaved(&eval.body))];
    for (k, g) in eval.garments.iter().enumerate() {
        sections.push((SectionKind::Garment, k as u32, interleaved(g)));
    }
    let joints: Vec<f32> = eval.joints.iter().flat_map(|p| [p.x, p.y, p.z].map(|c| c as f32)).collect();
    sections.push((SectionKind::Joints, 0, joints));

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [LAYOUT_VERSION, revision, sections.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut offset = HEADER_BYTES + SECTION_BYTES * sections.len();
    for (kind, index, data) in &sections {
        let count = data.len() / kind.stride();
        for v in [*kind as u32, *index, offset as u32, count as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        offset += data.len() * 4;
    }
    for (_, _, data) in &sections {
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> Result<u32, PayloadError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or(PayloadError::Truncated)
}

pub fn decode(bytes: &[u8]) -> Result<Geometry, PayloadError> {
    if bytes.len() < HEADER_BYTES {
        return Err(PayloadError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(PayloadError::Magic);
    }
    let version = u32_at(bytes, 4)?;
    if version != LAYOUT_VERSION {
        return Err(PayloadError::Version(version));
    }
    let revision = u32_at(bytes, 8)?;
    let count = u32_at(bytes, 12)? as usize;
    let mut sections = Vec::with_capacity(count.min(1024));
    for s in 0..count {
        let at = HEADER_BYTES + s * SECTION_BYTES;
        let raw_kind = u32_at(bytes, at)?;
        let kind = SectionKind::from_u32(raw_kind).ok_or(PayloadError::Kind(s, raw_kind))?;
        let index = u32_at(bytes, at + 4)?;
        let offset = u32_at(bytes, at + 8)? as usize;
        let elements = u32_at(bytes, at + 12)? as usize;
        let len = elements.checked_mul(kind.stride() * 4).ok_or(PayloadError::Bounds(s))?;
        let data = offset
            .checked_add(len)
            .and_then(|end| bytes.get(offset..end))
            .ok_or(PayloadError::Bounds(s))?;
        let data = data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        sections.push(Section { kind, index, data });
    }
    Ok(Geometry { revision, sections })
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldDoc {
    pub name: &'static str,
    pub kind: &'static str,
}

/// Machine-readable description of the payload, served as JSON.
#[derive(Debug, Clone, Serialize)]
pub struct LayoutDoc {
    pub magic: &'static str,
    pub version: u32,
    pub endianness: &'static str,
    pub header: Vec<FieldDoc>,
    pub section_entry: Vec<FieldDoc>,
    pub section_kinds: Vec<(u32, SectionKind, &'static str)>,
}

pub fn layout() -> LayoutDoc {
    let f = |name, kind| FieldDoc { name, kind };
    LayoutDoc {
        magic: "AVGM",
        version: LAYOUT_VERSION,
        endianness: "little",
        header: vec![f("magic", "4 bytes"), f("version", "u32"), f("revision", "u32"), f("section_count", "u32")],
        section_entry: vec![f("kind", "u32"), f("index", "u32"), f("offset", "u32 bytes from payload start"), f("count", "u32 elements")],
        section_kinds: vec![
            (0, SectionKind::Body, "count x [px, py, pz, nx, ny, nz] f32"),
            (1, SectionKind::Garment, "count x [px, py, pz, nx, ny, nz] f32; index is the attach slot"),
            (2, SectionKind::Joints, "count x [x, y, z] f32 in skeleton joint order"),
        ],
    }
}
