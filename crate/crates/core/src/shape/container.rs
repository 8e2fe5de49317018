//! `.avbasis` container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "AVBASIS\0"
//! version      u32      1
//! n            u32      rest vertex count
//! m            u32      attribute count
//! face_count   u32
//! flags        u32      bit 0: rest mesh carries UVs
//! names        m x (u32 byte length, UTF-8 bytes)
//! faces        face_count x (u32 arity, arity x u32 index)
//! rest         3n x f32
//! uvs          2n x f32 (only when flag bit 0 is set)
//! bounds       2m x f32 (min, max per attribute)
//! fields       m x 3n x f32, attribute-major
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{BlendShapeBasis, ShapeError};
use crate::geometry::{Mesh, Vec3};

pub const BASIS_MAGIC: &[u8; 8] = b"AVBASIS\0";
pub const BASIS_VERSION: u32 = 1;

const FLAG_UVS: u32 = 1;
const MAX_NAME_LEN: u32 = 4096;

pub fn write_basis<W: Write>(basis: &BlendShapeBasis, mut out: W) -> Result<(), ShapeError> {
    basis.validate()?;
    let mesh = &basis.rest_mesh;
    let mut buf = Vec::new();
    buf.extend_from_slice(BASIS_MAGIC);
    put_u32(&mut buf, BASIS_VERSION);
    put_u32(&mut buf, mesh.vertex_count() as u32);
    put_u32(&mut buf, basis.attribute_count() as u32);
    put_u32(&mut buf, mesh.faces.len() as u32);
    put_u32(&mut buf, if mesh.uvs.is_some() { FLAG_UVS } else { 0 });
    for name in &basis.attribute_names {
        put_u32(&mut buf, name.len() as u32);
        buf.extend_from_slice(name.as_bytes());
    }
    for face in &mesh.faces {
        put_u32(&mut buf, face.len() as u32);
        face.iter().for_each(|&i| put_u32(&mut buf, i));
    }
    for v in &mesh.vertices {
        put_vec3(&mut buf, v);
    }
    if let Some(uvs) = &mesh.uvs {
        for uv in uvs {
            put_f32(&mut buf, uv[0]);
            put_f32(&mut buf, uv[1]);
        }
    }
    for &(lo, hi) in &basis.weight_bounds {
        put_f32(&mut buf, lo);
        put_f32(&mut buf, hi);
    }
    for field in &basis.attributes {
        field.iter().for_each(|v| put_vec3(&mut buf, v));
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_basis<R: Read>(mut input: R) -> Result<BlendShapeBasis, ShapeError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != BASIS_MAGIC {
        return Err(ShapeError::Container("bad magic".into()));
    }
    let version = r.u32()?;
    if version != BASIS_VERSION {
        return Err(ShapeError::Container(format!("unsupported version {version}")));
    }
    let n = r.u32()? as usize;
    let m = r.u32()? as usize;
    let face_count = r.u32()? as usize;
    let flags = r.u32()?;
    let mut names = Vec::new();
    for _ in 0..m {
        let len = r.u32()?;
        if len > MAX_NAME_LEN {
            return Err(ShapeError::Container(format!("attribute name of {len} bytes")));
        }
        let raw = r.take(len as usize)?;
        names.push(
            String::from_utf8(raw.to_vec()).map_err(|_| ShapeError::Container("name is not UTF-8".into()))?,
        );
    }
    let mut faces = Vec::new();
    for _ in 0..face_count {
        let arity = r.u32()?;
        if !(3..=4).contains(&arity) {
            return Err(ShapeError::Container(format!("face arity {arity}")));
        }
        faces.push((0..arity).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?);
    }
    let vertices = (0..n).map(|_| r.vec3()).collect::<Result<Vec<_>, _>>()?;
    let uvs = if flags & FLAG_UVS != 0 {
        Some((0..n).map(|_| Ok([r.f32()?, r.f32()?])).collect::<Result<Vec<_>, ShapeError>>()?)
    } else {
        None
    };
    let bounds = (0..m).map(|_| Ok((r.f32()?, r.f32()?))).collect::<Result<Vec<_>, ShapeError>>()?;
    let mut attributes = Vec::with_capacity(m);
    for _ in 0..m {
        attributes.push((0..n).map(|_| r.vec3()).collect::<Result<Vec<_>, _>>()?);
    }
    if r.pos != bytes.len() {
        return Err(ShapeError::Container(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let rest = Mesh::with_computed_normals(vertices, faces, uvs)
        .map_err(|e| ShapeError::Container(e.to_string()))?;
    BlendShapeBasis::new(rest, attributes, names, bounds)
}

#[derive(Serialize, Deserialize)]
struct JsonBasis {
    format: String,
    version: u32,
    #[serde(flatten)]
    basis: BlendShapeBasis,
}

/// Lossless JSON debug form.
pub fn write_basis_json(basis: &BlendShapeBasis) -> Result<String, ShapeError> {
    let doc = JsonBasis {
        format: "avbasis".into(),
        version: BASIS_VERSION,
        basis: basis.clone(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| ShapeError::Container(e.to_string()))
}

pub fn read_basis_json(text: &str) -> Result<BlendShapeBasis, ShapeError> {
    let doc: JsonBasis = serde_json::from_str(text).map_err(|e| ShapeError::Container(e.to_string()))?;
    if doc.format != "avbasis" || doc.version != BASIS_VERSION {
        return Err(ShapeError::Container(format!("unsupported {} v{}", doc.format, doc.version)));
    }
    doc.basis.validate()?;
    Ok(doc.basis)
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&(v as f32).to_le_bytes());
}

fn put_vec3(buf: &mut Vec<u8>, v: &Vec3) {
    put_f32(buf, v.x);
    put_f32(buf, v.y);
    put_f32(buf, v.z);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], ShapeError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ShapeError::Container(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ShapeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f64, ShapeError> {
        let v = f32::from_le_bytes(self.take(4)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(ShapeError::Container(format!("non-finite value before byte {}", self.pos)));
        }
        Ok(v as f64)
    }

    fn vec3(&mut self) -> Result<Vec3, ShapeError> {
        Ok(Vec3::new(self.f32()?, self.f32()?, self.f32()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_basis() -> BlendShapeBasis {
        let rest = Mesh::with_computed_normals(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.25),
            ],
            vec![vec![0, 1, 2, 3]],
            Some(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        )
        .unwrap();
        BlendShapeBasis::new(
            rest,
            vec![vec![Vec3::new(0.5, 0.25, -0.125); 4], vec![Vec3::new(0.0, 1.0, 0.0); 4]],
            vec!["weight".into(), "belly".into()],
            vec![(-1.0, 1.0), (-0.5, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip_of_f32_exact_values() {
        let basis = sample_basis();
        let mut buf = Vec::new();
        write_basis(&basis, &mut buf).unwrap();
        assert_eq!(&buf[..8], BASIS_MAGIC);
        let back = read_basis(&buf[..]).unwrap();
        assert_eq!(back.attribute_names, basis.attribute_names);
        assert_eq!(back.attributes, basis.attributes);
        assert_eq!(back.weight_bounds, basis.weight_bounds);
        assert_eq!(back.rest_mesh.vertices, basis.rest_mesh.vertices);
        assert_eq!(back.rest_mesh.faces, basis.rest_mesh.faces);
        assert_eq!(back.rest_mesh.uvs, basis.rest_mesh.uvs);
    }

    #[test]
    fn truncated_and_corrupt_inputs_are_errors() {
        let mut buf = Vec::new();
        write_basis(&sample_basis(), &mut buf).unwrap();
        for cut in [0, 7, 12, 30, buf.len() - 1] {
            assert!(read_basis(&buf[..cut]).is_err(), "cut at {cut}");
        }
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(read_basis(&bad[..]), Err(ShapeError::Container(_))));
        let mut extra = buf;
        extra.push(0);
        assert!(read_basis(&extra[..]).is_err());
    }

    #[test]
    fn json_form_is_lossless() {
        let mut basis = sample_basis();
        basis.attributes[0][1] = Vec3::new(0.1, 1.0 / 3.0, std::f64::consts::PI);
        let text = write_basis_json(&basis).unwrap();
        assert_eq!(read_basis_json(&text).unwrap(), basis);
    }
}
