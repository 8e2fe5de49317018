use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{GeometryError, Mesh, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ObjError {
    pub line: usize,
    pub kind: ObjErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjErrorKind {
    #[error("unknown record {0:?}")]
    UnknownRecord(String),
    #[error("expected {expected} numbers, found {found}")]
    ArgumentCount { expected: usize, found: usize },
    #[error("invalid number {0:?}")]
    InvalidNumber(String),
    #[error("invalid face corner {0:?}")]
    InvalidCorner(String),
    #[error("{what} index {index} out of range (1..={count})")]
    IndexOutOfRange { what: &'static str, index: i64, count: usize },
    #[error("face has {0} corners (expected 3 or 4)")]
    FaceArity(usize),
    #[error(transparent)]
    Geometry(GeometryError),
}

/// Parses `v`, `vn`, `vt` and `f` records. `o`, `g`, `s`, `usemtl` and
/// `mtllib` are ignored. Texture and normal indices are attached to the
/// position they are paired with; the first pairing of a vertex wins, and
/// vertices no face pairs take the attribute with the same index.
pub fn import_obj(text: &str) -> Result<Mesh, ObjError> {
    let mut positions: Vec<Vec3> = Vec::new();
    let mut normals: Vec<Vec3> = Vec::new();
    let mut texcoords: Vec<[f64; 2]> = Vec::new();
    let mut faces: Vec<(usize, Vec<(usize, Option<usize>, Option<usize>)>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |kind| ObjError { line, kind };
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(keyword) = tokens.next() else { continue };
        let args: Vec<&str> = tokens.collect();
        match keyword {
            "v" => positions.push(Vec3::from(numbers::<3>(&args, 3..=4).map_err(err)?)),
            "vn" => normals.push(Vec3::from(numbers::<3>(&args, 3..=3).map_err(err)?)),
            "vt" => {
                let [u, v, _] = numbers::<3>(&args, 2..=3).map_err(err)?;
                texcoords.push([u, v]);
            }
            "f" => {
                if args.len() != 3 && args.len() != 4 {
                    return Err(err(ObjErrorKind::FaceArity(args.len())));
                }
                let corners = args.iter().map(|c| corner(c)).collect::<Result<Vec<_>, _>>().map_err(err)?;
                let resolve = |idx: i64, what: &'static str, count: usize| -> Result<usize, ObjError> {
                    let r = if idx > 0 { idx - 1 } else { count as i64 + idx };
                    if idx == 0 || r < 0 || r >= count as i64 {
                        return Err(err(ObjErrorKind::IndexOutOfRange { what, index: idx, count }));
                    }
                    Ok(r as usize)
                };
                let mut face = Vec::with_capacity(corners.len());
                for (v, t, n) in corners {
                    let v = resolve(v, "vertex", positions.len())?;
                    let t = t.map(|t| resolve(t, "texture", texcoords.len())).transpose()?;
                    let n = n.map(|n| resolve(n, "normal", normals.len())).transpose()?;
                    face.push((v, t, n));
                }
                faces.push((line, face));
            }
            "o" | "g" | "s" | "usemtl" | "mtllib" => {}
            other => return Err(err(ObjErrorKind::UnknownRecord(other.to_string()))),
        }
    }
    let n = positions.len();
    let mut vertex_uv: Vec<Option<[f64; 2]>> = vec![None; n];
    let mut vertex_normal: Vec<Option<Vec3>> = vec![None; n];
    for (_, face) in &faces {
        for &(v, t, nrm) in face {
            if let (Some(t), None) = (t, vertex_uv[v]) {
                vertex_uv[v] = Some(texcoords[t]);
            }
            if let (Some(k), None) = (nrm, vertex_normal[v]) {
                vertex_normal[v] = Some(normals[k]);
            }
        }
    }
    for v in 0..n {
        if vertex_uv[v].is_none() {
            vertex_uv[v] = texcoords.get(v).copied();
        }
        if vertex_normal[v].is_none() {
            vertex_normal[v] = normals.get(v).copied();
        }
    }
    let uvs = (n > 0 && vertex_uv.iter().all(Option::is_some))
        .then(|| vertex_uv.into_iter().map(Option::unwrap).collect());
    let normals = (n > 0 && vertex_normal.iter().all(Option::is_some)).then(|| {
        vertex_normal
            .into_iter()
            .map(|v| {
                let v = v.unwrap();
                let len = v.norm();
                if (len - 1.0).abs() < 1e-9 {
                    v
                } else if len > 0.0 {
                    v / len
                } else {
                    Vec3::y()
                }
            })
            .collect()
    });
    let face_lines: Vec<usize> = faces.iter().map(|f| f.0).collect();
    let faces: Vec<Vec<u32>> = faces
        .into_iter()
        .map(|(_, f)| f.into_iter().map(|c| c.0 as u32).collect())
        .collect();
    Mesh::new(positions, faces, normals, uvs).map_err(|e| {
        let line = match &e {
            GeometryError::FaceArity { face, .. }
            | GeometryError::FaceIndexOutOfRange { face, .. }
            | GeometryError::RepeatedFaceIndex { face } => face_lines[*face],
            _ => 0,
        };
        ObjError { line, kind: ObjErrorKind::Geometry(e) }
    })
}

fn numbers<const N: usize>(args: &[&str], allowed: std::ops::RangeInclusive<usize>) -> Result<[f64; N], ObjErrorKind> {
    if !allowed.contains(&args.len()) {
        return Err(ObjErrorKind::ArgumentCount { expected: *allowed.start(), found: args.len() });
    }
    let mut out = [0.0; N];
    for (slot, a) in out.iter_mut().zip(args) {
        let v: f64 = a.parse().map_err(|_| ObjErrorKind::InvalidNumber(a.to_string()))?;
        if !v.is_finite() {
            return Err(ObjErrorKind::InvalidNumber(a.to_string()));
        }
        *slot = v;
    }
    Ok(out)
}

fn corner(token: &str) -> Result<(i64, Option<i64>, Option<i64>), ObjErrorKind> {
    let bad = || ObjErrorKind::InvalidCorner(token.to_string());
    let parts: Vec<&str> = token.split('/').collect();
    if parts.len() > 3 {
        return Err(bad());
    }
    let int = |s: &str| s.parse::<i64>().map_err(|_| bad());
    let opt = |s: Option<&&str>| match s {
        None | Some(&"") => Ok(None),
        Some(s) => int(s).map(Some),
    };
    Ok((int(parts[0])?, opt(parts.get(1))?, opt(parts.get(2))?))
}

/// Writes positions, then `vt` and `vn` when present, then faces with
/// matching 1-based indices. Numbers use shortest round-trip formatting.
pub fn export_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    if let Some(uvs) = &mesh.uvs {
        for t in uvs {
            let _ = writeln!(out, "vt {} {}", t[0], t[1]);
        }
    }
    if let Some(normals) = &mesh.normals {
        for n in normals {
            let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
        }
    }
    let (has_t, has_n) = (mesh.uvs.is_some(), mesh.normals.is_some());
    for face in &mesh.faces {
        out.push('f');
        for &i in face {
            let i = i + 1;
            let _ = match (has_t, has_n) {
                (false, false) => write!(out, " {i}"),
                (true, false) => write!(out, " {i}/{i}"),
                (false, true) => write!(out, " {i}//{i}"),
                (true, true) => write!(out, " {i}/{i}/{i}"),
            };
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> Mesh {
        Mesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![vec![0, 1, 2, 3]],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn unit_quad_round_trip() {
        let m = quad();
        let text = export_obj(&m);
        assert_eq!(text, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
        assert_eq!(import_obj(&text).unwrap(), m);
    }

    #[test]
    fn attributes_round_trip() {
        let mut m = quad();
        m.recompute_normals();
        m.uvs = Some(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let back = import_obj(&export_obj(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn zero_index_is_positioned_error() {
        let e = import_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").unwrap_err();
        assert_eq!(e.line, 4);
        assert!(matches!(e.kind, ObjErrorKind::IndexOutOfRange { index: 0, .. }));
    }

    #[test]
    fn negative_indices_and_comments() {
        let m = import_obj("# tri\no thing\nv 0 0 0\nv 1 0 0 # x\nv 0 1 0\ng grp\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.faces, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn malformed_records() {
        assert_eq!(import_obj("v 1 2\n").unwrap_err().line, 1);
        assert!(matches!(import_obj("\nv a b c").unwrap_err(), ObjError { line: 2, kind: ObjErrorKind::InvalidNumber(_) }));
        assert!(matches!(import_obj("zz 1").unwrap_err().kind, ObjErrorKind::UnknownRecord(_)));
        assert!(matches!(import_obj("v 0 0 0\nf 1/x 1 1").unwrap_err().kind, ObjErrorKind::InvalidCorner(_)));
        assert!(matches!(
            import_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 1 2").unwrap_err(),
            ObjError { line: 5, kind: ObjErrorKind::Geometry(_) }
        ));
        assert!(matches!(import_obj("v 0 0 nan").unwrap_err().kind, ObjErrorKind::InvalidNumber(_)));
    }
}
