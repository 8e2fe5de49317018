use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Indexed polygon mesh with triangle or quad faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<Vec<u32>>,
    pub normals: Option<Vec<Vec3>>,
    pub uvs: Option<Vec<[f64; 2]>>,
}

impl Mesh {
    /// Builds a mesh and checks every structural invariant.
    pub fn new(
        vertices: Vec<Vec3>,
        faces: Vec<Vec<u32>>,
        normals: Option<Vec<Vec3>>,
        uvs: Option<Vec<[f64; 2]>>,
    ) -> Result<Self, GeometryError> {
        let mesh = Mesh {
            vertices,
            faces,
            normals,
            uvs,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Convenience constructor that fills in area-weighted normals.
    pub fn with_computed_normals(
        vertices: Vec<Vec3>,
        faces: Vec<Vec<u32>>,
        uvs: Option<Vec<[f64; 2]>>,
    ) -> Result<Self, GeometryError> {
        let mut mesh = Mesh::new(vertices, faces, None, uvs)?;
        mesh.recompute_normals();
        Ok(mesh)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len();
        for (fi, face) in self.faces.iter().enumerate() {
            if face.len() != 3 && face.len() != 4 {
                return Err(GeometryError::FaceArity {
                    face: fi,
                    arity: face.len(),
                });
            }
            for (k, &idx) in face.iter().enumerate() {
                if idx as usize >= n {
                    return Err(GeometryError::FaceIndexOutOfRange {
                        face: fi,
                        index: idx as usize,
                        vertex_count: n,
                    });
                }
                if face[..k].contains(&idx) {
                    return Err(GeometryError::RepeatedFaceIndex { face: fi });
                }
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(GeometryError::AttributeCount {
                    attribute: "normals",
                    expected: n,
                    actual: normals.len(),
                });
            }
            if let Some(i) = normals.iter().position(|v| (v.norm() - 1.0).abs() > 1e-6) {
                return Err(GeometryError::NonUnitNormal { vertex: i });
            }
        }
        if let Some(uvs) = &self.uvs {
            if uvs.len() != n {
                return Err(GeometryError::AttributeCount {
                    attribute: "uvs",
                    expected: n,
                    actual: uvs.len(),
                });
            }
        }
        if let Some(i) = self.vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFiniteVertex { vertex: i });
        }
        Ok(())
    }

    /// Fan triangulation of every face, preserving winding.
    pub fn triangles(&self) -> Vec<[u32; 3]> {
        let mut out = Vec::with_capacity(self.faces.len() * 2);
        for face in &self.faces {
            for k in 1..face.len() - 1 {
                out.push([face[0], face[k], face[k + 1]]);
            }
        }
        out
    }

    /// Area-weighted vertex normals. Isolated or degenerate vertices get +Y.
    pub fn recompute_normals(&mut self) {
        self.normals = Some(vertex_normals(&self.vertices, &self.faces));
    }

    /// Concatenates meshes into one, offsetting face indices. Attributes are kept
    /// only when every part carries them.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a Mesh>) -> Mesh {
        let parts: Vec<&Mesh> = parts.into_iter().collect();
        let keep_normals = parts.iter().all(|m| m.normals.is_some());
        let keep_uvs = parts.iter().all(|m| m.uvs.is_some());
        let mut out = Mesh {
            vertices: Vec::new(),
            faces: Vec::new(),
            normals: keep_normals.then(Vec::new),
            uvs: keep_uvs.then(Vec::new),
        };
        for part in parts {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&part.vertices);
            out.faces
                .extend(part.faces.iter().map(|f| f.iter().map(|i| i + base).collect()));
            if let (Some(dst), Some(src)) = (out.normals.as_mut(), part.normals.as_ref()) {
                dst.extend_from_slice(src);
            }
            if let (Some(dst), Some(src)) = (out.uvs.as_mut(), part.uvs.as_ref()) {
                dst.extend_from_slice(src);
            }
        }
        out
    }
}

pub fn vertex_normals(vertices: &[Vec3], faces: &[Vec<u32>]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for face in faces {
        // Newell's method gives twice the area-weighted normal for planar polygons.
        let mut n = Vec3::zeros();
        for k in 0..face.len() {
            let a = vertices[face[k] as usize];
            let b = vertices[face[(k + 1) % face.len()] as usize];
            n += a.cross(&b);
        }
        for &i in face {
            acc[i as usize] += n;
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 1e-300 && len.is_finite() {
                n / len
            } else {
                Vec3::y()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> Mesh {
        Mesh::with_computed_normals(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![vec![0, 1, 2, 3]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn quad_normals_point_along_z() {
        let m = quad();
        for n in m.normals.unwrap() {
            assert!((n - Vec3::z()).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = Mesh::new(vec![Vec3::zeros(); 2], vec![vec![0, 1, 2]], None, None).unwrap_err();
        assert!(matches!(err, GeometryError::FaceIndexOutOfRange { index: 2, .. }));
    }

    #[test]
    fn rejects_repeated_index_and_bad_arity() {
        let v = vec![Vec3::zeros(); 5];
        assert!(matches!(
            Mesh::new(v.clone(), vec![vec![0, 1, 1]], None, None),
            Err(GeometryError::RepeatedFaceIndex { face: 0 })
        ));
        assert!(matches!(
            Mesh::new(v, vec![vec![0, 1, 2, 3, 4]], None, None),
            Err(GeometryError::FaceArity { arity: 5, .. })
        ));
    }

    #[test]
    fn rejects_non_unit_normals() {
        let mut m = quad();
        m.normals.as_mut().unwrap()[2] *= 2.0;
        assert!(matches!(m.validate(), Err(GeometryError::NonUnitNormal { vertex: 2 })));
    }

    #[test]
    fn quad_triangulates_into_two() {
        assert_eq!(quad().triangles(), vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn merge_offsets_indices() {
        let q = quad();
        let m = Mesh::merge([&q, &q]);
        assert_eq!(m.vertex_count(), 8);
        assert_eq!(m.faces[1], vec![4, 5, 6, 7]);
        m.validate().unwrap();
    }
}
