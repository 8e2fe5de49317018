//! Linear blend skinning, body-to-cloth weight transfer and cloth
//! penetration resolution.

mod kdtree;
mod penetration;

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{forward_kinematics, GeometryError, Mesh, Pose, Skeleton, Transform, Vec3};

pub use kdtree::KdTree;
pub use penetration::{non_manifold_edges, resolve_penetration, winding_number, SurfaceQuery};

pub const MAX_INFLUENCES: usize = 4;
pub const DEFAULT_EPSILON: f64 = 0.002;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkinError {
    #[error("binding covers {binding} vertices but the mesh has {mesh}")]
    BindingMismatch { mesh: usize, binding: usize },
    #[error("vertex {vertex} references joint {joint}, skeleton has {joints}")]
    InvalidJoint { vertex: usize, joint: usize, joints: usize },
    #[error("vertex {vertex} has a negative or non-finite weight")]
    InvalidWeight { vertex: usize },
    #[error("vertex {vertex} has no positive weight")]
    NoInfluence { vertex: usize },
    #[error("body mesh is empty")]
    EmptyBody,
    #[error("body mesh is not closed and manifold; offending edges: {edges:?}")]
    NonManifold { edges: Vec<(u32, u32)> },
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-vertex joint influences relative to a bind pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinBinding {
    influences: Vec<Vec<(usize, f64)>>,
    bind_skeleton: Skeleton,
    bind_pose: Pose,
}

impl SkinBinding {
    /// Drops zero weights, keeps the four largest (ties to the lower joint
    /// index) and renormalizes each vertex to sum to one.
    pub fn new(skeleton: Skeleton, bind_pose: Pose, raw: Vec<Vec<(usize, f64)>>) -> Result<Self, SkinError> {
        bind_pose.validate(&skeleton)?;
        let joints = skeleton.len();
        let influences = raw
            .into_iter()
            .enumerate()
            .map(|(vertex, mut list)| {
                for &(joint, w) in &list {
                    if joint >= joints {
                        return Err(SkinError::InvalidJoint { vertex, joint, joints });
                    }
                    if !(w >= 0.0 && w.is_finite()) {
                        return Err(SkinError::InvalidWeight { vertex });
                    }
                }
                list.sort_by_key(|&(j, _)| j);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(list.len());
                for (j, w) in list {
                    match merged.last_mut() {
                        Some(last) if last.0 == j => last.1 += w,
                        _ => merged.push((j, w)),
                    }
                }
                merged.retain(|&(_, w)| w > 0.0);
                merged.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                merged.truncate(MAX_INFLUENCES);
                let total: f64 = merged.iter().map(|p| p.1).sum();
                if !(total > 0.0) {
                    return Err(SkinError::NoInfluence { vertex });
                }
                for p in &mut merged {
                    p.1 /= total;
                }
                Ok(merged)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SkinBinding { influences, bind_skeleton: skeleton, bind_pose })
    }

    /// Binding at the skeleton's rest pose.
    pub fn at_rest(skeleton: Skeleton, raw: Vec<Vec<(usize, f64)>>) -> Result<Self, SkinError> {
        let pose = Pose::identity(skeleton.len());
        SkinBinding::new(skeleton, pose, raw)
    }

    pub fn influences(&self) -> &[Vec<(usize, f64)>] {
        &self.influences
    }

    pub fn vertex_count(&self) -> usize {
        self.influences.len()
    }

    pub fn bind_skeleton(&self) -> &Skeleton {
        &self.bind_skeleton
    }

    pub fn bind_pose(&self) -> &Pose {
        &self.bind_pose
    }

    /// Joint carrying the largest weight of a vertex.
    pub fn dominant_joint(&self, vertex: usize) -> usize {
        self.influences[vertex][0].0
    }

    /// Same influences on a subset of vertices, in the given order.
    pub fn select(&self, vertices: &[usize]) -> SkinBinding {
        SkinBinding {
            influences: vertices.iter().map(|&v| self.influences[v].clone()).collect(),
            bind_skeleton: self.bind_skeleton.clone(),
            bind_pose: self.bind_pose.clone(),
        }
    }

    fn check(&self, mesh: &Mesh) -> Result<(), SkinError> {
        if self.influences.len() != mesh.vertices.len() {
            return Err(SkinError::BindingMismatch {
                mesh: mesh.vertices.len(),
                binding: self.influences.len(),
            });
        }
        Ok(())
    }
}

/// Per-joint transforms `W_j(pose) * W_j(bind)^-1` as 3x3 linear part plus translation.
pub fn skinning_transforms(binding: &SkinBinding, pose: &Pose) -> Result<Vec<(Matrix3<f64>, Vec3)>, SkinError> {
    pose.validate(&binding.bind_skeleton)?;
    let posed = forward_kinematics(&binding.bind_skeleton, pose)?;
    let bind = forward_kinematics(&binding.bind_skeleton, &binding.bind_pose)?;
    Ok(posed
        .iter()
        .zip(&bind)
        .map(|(p, b)| {
            let t: Transform = *p * b.inverse();
            (t.rotation.to_rotation_matrix().into_inner() * t.uniform_scale, t.translation)
        })
        .collect())
}

/// Linear blend skinning. Normals, when present, are carried by the inverse
/// transpose of each vertex's blended linear map and renormalized.
pub fn skin_mesh(mesh: &Mesh, binding: &SkinBinding, pose: &Pose) -> Result<Mesh, SkinError> {
    binding.check(mesh)?;
    let transforms = skinning_transforms(binding, pose)?;
    let blended: Vec<(Matrix3<f64>, Vec3)> = binding
        .influences
        .par_iter()
        .map(|list| {
            let mut m = Matrix3::zeros();
            let mut t = Vec3::zeros();
            for &(j, w) in list {
                m += transforms[j].0 * w;
                t += transforms[j].1 * w;
            }
            (m, t)
        })
        .collect();
    let vertices = mesh
        .vertices
        .iter()
        .zip(&blended)
        .map(|(v, (m, t))| m * v + t)
        .collect();
    let normals = mesh.normals.as_ref().map(|ns| {
        ns.iter()
            .zip(&blended)
            .map(|(n, (m, _))| {
                let it = m.try_inverse().map_or(*m, |inv| inv.transpose());
                let out = it * n;
                if out.norm() > 0.0 { out.normalize() } else { *n }
            })
            .collect()
    });
    Ok(Mesh {
        vertices,
        faces: mesh.faces.clone(),
        normals,
        uvs: mesh.uvs.clone(),
    })
}

/// Nearest rest-pose body vertex of every cloth vertex (ties to the lower index).
pub fn nearest_vertices(body: &Mesh, cloth: &Mesh) -> Result<Vec<usize>, SkinError> {
    if body.vertices.is_empty() {
        return Err(SkinError::EmptyBody);
    }
    let tree = KdTree::new(&body.vertices);
    Ok(cloth
        .vertices
        .par_iter()
        .map(|p| tree.nearest(p).expect("non-empty body"))
        .collect())
}

/// Copies to each cloth vertex the weights of its nearest body vertex.
pub fn transfer_weights(body: &Mesh, body_binding: &SkinBinding, cloth: &Mesh) -> Result<SkinBinding, SkinError> {
    body_binding.check(body)?;
    Ok(body_binding.select(&nearest_vertices(body, cloth)?))
}

/// A garment ready to dress: exteriorized rest mesh plus transferred weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarmentAsset {
    pub mesh: Mesh,
    pub binding: Option<SkinBinding>,
    /// Named image references such as `albedo` and `normal`.
    pub texture_refs: BTreeMap<String, String>,
    pub offset_epsilon: f64,
}

/// Resolves penetration against the rest body, then transfers weights.
pub fn prepare_garment(
    body: &Mesh,
    body_binding: &SkinBinding,
    cloth: &Mesh,
    epsilon: f64,
    texture_refs: BTreeMap<String, String>,
) -> Result<GarmentAsset, SkinError> {
    let mesh = resolve_penetration(body, cloth, epsilon)?;
    let binding = transfer_weights(body, body_binding, &mesh)?;
    Ok(GarmentAsset {
        mesh,
        binding: Some(binding),
        texture_refs,
        offset_epsilon: epsilon,
    })
}
