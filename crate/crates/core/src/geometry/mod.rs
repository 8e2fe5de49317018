//! Shared geometric types: meshes, skeletons, poses and rigid transforms.
//!
//! Conventions: meters, Y-up, right-handed. Rotations are stored as unit
//! quaternions; matrices are derived on demand.

mod mesh;
mod primitives;
mod skeleton;
mod transform;

use thiserror::Error;

pub use mesh::{vertex_normals, Mesh};
pub use primitives::{icosphere, sphere};
pub use skeleton::{forward_kinematics, joint_positions, normalize_name, Joint, Pose, Skeleton};
pub use transform::{renormalize, rotation_between, Transform};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Quat = nalgebra::UnitQuaternion<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("face {face} has {arity} vertices (expected 3 or 4)")]
    FaceArity { face: usize, arity: usize },
    #[error("face {face} references vertex {index} but the mesh has {vertex_count}")]
    FaceIndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("face {face} repeats a vertex index")]
    RepeatedFaceIndex { face: usize },
    #[error("{attribute} count {actual} does not match vertex count {expected}")]
    AttributeCount {
        attribute: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("normal of vertex {vertex} is not unit length")]
    NonUnitNormal { vertex: usize },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFiniteVertex { vertex: usize },
    #[error("skeleton has no joints")]
    EmptySkeleton,
    #[error("joint {joint} has parent {parent}, parents must precede children")]
    ParentOrder { joint: usize, parent: usize },
    #[error("skeleton must have exactly one root at index 0, found {0} parentless joints")]
    RootCount(usize),
    #[error("duplicate joint name {0:?}")]
    DuplicateJointName(String),
    #[error("joint {0:?} has a non-finite offset")]
    NonFiniteOffset(String),
    #[error("pose has {pose} rotations but the skeleton has {skeleton} joints")]
    PoseMismatch { pose: usize, skeleton: usize },
    #[error("rotation of joint {joint} is not unit norm")]
    NonUnitRotation { joint: usize },
}
