use std::ops::Mul;

use super::{Quat, Vec3};

/// Similarity transform: `x -> scale * (rotation * x) + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Quat,
    pub translation: Vec3,
    pub uniform_scale: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        rotation: Quat::new_unchecked(nalgebra::Quaternion::new(1.0, 0.0, 0.0, 0.0)),
        translation: Vec3::new(0.0, 0.0, 0.0),
        uniform_scale: 1.0,
    };

    pub fn new(rotation: Quat, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
            uniform_scale: 1.0,
        }
    }

    pub fn from_rotation(rotation: Quat) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Quat::identity(), translation)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.uniform_scale = scale;
        self
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.uniform_scale + self.translation
    }

    /// Rotates and scales a direction; translation is ignored.
    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v * self.uniform_scale
    }

    pub fn inverse(&self) -> Transform {
        let rotation = self.rotation.inverse();
        let uniform_scale = 1.0 / self.uniform_scale;
        let translation = -(rotation * self.translation) * uniform_scale;
        Transform {
            rotation,
            translation,
            uniform_scale,
        }
    }

    /// Row-major 4x4 matrix view.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let r = self.rotation.to_rotation_matrix();
        let m = r.matrix() * self.uniform_scale;
        let t = self.translation;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)], t.x],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)], t.y],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

/// `a * b` applies `b` first, then `a`.
impl Mul for Transform {
    type Output = Transform;

    fn mul(self, rhs: Transform) -> Transform {
        Transform {
            rotation: self.rotation * rhs.rotation,
            translation: self.transform_point(&rhs.translation),
            uniform_scale: self.uniform_scale * rhs.uniform_scale,
        }
    }
}

impl Mul for &Transform {
    type Output = Transform;

    fn mul(self, rhs: &Transform) -> Transform {
        *self * *rhs
    }
}

/// Returns `q` renormalized; re-normalizing an already unit quaternion is a no-op up to rounding.
pub fn renormalize(q: &Quat) -> Quat {
    Quat::new_normalize(q.into_inner())
}

/// Minimal rotation mapping unit vector `a` onto unit vector `b`.
///
/// For antiparallel inputs the result is a half turn about the axis obtained by
/// crossing `a` with the coordinate axis least aligned with it.
pub fn rotation_between(a: &Vec3, b: &Vec3) -> Quat {
    let dot = a.dot(b).clamp(-1.0, 1.0);
    if dot <= -1.0 + 1e-8 {
        let axis = a.cross(&least_aligned_axis(a)).normalize();
        return Quat::from_axis_angle(&nalgebra::Unit::new_unchecked(axis), std::f64::consts::PI);
    }
    // Half-way quaternion: q = (1 + a.b, a x b), normalized.
    let c = a.cross(b);
    Quat::new_normalize(nalgebra::Quaternion::new(1.0 + dot, c.x, c.y, c.z))
}

fn least_aligned_axis(a: &Vec3) -> Vec3 {
    let ax = a.x.abs();
    let ay = a.y.abs();
    let az = a.z.abs();
    if ax <= ay && ax <= az {
        Vec3::x()
    } else if ay <= az {
        Vec3::y()
    } else {
        Vec3::z()
    }
}
