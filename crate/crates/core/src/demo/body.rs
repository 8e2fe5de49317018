use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{rotation_between, Mesh, Skeleton, Vec3};
use crate::shape::{build_attribute_basis, AttributeSubset, BlendShapeBasis};
use crate::skin::SkinBinding;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Region {
    Head,
    Neck,
    Torso,
    UpperArm,
    LowerArm,
    Hand,
    UpperLeg,
    LowerLeg,
    Foot,
}

struct Capsule {
    region: Region,
    a: [f64; 3],
    b: [f64; 3],
    radius: f64,
}

const SEGMENTS: usize = 16;
const CAP_RINGS: usize = 4;

fn capsules() -> Vec<Capsule> {
    let c = |region, a, b, radius| Capsule { region, a, b, radius };
    let mut out = vec![
        c(Region::Torso, [0.0, 0.92, 0.0], [0.0, 1.38, 0.0], 0.14),
        c(Region::Neck, [0.0, 1.40, 0.0], [0.0, 1.54, 0.0], 0.05),
        c(Region::Head, [0.0, 1.62, 0.0], [0.0, 1.68, 0.0], 0.1),
    ];
    for s in [1.0, -1.0] {
        out.extend([
            c(Region::UpperArm, [0.17 * s, 1.42, 0.0], [0.46 * s, 1.42, 0.0], 0.05),
            c(Region::LowerArm, [0.46 * s, 1.42, 0.0], [0.70 * s, 1.42, 0.0], 0.04),
            c(Region::Hand, [0.72 * s, 1.42, 0.0], [0.80 * s, 1.42, 0.0], 0.035),
            c(Region::UpperLeg, [0.09 * s, 0.88, 0.0], [0.09 * s, 0.48, 0.0], 0.07),
            c(Region::LowerLeg, [0.09 * s, 0.46, 0.0], [0.09 * s, 0.07, 0.0], 0.05),
            c(Region::Foot, [0.09 * s, 0.04, -0.02], [0.09 * s, 0.035, 0.15], 0.035),
        ]);
    }
    out
}

/// Closed capsule around segment `a`-`b`: hemispherical caps joined by a
/// cylinder, `SEGMENTS` vertices per ring, outward-facing triangles.
fn capsule_mesh(a: Vec3, b: Vec3, radius: f64) -> (Vec<Vec3>, Vec<Vec<u32>>, Vec<[f64; 2]>) {
    let axis = b - a;
    let length = axis.norm();
    let rot = rotation_between(&Vec3::y(), &(axis / length));
    let body_rings = ((length / 0.05).ceil() as usize).max(1);
    // Profile from bottom pole to top pole: (height along axis, ring radius).
    let mut profile: Vec<(f64, f64)> = Vec::new();
    for k in 1..=CAP_RINGS {
        let t = -PI / 2.0 + PI / 2.0 * k as f64 / CAP_RINGS as f64;
        profile.push((radius * t.sin(), radius * t.cos()));
    }
    for k in 1..body_rings {
        profile.push((length * k as f64 / body_rings as f64, radius));
    }
    for k in 0..CAP_RINGS {
        let t = PI / 2.0 * k as f64 / CAP_RINGS as f64;
        profile.push((length + radius * t.sin(), radius * t.cos()));
    }
    let total = length + 2.0 * radius;
    let mut vertices = vec![a + rot * Vec3::new(0.0, -radius, 0.0)];
    let mut uvs = vec![[0.5, 0.0]];
    for &(h, r) in &profile {
        for s in 0..SEGMENTS {
            let phi = TAU * s as f64 / SEGMENTS as f64;
            vertices.push(a + rot * Vec3::new(r * phi.cos(), h, -r * phi.sin()));
            uvs.push([s as f64 / SEGMENTS as f64, (h + radius) / total]);
        }
    }
    vertices.push(a + rot * Vec3::new(0.0, length + radius, 0.0));
    uvs.push([0.5, 1.0]);
    let ring = |k: usize, s: usize| (1 + k * SEGMENTS + s % SEGMENTS) as u32;
    let top = (vertices.len() - 1) as u32;
    let mut faces = Vec::new();
    for s in 0..SEGMENTS {
        faces.push(vec![0, ring(0, s + 1), ring(0, s)]);
    }
    for k in 0..profile.len() - 1 {
        for s in 0..SEGMENTS {
            faces.push(vec![ring(k, s), ring(k, s + 1), ring(k + 1, s + 1), ring(k + 1, s)]);
        }
    }
    let last = profile.len() - 1;
    for s in 0..SEGMENTS {
        faces.push(vec![ring(last, s), ring(last, s + 1), top]);
    }
    (vertices, faces, uvs)
}

/// Rest body: one closed capsule per body part, in the humanoid rig's frame.
/// Returns the mesh and each vertex's region.
fn body_parts() -> (Mesh, Vec<(Region, Vec3, Vec3)>) {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut uvs = Vec::new();
    let mut info = Vec::new();
    for cap in capsules() {
        let (a, b) = (Vec3::from(cap.a), Vec3::from(cap.b));
        let (v, f, t) = capsule_mesh(a, b, cap.radius);
        let base = vertices.len() as u32;
        info.extend(std::iter::repeat_n((cap.region, a, b), v.len()));
        vertices.extend(v);
        uvs.extend(t);
        faces.extend(f.into_iter().map(|f| f.into_iter().map(|i| i + base).collect::<Vec<u32>>()));
    }
    let mesh = Mesh::with_computed_normals(vertices, faces, Some(uvs)).expect("demo body is valid");
    (mesh, info)
}

pub fn body_mesh() -> Mesh {
    body_parts().0
}

fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> (f64, Vec3) {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    let c = a + ab * t;
    ((p - c).norm(), c)
}

/// Distance-based automatic binding: each vertex weights the bones whose
/// segments lie within 4 cm of its nearest bone, falling off exponentially.
pub fn auto_binding(mesh: &Mesh, skeleton: &Skeleton) -> SkinBinding {
    let rest = skeleton.rest_positions();
    let bones: Vec<(usize, Vec3, Vec3)> = (0..skeleton.len())
        .filter_map(|j| {
            let tip = match skeleton.children(j).next() {
                Some(c) => rest[c],
                None => rest[j] + skeleton.joint(j).end_site?,
            };
            ((tip - rest[j]).norm() > 1e-9).then_some((j, rest[j], tip))
        })
        .collect();
    let raw = mesh
        .vertices
        .iter()
        .map(|p| {
            let dists: Vec<(usize, f64)> = bones.iter().map(|(j, a, b)| (*j, segment_distance(p, a, b).0)).collect();
            let best = dists.iter().fold(f64::INFINITY, |m, d| m.min(d.1));
            dists
                .into_iter()
                .filter(|d| d.1 - best < 0.04)
                .map(|(j, d)| (j, (-(d - best) / 0.01).exp()))
                .collect()
        })
        .collect();
    SkinBinding::at_rest(skeleton.clone(), raw).expect("auto binding is valid")
}

pub const ATTRIBUTE_NAMES: [&str; 7] = ["height", "weight", "muscle", "chest", "waist", "arm_length", "leg_length"];

fn attribute_field(name: &str, p: &Vec3, region: Region, a: &Vec3, b: &Vec3) -> Vec3 {
    let (_, c) = segment_distance(p, a, b);
    let radial = p - c;
    let limb = matches!(region, Region::UpperArm | Region::LowerArm | Region::UpperLeg | Region::LowerLeg);
    match name {
        "height" => Vec3::new(0.0, p.y * 0.08, 0.0),
        "weight" => match region {
            Region::Head | Region::Hand | Region::Foot => radial * 0.1,
            _ => radial * 0.3,
        },
        "muscle" if limb => radial * 0.25,
        "chest" if region == Region::Torso && p.y > 1.15 => {
            Vec3::new(radial.x * 0.1, 0.0, radial.z.max(0.0) * 0.4)
        }
        "waist" if region == Region::Torso => {
            let band = (-((p.y - 1.02) / 0.08).powi(2)).exp();
            Vec3::new(radial.x, 0.0, radial.z) * 0.35 * band
        }
        "arm_length" if matches!(region, Region::UpperArm | Region::LowerArm | Region::Hand) => {
            Vec3::new((p.x.abs() - 0.17).max(0.0) * 0.12 * p.x.signum(), 0.0, 0.0)
        }
        "leg_length" if matches!(region, Region::UpperLeg | Region::LowerLeg | Region::Foot) => {
            Vec3::new(0.0, -(0.88 - p.y).max(0.0) * 0.1, 0.0)
        }
        _ => Vec3::zeros(),
    }
}

/// Seven-attribute basis learned from a synthetic corpus: for each attribute,
/// eight samples varying that trait plus small seeded noise.
pub fn body_basis() -> BlendShapeBasis {
    let (rest, info) = body_parts();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let corpus: Vec<AttributeSubset> = ATTRIBUTE_NAMES
        .iter()
        .map(|name| {
            let field: Vec<Vec3> = rest
                .vertices
                .iter()
                .zip(&info)
                .map(|(p, (region, a, b))| attribute_field(name, p, *region, a, b))
                .collect();
            let samples = [-1.0, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|&t| {
                    let mut m = rest.clone();
                    for (v, f) in m.vertices.iter_mut().zip(&field) {
                        let noise = Vec3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        );
                        *v += f * t + noise * 1e-4;
                    }
                    m
                })
                .collect();
            AttributeSubset { name: name.to_string(), samples }
        })
        .collect();
    build_attribute_basis(&corpus, &rest).expect("demo corpus has variance")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::humanoid_skeleton;
    use crate::skin::non_manifold_edges;

    #[test]
    fn body_is_closed_and_manifold() {
        let m = body_mesh();
        assert!(non_manifold_edges(&m).is_empty());
        assert!(m.vertex_count() > 1000);
    }

    #[test]
    fn capsule_is_outward() {
        let (v, f, _) = capsule_mesh(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), 0.2);
        let mesh = Mesh::new(v, f, None, None).unwrap();
        let tris = mesh.triangles();
        let w = crate::skin::winding_number(&mesh.vertices, &tris, &Vec3::new(0.5, 0.5, 0.0));
        assert!((w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn binding_prefers_own_bone() {
        let skel = humanoid_skeleton();
        let m = body_mesh();
        let b = auto_binding(&m, &skel);
        let head = skel.find("head").unwrap();
        let top = m
            .vertices
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v.y > acc.1 { (i, v.y) } else { acc })
            .0;
        assert_eq!(b.dominant_joint(top), head);
    }

    #[test]
    fn basis_has_seven_named_attributes() {
        let basis = body_basis();
        assert_eq!(basis.attribute_names, ATTRIBUTE_NAMES.map(String::from).to_vec());
        for (lo, hi) in &basis.weight_bounds {
            assert!(*lo <= 0.0 && *hi >= 0.0 && hi - lo > 1.0);
        }
    }
}
