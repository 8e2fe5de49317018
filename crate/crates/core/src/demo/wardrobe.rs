use std::f64::consts::{FRAC_PI_2, TAU};

use crate::geometry::{Mesh, Vec3};

const SEGMENTS: usize = 24;

/// Open elliptical tube around a vertical axis through `(x, z)`.
fn tube(x: f64, z: f64, y0: f64, y1: f64, rx: f64, rz: f64, rings: usize) -> (Vec<Vec3>, Vec<Vec<u32>>, Vec<[f64; 2]>) {
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    for k in 0..=rings {
        let t = k as f64 / rings as f64;
        let y = y0 + (y1 - y0) * t;
        for s in 0..=SEGMENTS {
            let phi = TAU * s as f64 / SEGMENTS as f64;
            vertices.push(Vec3::new(x + rx * phi.cos(), y, z - rz * phi.sin()));
            uvs.push([s as f64 / SEGMENTS as f64, t]);
        }
    }
    let stride = (SEGMENTS + 1) as u32;
    let mut faces = Vec::new();
    for k in 0..rings as u32 {
        for s in 0..SEGMENTS as u32 {
            let a = k * stride + s;
            faces.push(vec![a, a + 1, a + stride + 1, a + stride]);
        }
    }
    (vertices, faces, uvs)
}

fn assemble(parts: Vec<(Vec<Vec3>, Vec<Vec<u32>>, Vec<[f64; 2]>)>) -> Mesh {
    let meshes: Vec<Mesh> = parts
        .into_iter()
        .map(|(v, f, t)| Mesh::with_computed_normals(v, f, Some(t)).expect("garment is valid"))
        .collect();
    let mut merged = Mesh::merge(&meshes);
    merged.recompute_normals();
    merged
}

/// Sleeveless top hugging the lower torso slightly too tightly.
pub fn shirt() -> Mesh {
    assemble(vec![tube(0.0, 0.0, 0.98, 1.30, 0.136, 0.132, 8)])
}

/// Two leg tubes from mid-shin to the upper thigh.
pub fn trousers() -> Mesh {
    assemble(vec![
        tube(0.09, 0.0, 0.3, 0.74, 0.066, 0.066, 11),
        tube(-0.09, 0.0, 0.3, 0.74, 0.066, 0.066, 11),
    ])
}

/// Dome over the top of the head, closed at the crown.
pub fn cap() -> Mesh {
    let (center, radius, rings) = (Vec3::new(0.0, 1.69, 0.0), 0.097, 6);
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    for k in 0..rings {
        let t = FRAC_PI_2 * k as f64 / rings as f64;
        for s in 0..=SEGMENTS {
            let phi = TAU * s as f64 / SEGMENTS as f64;
            let r = radius * t.cos();
            vertices.push(center + Vec3::new(r * phi.cos(), radius * t.sin(), -r * phi.sin()));
            uvs.push([s as f64 / SEGMENTS as f64, k as f64 / rings as f64]);
        }
    }
    vertices.push(center + Vec3::new(0.0, radius, 0.0));
    uvs.push([0.5, 1.0]);
    let stride = (SEGMENTS + 1) as u32;
    let top = (vertices.len() - 1) as u32;
    let mut faces = Vec::new();
    for k in 0..rings as u32 - 1 {
        for s in 0..SEGMENTS as u32 {
            let a = k * stride + s;
            faces.push(vec![a, a + 1, a + stride + 1, a + stride]);
        }
    }
    let last = (rings as u32 - 1) * stride;
    for s in 0..SEGMENTS as u32 {
        faces.push(vec![last + s, last + s + 1, top]);
    }
    Mesh::with_computed_normals(vertices, faces, Some(uvs)).expect("cap is valid")
}
