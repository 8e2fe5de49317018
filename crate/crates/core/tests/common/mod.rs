#![allow(dead_code)]

use avatar_core::bvh::{Channel, ChannelSpec, MotionClip};
use avatar_core::geometry::{Joint, Mesh, Skeleton, Vec3};
use rand::seq::IndexedRandom;
use rand::Rng;

const ROTATIONS: [Channel; 3] = [Channel::Xrotation, Channel::Yrotation, Channel::Zrotation];
const POSITIONS: [Channel; 3] = [Channel::Xposition, Channel::Yposition, Channel::Zposition];

fn vec3(rng: &mut impl Rng, scale: f64) -> Vec3 {
    Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

/// Random tree with joints in depth-first order.
pub fn random_skeleton(rng: &mut impl Rng, max_joints: usize) -> Skeleton {
    let n = rng.random_range(1..=max_joints);
    let mut path: Vec<usize> = Vec::new();
    let joints = (0..n)
        .map(|k| {
            let parent = (k > 0).then(|| {
                let depth = rng.random_range(0..path.len());
                path.truncate(depth + 1);
                path[depth]
            });
            path.push(k);
            Joint {
                name: format!("J{k}_{}", rng.random_range(0..1000)),
                parent,
                rest_offset: vec3(rng, 20.0),
                end_site: rng.random_bool(0.3).then(|| vec3(rng, 10.0)),
            }
        })
        .collect();
    Skeleton::new(joints).unwrap()
}

/// Random channel layout: shuffled rotation axes, optional positions on any joint.
pub fn random_channels(rng: &mut impl Rng, joints: usize) -> ChannelSpec {
    let per_joint = (0..joints)
        .map(|k| {
            let mut rot: Vec<Channel> = ROTATIONS.to_vec();
            for i in (1..3).rev() {
                rot.swap(i, rng.random_range(0..=i));
            }
            rot.truncate(rng.random_range(if k == 0 { 3 } else { 0 }..=3));
            let mut out = Vec::new();
            if k == 0 || rng.random_bool(0.1) {
                out.extend(POSITIONS);
            }
            out.extend(rot);
            out
        })
        .collect();
    ChannelSpec::new(per_joint).unwrap()
}

pub fn random_clip(rng: &mut impl Rng, max_joints: usize, max_frames: usize) -> MotionClip {
    let skeleton = random_skeleton(rng, max_joints);
    let channels = random_channels(rng, skeleton.len());
    let frames = (0..rng.random_range(0..=max_frames))
        .map(|_| (0..channels.total()).map(|_| rng.random_range(-180.0..180.0)).collect())
        .collect();
    let frame_time = *[1.0 / 30.0, 1.0 / 60.0, 0.008333, 0.1].choose(rng).unwrap();
    MotionClip::new(skeleton, channels, frame_time, frames).unwrap()
}

/// Applies one random text mutation.
pub fn mutate(rng: &mut impl Rng, text: &str) -> String {
    let mut bytes = text.as_bytes().to_vec();
    if bytes.is_empty() {
        return "{".into();
    }
    let at = rng.random_range(0..bytes.len());
    match rng.random_range(0..8) {
        0 => bytes[at] = rng.random(),
        1 => {
            bytes.remove(at);
        }
        2 => {
            let end = (at + rng.random_range(1..40)).min(bytes.len());
            let chunk = bytes[at..end].to_vec();
            let to = rng.random_range(0..bytes.len());
            bytes.splice(to..to, chunk);
        }
        3 => bytes.truncate(at),
        4 => {
            let tokens: [&[u8]; 12] =
                [b"{", b"}", b"JOINT X", b"End Site", b"CHANNELS 9", b"nan", b"-inf", b"1e999", b"\n", b"MOTION", b"Frames: 99999999999", b"OFFSET"];
            let tok = tokens.choose(rng).unwrap();
            bytes.splice(at..at, tok.iter().copied());
        }
        5 => {
            let end = (at + rng.random_range(1..200)).min(bytes.len());
            bytes.drain(at..end);
        }
        6 => {
            if bytes[at].is_ascii_digit() {
                bytes[at] = b"0123456789-.eE"[rng.random_range(0..14)];
            }
        }
        _ => {
            let lines: Vec<&[u8]> = text.as_bytes().split(|&b| b == b'\n').collect();
            let line = lines.choose(rng).unwrap();
            bytes.splice(at..at, line.iter().copied().chain(std::iter::once(b'\n')));
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

/// Random triangle/quad soup with valid indices, unit normals and finite values.
pub fn random_mesh(rng: &mut impl Rng, with_normals: bool, with_uvs: bool) -> Mesh {
    let n = rng.random_range(4..60);
    let vertices: Vec<Vec3> = (0..n).map(|_| vec3(rng, 1e3) * rng.random_range(1e-6..1.0)).collect();
    let faces: Vec<Vec<u32>> = (0..rng.random_range(1..80))
        .map(|_| {
            let arity = rng.random_range(3..=4);
            rand::seq::index::sample(rng, n, arity).into_iter().map(|i| i as u32).collect()
        })
        .collect();
    let normals = with_normals.then(|| (0..n).map(|_| (vec3(rng, 1.0) + Vec3::new(2.0, 0.0, 0.0)).normalize()).collect());
    let uvs = with_uvs.then(|| (0..n).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect());
    Mesh::new(vertices, faces, normals, uvs).unwrap()
}
