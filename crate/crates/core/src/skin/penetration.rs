use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use rayon::prelude::*;

use super::SkinError;
use crate::geometry::{Mesh, Vec3};

/// Undirected edges not shared by exactly two faces, plus edges traversed
/// twice in the same direction (inconsistent orientation). Sorted.
pub fn non_manifold_edges(mesh: &Mesh) -> Vec<(u32, u32)> {
    let mut undirected: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
    for face in &mesh.faces {
        for k in 0..face.len() {
            let (a, b) = (face[k], face[(k + 1) % face.len()]);
            *undirected.entry((a.min(b), a.max(b))).or_default() += 1;
            *directed.entry((a, b)).or_default() += 1;
        }
    }
    undirected
        .into_iter()
        .filter(|&((a, b), count)| {
            count != 2 || directed.get(&(a, b)).copied().unwrap_or(0) != 1
        })
        .map(|(e, _)| e)
        .collect()
}

/// Generalized winding number of `p` with respect to a triangle soup:
/// about 1 inside a closed outward-oriented surface, about 0 outside.
pub fn winding_number(vertices: &[Vec3], triangles: &[[u32; 3]], p: &Vec3) -> f64 {
    let mut total = 0.0;
    for t in triangles {
        let a = vertices[t[0] as usize] - p;
        let b = vertices[t[1] as usize] - p;
        let c = vertices[t[2] as usize] - p;
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * PI)
}

#[derive(Clone, Copy)]
enum Feature {
    Vertex(u32),
    Edge(u32, u32),
    Face,
}

/// Closest point on triangle `abc` to `p` and the feature it lies on.
fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3, ids: [u32; 3]) -> (Vec3, Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, Feature::Vertex(ids[0]));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, Feature::Vertex(ids[1]));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(ids[0], ids[1]));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, Feature::Vertex(ids[2]));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(ids[0], ids[2]));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(ids[1], ids[2]));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}

struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn distance_squared(&self, p: &Vec3) -> f64 {
        let d = (self.lo - p).sup(&(p - self.hi)).sup(&Vec3::zeros());
        d.norm_squared()
    }
}

enum BoxNode {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Split { bounds: Aabb, left: Box<BoxNode>, right: Box<BoxNode> },
}

impl BoxNode {
    fn bounds(&self) -> &Aabb {
        match self {
            BoxNode::Leaf { bounds, .. } | BoxNode::Split { bounds, .. } => bounds,
        }
    }
}

/// Closest-point queries against a closed triangle mesh, returning the
/// angle-weighted pseudonormal of the nearest feature.
pub struct SurfaceQuery<'a> {
    vertices: &'a [Vec3],
    triangles: Vec<[u32; 3]>,
    order: Vec<usize>,
    root: BoxNode,
    face_normals: Vec<Vec3>,
    edge_normals: HashMap<(u32, u32), Vec3>,
    vertex_normals: Vec<Vec3>,
}

impl<'a> SurfaceQuery<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let vertices = &mesh.vertices[..];
        let triangles = mesh.triangles();
        let mut face_normals = Vec::with_capacity(triangles.len());
        let mut edge_normals: HashMap<(u32, u32), Vec3> = HashMap::new();
        let mut vertex_normals = vec![Vec3::zeros(); vertices.len()];
        for t in &triangles {
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            let n = (b - a).cross(&(c - a));
            let n = if n.norm() > 0.0 { n.normalize() } else { Vec3::zeros() };
            face_normals.push(n);
            for k in 0..3 {
                let (i, j, l) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                let e1 = vertices[j as usize] - vertices[i as usize];
                let e2 = vertices[l as usize] - vertices[i as usize];
                let angle = e1.angle(&e2);
                if angle.is_finite() {
                    vertex_normals[i as usize] += n * angle;
                }
                *edge_normals.entry((i.min(j), i.max(j))).or_insert_with(Vec3::zeros) += n;
            }
        }
        let unit = |v: &mut Vec3| {
            if v.norm() > 0.0 {
                *v = v.normalize();
            }
        };
        vertex_normals.iter_mut().for_each(unit);
        edge_normals.values_mut().for_each(unit);
        let centroids: Vec<Vec3> = triangles
            .iter()
            .map(|t| t.iter().map(|&i| vertices[i as usize]).sum::<Vec3>() / 3.0)
            .collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let root = build_boxes(vertices, &triangles, &centroids, &mut order, 0);
        SurfaceQuery {
            vertices,
            triangles,
            order,
            root,
            face_normals,
            edge_normals,
            vertex_normals,
        }
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Closest surface point, its outward pseudonormal and the distance to it.
    pub fn closest(&self, p: &Vec3) -> (Vec3, Vec3, f64) {
        let mut best = Best {
            dist2: f64::INFINITY,
            tri: usize::MAX,
            point: Vec3::zeros(),
            feature: Feature::Face,
        };
        self.search(&self.root, p, &mut best);
        let normal = match best.feature {
            Feature::Face => self.face_normals[best.tri],
            Feature::Vertex(v) => self.vertex_normals[v as usize],
            Feature::Edge(a, b) => self.edge_normals[&(a.min(b), a.max(b))],
        };
        (best.point, normal, best.dist2.sqrt())
    }

    fn search(&self, node: &BoxNode, p: &Vec3, best: &mut Best) {
        if node.bounds().distance_squared(p) > best.dist2 {
            return;
        }
        match node {
            BoxNode::Leaf { start, end, .. } => {
                for &ti in &self.order[*start..*end] {
                    let t = self.triangles[ti];
                    let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                    let (q, feature) = closest_on_triangle(p, &a, &b, &c, t);
                    let d = (q - p).norm_squared();
                    if d < best.dist2 || (d == best.dist2 && ti < best.tri) {
                        *best = Best { dist2: d, tri: ti, point: q, feature };
                    }
                }
            }
            BoxNode::Split { left, right, .. } => {
                let dl = left.bounds().distance_squared(p);
                let dr = right.bounds().distance_squared(p);
                let (first, second) = if dl <= dr { (left, right) } else { (right, left) };
                self.search(first, p, best);
                self.search(second, p, best);
            }
        }
    }
}

struct Best {
    dist2: f64,
    tri: usize,
    point: Vec3,
    feature: Feature,
}

fn build_boxes(
    vertices: &[Vec3],
    triangles: &[[u32; 3]],
    centroids: &[Vec3],
    order: &mut [usize],
    offset: usize,
) -> BoxNode {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &t in order.iter() {
        for &i in &triangles[t] {
            lo = lo.inf(&vertices[i as usize]);
            hi = hi.sup(&vertices[i as usize]);
        }
    }
    let bounds = Aabb { lo, hi };
    if order.len() <= 4 {
        return BoxNode::Leaf { bounds, start: offset, end: offset + order.len() };
    }
    let axis = (hi - lo).imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]));
    let (left, right) = order.split_at_mut(mid);
    BoxNode::Split {
        bounds,
        left: Box::new(build_boxes(vertices, triangles, centroids, left, offset)),
        right: Box::new(build_boxes(vertices, triangles, centroids, right, offset + mid)),
    }
}

/// Pushes every cloth vertex that lies inside the body, or outside but closer
/// than `epsilon`, to `epsilon` above its closest body surface point along the
/// outward pseudonormal. Other vertices are left untouched.
pub fn resolve_penetration(body: &Mesh, cloth: &Mesh, epsilon: f64) -> Result<Mesh, SkinError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(SkinError::InvalidEpsilon(epsilon));
    }
    if body.faces.is_empty() {
        return Err(SkinError::EmptyBody);
    }
    let bad = non_manifold_edges(body);
    if !bad.is_empty() {
        return Err(SkinError::NonManifold { edges: bad });
    }
    let query = SurfaceQuery::new(body);
    let moved: Vec<Option<Vec3>> = cloth
        .vertices
        .par_iter()
        .map(|p| exteriorize(&query, &body.vertices, p, epsilon))
        .collect();
    let mut out = cloth.clone();
    let mut any = false;
    for (v, m) in out.vertices.iter_mut().zip(moved) {
        if let Some(m) = m {
            *v = m;
            any = true;
        }
    }
    if any && out.normals.is_some() {
        out.recompute_normals();
    }
    Ok(out)
}

fn exteriorize(query: &SurfaceQuery<'_>, vertices: &[Vec3], p: &Vec3, epsilon: f64) -> Option<Vec3> {
    let inside = |x: &Vec3| winding_number(vertices, query.triangles(), x) > 0.5;
    let (c, n, dist) = query.closest(p);
    if !inside(p) && dist >= epsilon {
        return None;
    }
    let mut q = c + n * epsilon;
    for _ in 0..8 {
        if winding_number(vertices, query.triangles(), &q) < 0.5 {
            break;
        }
        let (c, n, _) = query.closest(&q);
        q = c + n * epsilon;
    }
    Some(q)
}
