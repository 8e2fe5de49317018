//! Semantic blend-shape body model.
//!
//! A body is the rest mesh plus a weighted sum of per-attribute displacement
//! fields. Each field is the dominant principal direction of a corpus subset
//! that varies a single trait, so every slider keeps its meaning.

mod container;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mesh, Vec3};

pub use container::{read_basis, read_basis_json, write_basis, write_basis_json, BASIS_MAGIC, BASIS_VERSION};

#[derive(Debug, Error)]
pub enum ShapeError {
    #[error("basis has {expected} attributes but {actual} weights were given")]
    WeightCount { expected: usize, actual: usize },
    #[error("attribute {attribute:?}: sample {sample} does not share the rest mesh topology")]
    Topology { attribute: String, sample: usize },
    #[error("attribute {attribute:?} needs at least 2 samples, got {count}")]
    TooFewSamples { attribute: String, count: usize },
    #[error("attribute {0:?} has zero variance around the rest mesh")]
    ZeroVariance(String),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("basis container: {0}")]
    Container(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendShapeBasis {
    pub rest_mesh: Mesh,
    /// One displacement per rest vertex, per attribute.
    pub attributes: Vec<Vec<Vec3>>,
    pub attribute_names: Vec<String>,
    pub weight_bounds: Vec<(f64, f64)>,
}

impl BlendShapeBasis {
    pub fn new(
        rest_mesh: Mesh,
        attributes: Vec<Vec<Vec3>>,
        attribute_names: Vec<String>,
        weight_bounds: Vec<(f64, f64)>,
    ) -> Result<Self, ShapeError> {
        let basis = BlendShapeBasis {
            rest_mesh,
            attributes,
            attribute_names,
            weight_bounds,
        };
        basis.validate()?;
        Ok(basis)
    }

    pub fn validate(&self) -> Result<(), ShapeError> {
        self.rest_mesh
            .validate()
            .map_err(|e| ShapeError::InvalidBasis(e.to_string()))?;
        let m = self.attributes.len();
        if self.attribute_names.len() != m || self.weight_bounds.len() != m {
            return Err(ShapeError::InvalidBasis(format!(
                "{m} fields, {} names, {} bounds",
                self.attribute_names.len(),
                self.weight_bounds.len()
            )));
        }
        let n = self.rest_mesh.vertex_count();
        for (name, field) in self.attribute_names.iter().zip(&self.attributes) {
            if field.len() != n {
                return Err(ShapeError::InvalidBasis(format!(
                    "field {name:?} has {} entries, rest mesh has {n} vertices",
                    field.len()
                )));
            }
        }
        for (name, &(lo, hi)) in self.attribute_names.iter().zip(&self.weight_bounds) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(ShapeError::InvalidBasis(format!("bounds of {name:?} are ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.rest_mesh.vertex_count()
    }

    /// Weights at the rest shape (all zeros).
    pub fn zero_weights(&self) -> ShapeWeights {
        ShapeWeights(vec![0.0; self.attribute_count()])
    }
}

/// Attribute weights, clamped to the basis bounds on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeWeights(Vec<f64>);

impl ShapeWeights {
    pub fn clamped(basis: &BlendShapeBasis, values: &[f64]) -> Result<Self, ShapeError> {
        if values.len() != basis.attribute_count() {
            return Err(ShapeError::WeightCount {
                expected: basis.attribute_count(),
                actual: values.len(),
            });
        }
        Ok(ShapeWeights(
            values
                .iter()
                .zip(&basis.weight_bounds)
                .map(|(v, &(lo, hi))| v.clamp(lo, hi))
                .collect(),
        ))
    }

    /// Weights taken as-is, bypassing the bounds.
    pub fn unbounded(values: Vec<f64>) -> Self {
        ShapeWeights(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Evaluates `rest + sum_k w_k * field_k` and recomputes normals.
///
/// Summation is attribute-major: attribute 0 is added to every vertex before
/// attribute 1, so results are bitwise reproducible.
pub fn apply_shape(basis: &BlendShapeBasis, weights: &ShapeWeights) -> Result<Mesh, ShapeError> {
    let vertices = displaced_vertices(basis, weights)?;
    let mut mesh = Mesh {
        vertices,
        faces: basis.rest_mesh.faces.clone(),
        normals: None,
        uvs: basis.rest_mesh.uvs.clone(),
    };
    mesh.recompute_normals();
    Ok(mesh)
}

/// Per-vertex displacement from the rest mesh for the given weights.
pub fn shape_displacements(basis: &BlendShapeBasis, weights: &ShapeWeights) -> Result<Vec<Vec3>, ShapeError> {
    check_len(basis, weights)?;
    let mut out = vec![Vec3::zeros(); basis.vertex_count()];
    for (field, &w) in basis.attributes.iter().zip(weights.values()) {
        for (d, a) in out.iter_mut().zip(field) {
            *d += a * w;
        }
    }
    Ok(out)
}

fn displaced_vertices(basis: &BlendShapeBasis, weights: &ShapeWeights) -> Result<Vec<Vec3>, ShapeError> {
    check_len(basis, weights)?;
    let mut out = basis.rest_mesh.vertices.clone();
    for (field, &w) in basis.attributes.iter().zip(weights.values()) {
        for (v, a) in out.iter_mut().zip(field) {
            *v += a * w;
        }
    }
    Ok(out)
}

fn check_len(basis: &BlendShapeBasis, weights: &ShapeWeights) -> Result<(), ShapeError> {
    if weights.values().len() != basis.attribute_count() {
        return Err(ShapeError::WeightCount {
            expected: basis.attribute_count(),
            actual: weights.values().len(),
        });
    }
    Ok(())
}

/// A named corpus subset in which only one trait varies.
#[derive(Debug, Clone)]
pub struct AttributeSubset {
    pub name: String,
    pub samples: Vec<Mesh>,
}

/// Dominant principal direction of one subset, centered on the rest mesh.
#[derive(Debug, Clone)]
pub struct PrincipalDirection {
    /// Unit-norm direction in flattened `3n` coordinates.
    pub direction: Vec<f64>,
    /// Projection of each centered sample onto `direction`.
    pub projections: Vec<f64>,
}

/// Builds one displacement field per subset.
///
/// Each subset is centered on the rest mesh (not its own mean) so that zero
/// weights reproduce the rest mesh. The field is the first right singular
/// vector of the centered sample matrix, scaled by the largest absolute sample
/// projection, so weights in `[-1, 1]` cover every sample.
pub fn build_attribute_basis(corpus: &[AttributeSubset], rest_mesh: &Mesh) -> Result<BlendShapeBasis, ShapeError> {
    rest_mesh
        .validate()
        .map_err(|e| ShapeError::InvalidBasis(e.to_string()))?;
    let mut attributes = Vec::with_capacity(corpus.len());
    let mut names = Vec::with_capacity(corpus.len());
    let mut bounds = Vec::with_capacity(corpus.len());
    for subset in corpus {
        let pc = principal_direction(subset, rest_mesh)?;
        let scale = pc.projections.iter().fold(0.0f64, |acc, p| acc.max(p.abs()));
        if scale <= 0.0 || !scale.is_finite() {
            return Err(ShapeError::ZeroVariance(subset.name.clone()));
        }
        let field = pc
            .direction
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0], c[1], c[2]) * scale)
            .collect();
        let lo = pc.projections.iter().fold(0.0f64, |acc, p| acc.min(p / scale));
        let hi = pc.projections.iter().fold(0.0f64, |acc, p| acc.max(p / scale));
        attributes.push(field);
        names.push(subset.name.clone());
        bounds.push((lo, hi));
    }
    BlendShapeBasis::new(rest_mesh.clone(), attributes, names, bounds)
}

/// First principal direction of a subset: the top eigenvector of the sample
/// Gram matrix `X X^T`, mapped back through `X^T`.
///
/// The sign is fixed so the largest-magnitude component is positive.
pub fn principal_direction(subset: &AttributeSubset, rest_mesh: &Mesh) -> Result<PrincipalDirection, ShapeError> {
    if subset.samples.len() < 2 {
        return Err(ShapeError::TooFewSamples {
            attribute: subset.name.clone(),
            count: subset.samples.len(),
        });
    }
    let centered = centered_samples(subset, rest_mesh)?;
    let rows = centered.len();
    let cols = 3 * rest_mesh.vertex_count();
    let matrix = DMatrix::from_fn(rows, cols, |r, c| centered[r][c]);
    let gram = &matrix * matrix.transpose();
    let eigen = gram.symmetric_eigen();
    let best = eigen.eigenvalues.imax();
    let lambda = eigen.eigenvalues[best];
    let frob = matrix.norm();
    if frob == 0.0 || !(lambda.max(0.0).sqrt() > 1e-12 * frob.max(1.0)) {
        return Err(ShapeError::ZeroVariance(subset.name.clone()));
    }
    let mut direction: Vec<f64> = (matrix.transpose() * eigen.eigenvectors.column(best)).iter().copied().collect();
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|x| *x /= norm);
    let pivot = direction
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, &x)| if x.abs() > acc.1.abs() { (i, x) } else { acc });
    if pivot.1 < 0.0 {
        direction.iter_mut().for_each(|x| *x = -*x);
    }
    let projections = centered
        .iter()
        .map(|row| row.iter().zip(&direction).map(|(a, b)| a * b).sum())
        .collect();
    Ok(PrincipalDirection { direction, projections })
}

fn centered_samples(subset: &AttributeSubset, rest_mesh: &Mesh) -> Result<Vec<Vec<f64>>, ShapeError> {
    subset
        .samples
        .iter()
        .enumerate()
        .map(|(i, sample)| {
            if sample.vertex_count() != rest_mesh.vertex_count() || sample.faces != rest_mesh.faces {
                return Err(ShapeError::Topology {
                    attribute: subset.name.clone(),
                    sample: i,
                });
            }
            Ok(sample
                .vertices
                .iter()
                .zip(&rest_mesh.vertices)
                .flat_map(|(s, r)| {
                    let d = s - r;
                    [d.x, d.y, d.z]
                })
                .collect())
        })
        .collect()
}

/// Sum of squared residuals after projecting each centered sample onto `field`'s direction.
pub fn reconstruction_error(subset: &AttributeSubset, rest_mesh: &Mesh, field: &[Vec3]) -> Result<f64, ShapeError> {
    let centered = centered_samples(subset, rest_mesh)?;
    let flat: Vec<f64> = field.iter().flat_map(|v| [v.x, v.y, v.z]).collect();
    let norm = flat.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(ShapeError::ZeroVariance(subset.name.clone()));
    }
    let unit: Vec<f64> = flat.iter().map(|x| x / norm).collect();
    Ok(centered
        .iter()
        .map(|row| {
            let p: f64 = row.iter().zip(&unit).map(|(a, b)| a * b).sum();
            row.iter().zip(&unit).map(|(a, u)| (a - p * u).powi(2)).sum::<f64>()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri_mesh() -> Mesh {
        Mesh::with_computed_normals(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![vec![0, 1, 2]],
            Some(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        )
        .unwrap()
    }

    fn shifted(mesh: &Mesh, d: Vec3) -> Mesh {
        let mut m = mesh.clone();
        m.vertices.iter_mut().for_each(|v| *v += d);
        m
    }

    #[test]
    fn zero_weights_reproduce_rest() {
        let rest = tri_mesh();
        let basis = BlendShapeBasis::new(
            rest.clone(),
            vec![vec![Vec3::new(0.3, 0.1, 0.0); 3]],
            vec!["weight".into()],
            vec![(-1.0, 1.0)],
        )
        .unwrap();
        let out = apply_shape(&basis, &basis.zero_weights()).unwrap();
        assert_eq!(out.vertices, rest.vertices);
        assert_eq!(out.faces, rest.faces);
        assert_eq!(out.uvs, rest.uvs);
    }

    #[test]
    fn uniform_field_shifts_every_vertex() {
        let rest = tri_mesh();
        let basis = BlendShapeBasis::new(
            rest.clone(),
            vec![vec![Vec3::y(); 3]],
            vec!["lift".into()],
            vec![(-5.0, 5.0)],
        )
        .unwrap();
        let w = ShapeWeights::clamped(&basis, &[2.0]).unwrap();
        let out = apply_shape(&basis, &w).unwrap();
        for (o, r) in out.vertices.iter().zip(&rest.vertices) {
            assert_eq!(o - r, Vec3::new(0.0, 2.0, 0.0));
        }
    }

    #[test]
    fn weights_are_clamped_and_counted() {
        let basis = BlendShapeBasis::new(tri_mesh(), vec![vec![Vec3::y(); 3]], vec!["a".into()], vec![(-1.0, 0.5)])
            .unwrap();
        assert_eq!(ShapeWeights::clamped(&basis, &[3.0]).unwrap().values(), &[0.5]);
        assert!(matches!(
            ShapeWeights::clamped(&basis, &[0.0, 1.0]),
            Err(ShapeError::WeightCount { expected: 1, actual: 2 })
        ));
        assert!(apply_shape(&basis, &ShapeWeights::unbounded(vec![])).is_err());
    }

    #[test]
    fn rank_one_subset_recovers_direction() {
        let rest = tri_mesh();
        let d = Vec3::new(0.1, -0.2, 0.05);
        let subset = AttributeSubset {
            name: "belly".into(),
            samples: vec![shifted(&rest, d), shifted(&rest, -d)],
        };
        let basis = build_attribute_basis(&[subset], &rest).unwrap();
        let field = &basis.attributes[0];
        for a in field {
            assert!(a.cross(&d).norm() < 1e-12);
        }
        // Reconstruction of both samples with weights +-1 is exact.
        let (lo, hi) = basis.weight_bounds[0];
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        for w in [lo, hi] {
            let out = apply_shape(&basis, &ShapeWeights::unbounded(vec![w])).unwrap();
            let target = if field[0].dot(&d) * w > 0.0 { d } else { -d };
            for (o, r) in out.vertices.iter().zip(&rest.vertices) {
                assert!((o - r - target).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn random_rank_one_fields_are_recovered() {
        use rand::{Rng, SeedableRng};
        let rest = crate::geometry::icosphere(1);
        for seed in 0..50 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let field: Vec<Vec3> = (0..rest.vertex_count())
                .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let samples = [-0.5, 0.25, 1.0]
                .iter()
                .map(|t| {
                    let v = rest.vertices.iter().zip(&field).map(|(r, f)| r + f * *t).collect();
                    Mesh::new(v, rest.faces.clone(), None, None).unwrap()
                })
                .collect();
            let pc = principal_direction(&AttributeSubset { name: "a".into(), samples }, &rest).unwrap();
            let norm = field.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
            let dot: f64 = field.iter().flat_map(|v| [v.x, v.y, v.z]).zip(&pc.direction).map(|(a, b)| a * b).sum();
            assert!((dot.abs() / norm - 1.0).abs() < 1e-12, "seed {seed}");
            let expected = [-0.5 * dot, 0.25 * dot, dot];
            for (p, e) in pc.projections.iter().zip(expected) {
                assert!((p - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bounds_always_contain_zero() {
        let rest = tri_mesh();
        let d = Vec3::new(0.0, 0.1, 0.0);
        let subset = AttributeSubset {
            name: "one-sided".into(),
            samples: vec![shifted(&rest, d * 0.5), shifted(&rest, d)],
        };
        let basis = build_attribute_basis(&[subset], &rest).unwrap();
        let (lo, hi) = basis.weight_bounds[0];
        assert_eq!(lo, 0.0);
        assert!((hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_subset_names_attribute() {
        let rest = tri_mesh();
        let subset = AttributeSubset {
            name: "breasts".into(),
            samples: vec![rest.clone(), rest.clone()],
        };
        match build_attribute_basis(&[subset], &rest) {
            Err(ShapeError::ZeroVariance(name)) => assert_eq!(name, "breasts"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn topology_mismatch_and_sample_count() {
        let rest = tri_mesh();
        let mut other = rest.clone();
        other.faces = vec![vec![0, 2, 1]];
        let subset = AttributeSubset {
            name: "w".into(),
            samples: vec![shifted(&rest, Vec3::x()), other],
        };
        assert!(matches!(
            build_attribute_basis(&[subset], &rest),
            Err(ShapeError::Topology { sample: 1, .. })
        ));
        let single = AttributeSubset {
            name: "w".into(),
            samples: vec![shifted(&rest, Vec3::x())],
        };
        assert!(matches!(
            build_attribute_basis(&[single], &rest),
            Err(ShapeError::TooFewSamples { count: 1, .. })
        ));
    }
}
