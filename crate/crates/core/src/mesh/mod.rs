//! Triangle meshes: storage, area measures, normalisation, IO, validation and
//! graph geodesics.

mod geodesic;
mod io;
mod validate;

pub use geodesic::{geodesic_distances, GeodesicField, GeodesicTable};
pub use io::{load_mesh, read_off, read_ply, write_off, MeshFormat};
pub use validate::{validate_mesh, ValidationIssue, DEGENERATE_AREA};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

/// Vertex positions and triangle connectivity of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting faces that reference missing vertices.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (f, face) in faces.iter().enumerate() {
            for &index in face {
                if index >= n {
                    return Err(Error::FaceIndexOutOfRange {
                        face: f,
                        index,
                        vertex_count: n,
                    });
                }
            }
        }
        Ok(TriangleMesh { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Area-weighted centroid of the surface.
    pub fn centroid(&self) -> Point3 {
        let mut acc = [0.0; 3];
        let mut area = 0.0;
        for (f, &[a, b, c]) in self.faces.iter().enumerate() {
            let w = self.face_area(f);
            for d in 0..3 {
                acc[d] += w * (self.vertices[a][d] + self.vertices[b][d] + self.vertices[c][d]) / 3.0;
            }
            area += w;
        }
        if area > 0.0 {
            acc.map(|x| x / area)
        } else {
            acc
        }
    }

    /// Unique undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(i, j)| if i < j { (i, j) } else { (j, i) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn edge_length(&self, i: usize, j: usize) -> f64 {
        dist(&self.vertices[i], &self.vertices[j])
    }

    /// Uniform scaling about the area centroid so that the surface area is one.
    pub fn normalize_to_unit_area(&self) -> Result<TriangleMesh> {
        let area = self.total_area();
        if !(area > 0.0) || !area.is_finite() {
            return Err(Error::ZeroArea);
        }
        let centroid = self.centroid();
        let s = area.sqrt().recip();
        let vertices = self
            .vertices
            .iter()
            .map(|p| [0, 1, 2].map(|d| (p[d] - centroid[d]) * s))
            .collect();
        Ok(TriangleMesh {
            vertices,
            faces: self.faces.clone(),
        })
    }

    /// Applies `p -> rotation * p * scale + translation` to every vertex.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], scale: f64, translation: Point3) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|p| {
                [0, 1, 2].map(|r| {
                    scale * (rotation[r][0] * p[0] + rotation[r][1] * p[1] + rotation[r][2] * p[2])
                        + translation[r]
                })
            })
            .collect();
        TriangleMesh {
            vertices,
            faces: self.faces.clone(),
        }
    }

    /// Relabels vertices so that old vertex `i` becomes new vertex `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_vertices();
        if perm.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} vertices",
                perm.len(),
                n
            )));
        }
        let mut vertices = vec![[0.0; 3]; n];
        let mut seen = vec![false; n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n || seen[new] {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
            seen[new] = true;
            vertices[new] = self.vertices[old];
        }
        let faces = self.faces.iter().map(|f| f.map(|v| perm[v])).collect();
        Ok(TriangleMesh { vertices, faces })
    }

    /// SHA-256 over the little-endian vertex coordinates and face indices.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.vertices.len() as u64).to_le_bytes());
        hasher.update((self.faces.len() as u64).to_le_bytes());
        for p in &self.vertices {
            for x in p {
                hasher.update(x.to_le_bytes());
            }
        }
        for f in &self.faces {
            for &i in f {
                hasher.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

pub(crate) fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: &Point3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &Point3, b: &Point3) -> f64 {
    norm(&sub(a, b))
}

pub fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * norm(&cross(&sub(b, a), &sub(c, a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilateral() -> TriangleMesh {
        TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 3f64.sqrt() / 2.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range_face() {
        let err = TriangleMesh::new(vec![[0.0; 3]; 3], vec![[0, 1, 7]]).unwrap_err();
        assert!(matches!(err, Error::FaceIndexOutOfRange { face: 0, index: 7, .. }));
    }

    #[test]
    fn equilateral_normalisation_scale() {
        let mesh = equilateral();
        let unit = mesh.normalize_to_unit_area().unwrap();
        assert!((unit.total_area() - 1.0).abs() < 1e-12);
        let expected = (4.0 / 3f64.sqrt()).sqrt();
        let scaled = unit.edge_length(0, 1);
        assert!((scaled - expected).abs() < 1e-12, "{scaled} vs {expected}");
    }

    #[test]
    fn normalisation_is_idempotent() {
        let once = equilateral().normalize_to_unit_area().unwrap();
        let twice = once.normalize_to_unit_area().unwrap();
        for (a, b) in once.vertices().iter().zip(twice.vertices()) {
            for d in 0..3 {
                assert!((a[d] - b[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_area_is_an_error() {
        let mesh = TriangleMesh::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(mesh.normalize_to_unit_area(), Err(Error::ZeroArea)));
    }

    #[test]
    fn permutation_moves_vertices() {
        let mesh = equilateral();
        let p = mesh.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.vertices()[2], mesh.vertices()[0]);
        assert_eq!(p.faces()[0], [2, 0, 1]);
        assert!(mesh.permuted(&[0, 0, 1]).is_err());
    }
}
