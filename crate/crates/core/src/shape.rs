//! A mesh bundled with its operators and truncated eigenbasis.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::mesh::TriangleMesh;
use crate::spectral::{build_operators, eigendecompose, Operators, SpectralBasis};

#[derive(Debug, Clone)]
pub struct Shape {
    pub mesh: TriangleMesh,
    pub ops: Operators,
    pub basis: SpectralBasis,
}

impl Shape {
    /// Builds operators and the first `k` eigenpairs (clamped to `n`). The
    /// mesh is used as given; normalise it first if areas should match.
    pub fn new(mesh: TriangleMesh, k: usize) -> Result<Self> {
        let ops = build_operators(&mesh)?;
        let basis = eigendecompose(&ops, k.min(mesh.n_vertices()))?;
        Ok(Shape { mesh, ops, basis })
    }

    pub fn n(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn k(&self) -> usize {
        self.basis.k()
    }

    /// `n x 3` vertex positions.
    pub fn vertex_matrix(&self) -> DMatrix<f64> {
        let v = self.mesh.vertices();
        DMatrix::from_fn(v.len(), 3, |i, j| v[i][j])
    }

    /// Relabels vertices (old `i` becomes `perm[i]`) without recomputing
    /// the basis.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mesh = self.mesh.permuted(perm)?;
        let ops = build_operators(&mesh)?;
        Ok(Shape {
            mesh,
            ops,
            basis: self.basis.permuted(perm),
        })
    }
}
