//! Laplace-Beltrami operators, the truncated generalised eigenbasis, and heat
//! diffusion in backward-Euler and spectral form.

mod cache;
mod diffusion;
mod eigen;
mod solve;

pub use cache::{load_cached_basis, store_cached_basis, CacheSidecar, CacheStatus};
pub(crate) use cache::write_atomic;
pub use diffusion::{
    diffuse_implicit, diffuse_spectral, diffuse_spectral_multi, heat_kernel, ImplicitDiffusion,
    Projection, DEFAULT_KERNEL_CAP,
};
pub use eigen::{
    dense_generalized_eigen, eigendecompose, eigendecompose_with, EigenMethod, EigenOptions,
    SpectralBasis,
};
pub use solve::SpdSolver;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::mesh::{cross, dot, norm, sub, TriangleMesh, DEGENERATE_AREA};

/// Default spectral resolution.
pub const DEFAULT_K: usize = 128;

/// Cotangent stiffness `L` (positive semi-definite, zero row sums) and
/// barycentric lumped mass `M`.
#[derive(Debug, Clone)]
pub struct Operators {
    pub stiffness: CsrMatrix<f64>,
    pub mass: DVector<f64>,
}

impl Operators {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn stiffness_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut dense = DMatrix::zeros(n, n);
        for (i, j, &v) in self.stiffness.triplet_iter() {
            dense[(i, j)] += v;
        }
        dense
    }

    /// `L * x` for a dense block of columns.
    pub fn stiffness_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        csr_mul_dense(&self.stiffness, x)
    }

    /// `M * x`.
    pub fn mass_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        scale_rows(x, &self.mass)
    }

    pub fn total_area(&self) -> f64 {
        self.mass.sum()
    }
}

pub(crate) fn csr_mul_dense(a: &CsrMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), x.ncols());
    for c in 0..x.ncols() {
        let xc = x.column(c);
        for (i, row) in a.row_iter().enumerate() {
            let mut acc = 0.0;
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                acc += v * xc[j];
            }
            out[(i, c)] = acc;
        }
    }
    out
}

pub(crate) fn scale_rows(x: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= d[i];
    }
    out
}

/// Assembles the cotangent Laplacian and lumped mass matrix.
pub fn build_operators(mesh: &TriangleMesh) -> Result<Operators> {
    let n = mesh.n_vertices();
    let total_area = mesh.total_area();
    let v = mesh.vertices();
    let mut coo = CooMatrix::new(n, n);
    let mut mass = DVector::zeros(n);
    for (f, &[a, b, c]) in mesh.faces().iter().enumerate() {
        let area = mesh.face_area(f);
        if !(area > DEGENERATE_AREA * total_area) {
            return Err(Error::DegenerateFace { face: f, area });
        }
        for (i, j, k) in [(a, b, c), (b, c, a), (c, a, b)] {
            // angle at k is opposite edge (i, j)
            let e1 = sub(&v[i], &v[k]);
            let e2 = sub(&v[j], &v[k]);
            let w = 0.5 * dot(&e1, &e2) / norm(&cross(&e1, &e2));
            coo.push(i, j, -w);
            coo.push(j, i, -w);
            coo.push(i, i, w);
            coo.push(j, j, w);
        }
        for i in [a, b, c] {
            mass[i] += area / 3.0;
        }
    }
    if let Some(i) = mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "vertex {i} is not referenced by any face"
        )));
    }
    Ok(Operators {
        stiffness: CsrMatrix::from(&coo),
        mass,
    })
}
