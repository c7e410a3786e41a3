//! Heat diffusion `h_t`: backward Euler `(M + tL)^-1 M u` and the truncated
//! spectral form `Phi exp(-t Lambda) Phi^T M u`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::solve::SpdSolver;
use super::{Operators, SpectralBasis};
use crate::error::{Error, Result};

/// Largest vertex count for which dense `n x n` kernels are materialised.
pub const DEFAULT_KERNEL_CAP: usize = 5000;

/// How spectral coefficients are formed from a vertex function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// `Phi^T M u`, the M-orthogonal projection.
    #[default]
    MassWeighted,
    /// `Phi^T u`, the unweighted formula.
    Literal,
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("diffusion time {t} must be finite and >= 0")))
    }
}

/// A factored backward-Euler step for one fixed time.
pub struct ImplicitDiffusion<'a> {
    ops: &'a Operators,
    t: f64,
    solver: Option<SpdSolver>,
}

impl<'a> ImplicitDiffusion<'a> {
    pub fn new(ops: &'a Operators, t: f64) -> Result<Self> {
        check_time(t)?;
        let solver = if t == 0.0 {
            None
        } else {
            Some(SpdSolver::new(ops, 1.0, t)?)
        };
        Ok(ImplicitDiffusion { ops, t, solver })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn apply(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if u.nrows() != self.ops.n() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} rows, mesh has {} vertices",
                u.nrows(),
                self.ops.n()
            )));
        }
        match &self.solver {
            None => Ok(u.clone()),
            Some(solver) => {
                let x = solver.solve(&self.ops.mass_mul(u));
                if x.iter().all(|v| v.is_finite()) {
                    Ok(x)
                } else {
                    Err(Error::Factorization("non-finite diffusion result".into()))
                }
            }
        }
    }
}

pub fn diffuse_implicit(ops: &Operators, u: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    ImplicitDiffusion::new(ops, t)?.apply(u)
}

fn coefficients(basis: &SpectralBasis, u: &DMatrix<f64>, projection: Projection) -> DMatrix<f64> {
    match projection {
        Projection::MassWeighted => basis.project(u),
        Projection::Literal => basis.eigenvectors.tr_mul(u),
    }
}

/// Spectral diffusion with the mass-weighted projection.
pub fn diffuse_spectral(basis: &SpectralBasis, u: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    diffuse_spectral_multi(basis, u, &vec![t; u.ncols()], Projection::MassWeighted)
}

/// Spectral diffusion where column `i` of `u` is diffused for `times[i]`.
pub fn diffuse_spectral_multi(
    basis: &SpectralBasis,
    u: &DMatrix<f64>,
    times: &[f64],
    projection: Projection,
) -> Result<DMatrix<f64>> {
    if u.nrows() != basis.n() || times.len() != u.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "field {}x{} with {} times on a basis of {} vertices",
            u.nrows(),
            u.ncols(),
            times.len(),
            basis.n()
        )));
    }
    for &t in times {
        check_time(t)?;
    }
    let mut coeffs = coefficients(basis, u, projection);
    for (c, &t) in times.iter().enumerate() {
        for (a, lambda) in basis.eigenvalues.iter().enumerate() {
            coeffs[(a, c)] *= (-t * lambda).exp();
        }
    }
    Ok(&basis.eigenvectors * coeffs)
}

/// Dense heat kernel `Phi exp(-t Lambda) Phi^T`.
pub fn heat_kernel(basis: &SpectralBasis, t: f64, cap: usize) -> Result<DMatrix<f64>> {
    check_time(t)?;
    if basis.n() > cap {
        return Err(Error::SizeCap {
            what: "dense heat kernel",
            requested: basis.n(),
            cap,
        });
    }
    let weights = basis.eigenvalues.map(|l| (-t * l).exp());
    let mut scaled = basis.eigenvectors.clone();
    for (c, mut col) in scaled.column_iter_mut().enumerate() {
        col *= weights[c];
    }
    let d = &scaled * basis.eigenvectors.transpose();
    Ok((&d + d.transpose()) * 0.5)
}
