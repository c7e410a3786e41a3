//! Generalised eigenproblem `L phi = lambda M phi`: dense reference solver and a
//! shift-invert block Lanczos solver with full reorthogonalisation.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::solve::SpdSolver;
use super::{scale_rows, Operators};
use crate::error::{Error, Result};

/// Dense fallback is only attempted up to this many vertices.
pub const DENSE_LIMIT: usize = 2000;

/// Truncated eigenbasis of one shape. `eigenvectors` are M-orthonormal.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub mass: DVector<f64>,
    /// Per-column relative residual `|L phi - lambda M phi| / (|L|_inf |phi|)`.
    pub residuals: Vec<f64>,
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn k(&self) -> usize {
        self.eigenvectors.ncols()
    }

    /// Spectral coefficients `Phi^T M u`.
    pub fn project(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        self.eigenvectors.tr_mul(&scale_rows(u, &self.mass))
    }

    /// `Phi^T M`, the left inverse of `Phi`.
    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        let mut pinv = self.eigenvectors.transpose();
        for (j, mut col) in pinv.column_iter_mut().enumerate() {
            col *= self.mass[j];
        }
        pinv
    }

    /// The first `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> SpectralBasis {
        let k = k.min(self.k());
        SpectralBasis {
            eigenvalues: self.eigenvalues.rows(0, k).into_owned(),
            eigenvectors: self.eigenvectors.columns(0, k).into_owned(),
            mass: self.mass.clone(),
            residuals: self.residuals[..k].to_vec(),
        }
    }

    /// Applies a vertex relabelling (old vertex `i` becomes `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> SpectralBasis {
        let mut eigenvectors = DMatrix::zeros(self.n(), self.k());
        let mut mass = DVector::zeros(self.n());
        for (old, &new) in perm.iter().enumerate() {
            eigenvectors.set_row(new, &self.eigenvectors.row(old));
            mass[new] = self.mass[old];
        }
        SpectralBasis {
            eigenvalues: self.eigenvalues.clone(),
            eigenvectors,
            mass,
            residuals: self.residuals.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenOptions {
    pub method: EigenMethod,
    pub tolerance: f64,
    pub block_size: usize,
    pub seed: u64,
    /// Largest Krylov subspace before giving up; `None` means `n`.
    pub max_subspace: Option<usize>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            method: EigenMethod::Auto,
            tolerance: 1e-11,
            block_size: 8,
            seed: 0x5eed,
            max_subspace: None,
        }
    }
}

pub fn eigendecompose(ops: &Operators, k: usize) -> Result<SpectralBasis> {
    eigendecompose_with(ops, k, &EigenOptions::default())
}

pub fn eigendecompose_with(ops: &Operators, k: usize, opts: &EigenOptions) -> Result<SpectralBasis> {
    let n = ops.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={n}")));
    }
    let method = match opts.method {
        EigenMethod::Auto if n <= DENSE_LIMIT && (3 * k >= n || n <= 300) => EigenMethod::Dense,
        EigenMethod::Auto => EigenMethod::Lanczos,
        m => m,
    };
    match method {
        EigenMethod::Dense => dense_generalized_eigen(ops, k),
        _ => match block_lanczos(ops, k, opts) {
            Ok(basis) => Ok(basis),
            Err(err) if opts.method == EigenMethod::Auto && n <= DENSE_LIMIT => {
                warn!("Lanczos failed ({err}); falling back to the dense solver");
                dense_generalized_eigen(ops, k)
            }
            Err(err) => Err(err),
        },
    }
}

fn stiffness_inf_norm(ops: &Operators) -> f64 {
    ops.stiffness
        .row_iter()
        .map(|r| r.values().iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn residuals(ops: &Operators, values: &DVector<f64>, vectors: &DMatrix<f64>) -> Vec<f64> {
    let l_norm = stiffness_inf_norm(ops).max(f64::MIN_POSITIVE);
    let lphi = ops.stiffness_mul(vectors);
    let mphi = ops.mass_mul(vectors);
    (0..vectors.ncols())
        .map(|j| {
            let r = lphi.column(j) - mphi.column(j) * values[j];
            r.norm() / (l_norm * vectors.column(j).norm())
        })
        .collect()
}

/// Makes the first non-negligible entry of every column positive.
fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-8 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

fn finish(ops: &Operators, mut values: DVector<f64>, mut vectors: DMatrix<f64>) -> SpectralBasis {
    values.apply(|v| *v = v.max(0.0));
    fix_signs(&mut vectors);
    let residuals = residuals(ops, &values, &vectors);
    SpectralBasis {
        eigenvalues: values,
        eigenvectors: vectors,
        mass: ops.mass.clone(),
        residuals,
    }
}

/// Symmetric eigendecomposition with eigenvalues in ascending order.
/// nalgebra's `SymmetricEigen` occasionally returns unconverged or mispaired
/// vectors on Laplacian-sized problems, so this goes through faer.
pub(crate) fn symmetric_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let evd = m.selfadjoint_eigendecomposition(faer::Side::Lower);
    let (s, u) = (evd.s().column_vector(), evd.u());
    let values = DVector::from_fn(n, |i, _| s.read(i));
    let vectors = DMatrix::from_fn(n, n, |i, j| u.read(i, j));
    (values, vectors)
}

/// Dense reference: eigendecomposition of `M^-1/2 L M^-1/2`.
pub fn dense_generalized_eigen(ops: &Operators, k: usize) -> Result<SpectralBasis> {
    let n = ops.n();
    let inv_sqrt = ops.mass.map(|m| m.sqrt().recip());
    let mut a = ops.stiffness_dense();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let (all_values, all_vectors) = symmetric_eigen(&a);
    let values = all_values.rows(0, k).into_owned();
    let mut vectors = DMatrix::zeros(n, k);
    for c in 0..k {
        vectors.set_column(c, &all_vectors.column(c).component_mul(&inv_sqrt));
    }
    Ok(finish(ops, values, vectors))
}

/// `M`-orthogonalises `w` against `q` (two passes of classical Gram-Schmidt),
/// then `M`-orthonormalises its columns, dropping columns that vanish.
fn orthonormalize_block(q: &DMatrix<f64>, mut w: DMatrix<f64>, mass: &DVector<f64>) -> DMatrix<f64> {
    if q.ncols() > 0 {
        for _ in 0..2 {
            let coeffs = q.tr_mul(&scale_rows(&w, mass));
            w -= q * coeffs;
        }
    }
    let mut kept: Vec<DVector<f64>> = Vec::new();
    for j in 0..w.ncols() {
        let mut v = w.column(j).into_owned();
        let original = v.component_mul(mass).dot(&v).sqrt();
        if !(original > 0.0) {
            continue;
        }
        for _ in 0..2 {
            for u in &kept {
                let c = u.component_mul(mass).dot(&v);
                v.axpy(-c, u, 1.0);
            }
            if q.ncols() > 0 {
                let coeffs = q.tr_mul(&v.component_mul(mass));
                v -= q * coeffs;
            }
        }
        let norm = v.component_mul(mass).dot(&v).sqrt();
        if norm > 1e-10 * original {
            kept.push(v / norm);
        }
    }
    DMatrix::from_columns(&kept)
}

fn block_lanczos(ops: &Operators, k: usize, opts: &EigenOptions) -> Result<SpectralBasis> {
    let n = ops.n();
    let b = opts.block_size.clamp(1, n);
    let max_dim = opts.max_subspace.unwrap_or(n).min(n);
    let mean_ratio = ops
        .mass
        .iter()
        .enumerate()
        .map(|(i, m)| ops.stiffness.get_entry(i, i).map_or(0.0, |e| e.into_value()) / m)
        .sum::<f64>()
        / n as f64;
    let shift = -1e-4 * mean_ratio.max(1e-8);
    let solver = SpdSolver::new(ops, -shift, 1.0)?;
    let apply = |x: &DMatrix<f64>| solver.solve(&ops.mass_mul(x));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut random_block = |cols: usize| {
        DMatrix::from_fn(n, cols, |_, _| StandardNormal.sample(&mut rng))
    };

    let mut q = DMatrix::<f64>::zeros(n, 0);
    let mut op_q = DMatrix::<f64>::zeros(n, 0);
    let mut block = orthonormalize_block(&q, random_block(b), &ops.mass);
    let mut next_check = (2 * k + 2 * b).max(k + 4 * b).min(max_dim);
    let mut last_residuals = vec![f64::INFINITY; k];

    loop {
        let w = apply(&block);
        q = concat(&q, &block);
        op_q = concat(&op_q, &w);
        let m = q.ncols();

        if m >= next_check || m >= max_dim {
            let h = q.tr_mul(&ops.mass_mul(&op_q));
            let h = (&h + h.transpose()) * 0.5;
            let (theta, ritz) = symmetric_eigen(&h);
            // largest theta first, i.e. eigenvalues of L closest to the shift
            let idx: Vec<usize> = (0..m).rev().filter(|&i| theta[i] > 0.0).collect();
            if idx.len() >= k {
                let values = DVector::from_iterator(
                    k,
                    idx[..k].iter().map(|&i| shift + theta[i].recip()),
                );
                let mut y = DMatrix::zeros(m, k);
                for (c, &i) in idx[..k].iter().enumerate() {
                    y.set_column(c, &ritz.column(i));
                }
                let vectors = &q * y;
                let res = residuals(ops, &values, &vectors);
                let worst = res.iter().copied().fold(0.0, f64::max);
                if worst <= opts.tolerance {
                    return Ok(finish(ops, values, vectors));
                }
                last_residuals = res;
            }
            if m >= max_dim {
                let max_residual = last_residuals.iter().copied().fold(0.0, f64::max);
                return Err(Error::EigenNotConverged {
                    residuals: last_residuals,
                    max_residual,
                    subspace_dim: m,
                });
            }
            next_check = (m + 4 * b).min(max_dim);
        }

        let width = b.min(max_dim - m);
        let mut candidate = w.columns(w.ncols().saturating_sub(width), width.min(w.ncols())).into_owned();
        block = orthonormalize_block(&q, candidate.clone(), &ops.mass);
        while block.ncols() == 0 {
            // invariant subspace reached: restart with fresh random directions
            candidate = random_block(width);
            block = orthonormalize_block(&q, candidate.clone(), &ops.mass);
        }
    }
}

fn concat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}
