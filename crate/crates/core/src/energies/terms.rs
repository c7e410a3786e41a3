//! Individual energies and their gradients with respect to the maps.
//!
//! Shapes: `pi_mn` is `n_M x n_N`, `pi_nm` is `n_N x n_M`, `c_mn` is
//! `k_N x k_M` and `c_nm` is `k_M x k_N`. Functions ending in `_grad` also
//! return the gradient of the value.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{scale_rows, Operators, Projection, SpectralBasis};

/// `K_t u = Phi exp(-t Lambda) Phi^T W u` applied column by column, with
/// `W = M` or `W = I` depending on the projection.
#[derive(Clone, Copy)]
pub struct SpectralDiffusion<'a> {
    pub basis: &'a SpectralBasis,
    pub projection: Projection,
}

impl<'a> SpectralDiffusion<'a> {
    pub fn new(basis: &'a SpectralBasis, projection: Projection) -> Self {
        SpectralDiffusion { basis, projection }
    }

    fn weigh(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        match self.projection {
            Projection::MassWeighted => scale_rows(u, &self.basis.mass),
            Projection::Literal => u.clone(),
        }
    }

    fn damp(&self, coeffs: &mut DMatrix<f64>, times: &[f64]) {
        for (c, &t) in times.iter().enumerate() {
            for (a, l) in self.basis.eigenvalues.iter().enumerate() {
                coeffs[(a, c)] *= (-t * l).exp();
            }
        }
    }

    pub fn apply(&self, u: &DMatrix<f64>, times: &[f64]) -> DMatrix<f64> {
        let mut coeffs = self.basis.eigenvectors.tr_mul(&self.weigh(u));
        self.damp(&mut coeffs, times);
        &self.basis.eigenvectors * coeffs
    }

    pub fn apply_transpose(&self, v: &DMatrix<f64>, times: &[f64]) -> DMatrix<f64> {
        let mut coeffs = self.basis.eigenvectors.tr_mul(v);
        self.damp(&mut coeffs, times);
        self.weigh(&(&self.basis.eigenvectors * coeffs))
    }
}

fn column_sq_norms(r: &DMatrix<f64>) -> Vec<f64> {
    r.column_iter().map(|c| c.norm_squared()).collect()
}

fn check_maps(pi_mn: &DMatrix<f64>, pi_nm: &DMatrix<f64>) -> Result<()> {
    if pi_mn.nrows() != pi_nm.ncols() || pi_mn.ncols() != pi_nm.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "maps are {}x{} and {}x{}",
            pi_mn.nrows(),
            pi_mn.ncols(),
            pi_nm.nrows(),
            pi_nm.ncols()
        )));
    }
    Ok(())
}

/// Value of the synchronous-diffusion energy split per column of `F`, plus
/// gradients `(d pi_mn, d pi_nm)` when asked for.
pub struct DiffTerm {
    pub value: f64,
    pub per_column: Vec<f64>,
    pub grad: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

/// `sum_i |K_M^{t_i} f_i - Pi_MN K_N^{t_i} (Pi_NM f_i)|^2`.
pub fn l_diff_terms(
    diff_m: SpectralDiffusion<'_>,
    diff_n: SpectralDiffusion<'_>,
    f: &DMatrix<f64>,
    times: &[f64],
    pi_mn: &DMatrix<f64>,
    pi_nm: &DMatrix<f64>,
    with_grad: bool,
) -> Result<DiffTerm> {
    check_maps(pi_mn, pi_nm)?;
    if f.nrows() != pi_mn.nrows() || f.ncols() != times.len() || f.nrows() != diff_m.basis.n() {
        return Err(Error::DimensionMismatch("random functions do not fit the maps".into()));
    }
    let a = diff_m.apply(f, times);
    let g = pi_nm * f;
    let b = diff_n.apply(&g, times);
    let r = a - pi_mn * &b;
    let per_column = column_sq_norms(&r);
    let value = per_column.iter().sum();
    let grad = with_grad.then(|| {
        let d_mn = -2.0 * &r * b.transpose();
        let w = -2.0 * pi_mn.tr_mul(&r);
        let y = diff_n.apply_transpose(&w, times);
        let d_nm = y * f.transpose();
        (d_mn, d_nm)
    });
    Ok(DiffTerm {
        value,
        per_column,
        grad,
    })
}

pub fn l_diff(
    basis_m: &SpectralBasis,
    basis_n: &SpectralBasis,
    f: &DMatrix<f64>,
    times: &[f64],
    pi_mn: &DMatrix<f64>,
    pi_nm: &DMatrix<f64>,
) -> Result<f64> {
    let dm = SpectralDiffusion::new(basis_m, Projection::MassWeighted);
    let dn = SpectralDiffusion::new(basis_n, Projection::MassWeighted);
    Ok(l_diff_terms(dm, dn, f, times, pi_mn, pi_nm, false)?.value)
}

/// Single-time form: every column diffused for the same `t`.
pub fn e_diff(
    basis_m: &SpectralBasis,
    basis_n: &SpectralBasis,
    f: &DMatrix<f64>,
    t: f64,
    pi_mn: &DMatrix<f64>,
    pi_nm: &DMatrix<f64>,
) -> Result<f64> {
    l_diff(basis_m, basis_n, f, &vec![t; f.ncols()], pi_mn, pi_nm)
}

/// `|F - Pi_MN Pi_NM F|^2`.
pub fn l_cycle_grad(
    f: &DMatrix<f64>,
    pi_mn: &DMatrix<f64>,
    pi_nm: &DMatrix<f64>,
) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    check_maps(pi_mn, pi_nm)?;
    let g = pi_nm * f;
    let r = f - pi_mn * &g;
    let d_mn = -2.0 * &r * g.transpose();
    let d_nm = -2.0 * pi_mn.tr_mul(&r) * f.transpose();
    Ok((r.norm_squared(), d_mn, d_nm))
}

pub fn l_cycle(f: &DMatrix<f64>, pi_mn: &DMatrix<f64>, pi_nm: &DMatrix<f64>) -> Result<f64> {
    check_maps(pi_mn, pi_nm)?;
    Ok((f - pi_mn * (pi_nm * f)).norm_squared())
}

/// `tr((Pi_NM V_M)^T L_N (Pi_NM V_M))`, gradient `2 L_N Pi_NM V_M V_M^T`.
pub fn l_dirichlet_grad(
    pi_nm: &DMatrix<f64>,
    v_m: &DMatrix<f64>,
    ops_n: &Operators,
) -> Result<(f64, DMatrix<f64>)> {
    if pi_nm.ncols() != v_m.nrows() || pi_nm.nrows() != ops_n.n() {
        return Err(Error::DimensionMismatch("Dirichlet energy inputs".into()));
    }
    let pulled = pi_nm * v_m;
    let lp = ops_n.stiffness_mul(&pulled);
    let value = pulled.dot(&lp);
    Ok((value, 2.0 * lp * v_m.transpose()))
}

pub fn l_dirichlet(pi_nm: &DMatrix<f64>, v_m: &DMatrix<f64>, ops_n: &Operators) -> Result<f64> {
    if pi_nm.ncols() != v_m.nrows() || pi_nm.nrows() != ops_n.n() {
        return Err(Error::DimensionMismatch("Dirichlet energy inputs".into()));
    }
    let pulled = pi_nm * v_m;
    Ok(pulled.dot(&ops_n.stiffness_mul(&pulled)))
}

/// `sum_i |D_M^{t_i} - Pi_NM^T D_N^{t_i} Pi_NM|^2` with `D = Phi e^{-t Lambda} Phi^T`,
/// evaluated through `k x k` Gram matrices so no `n x n` kernel is formed.
pub fn l_kernel_grad(
    basis_m: &SpectralBasis,
    basis_n: &SpectralBasis,
    times: &[f64],
    pi_nm: &DMatrix<f64>,
    with_grad: bool,
) -> Result<(f64, Option<DMatrix<f64>>)> {
    if pi_nm.nrows() != basis_n.n() || pi_nm.ncols() != basis_m.n() {
        return Err(Error::DimensionMismatch("kernel energy map".into()));
    }
    let phi_m = &basis_m.eigenvectors;
    let phi_n = &basis_n.eigenvectors;
    let p_m = phi_m.tr_mul(phi_m);
    let g = phi_n.tr_mul(pi_nm); // k_N x n_M
    let h = &g * phi_m; // k_N x k_M
    let j = &g * g.transpose(); // k_N x k_N
    let (km, kn) = (basis_m.k(), basis_n.k());
    let mut s1 = DMatrix::zeros(kn, km);
    let mut s2 = DMatrix::zeros(kn, kn);
    let mut value = 0.0;
    for &t in times {
        let em = basis_m.eigenvalues.map(|l| (-t * l).exp());
        let en = basis_n.eigenvalues.map(|l| (-t * l).exp());
        for a in 0..km {
            for b in 0..km {
                value += em[a] * em[b] * p_m[(a, b)] * p_m[(a, b)];
            }
        }
        for a in 0..kn {
            for b in 0..km {
                let w = en[a] * em[b];
                value -= 2.0 * w * h[(a, b)] * h[(a, b)];
                s1[(a, b)] += w;
            }
            for b in 0..kn {
                let w = en[a] * en[b];
                value += w * j[(a, b)] * j[(a, b)];
                s2[(a, b)] += w;
            }
        }
    }
    let grad = with_grad.then(|| {
        let s1 = s1.component_mul(&h);
        let s2 = s2.component_mul(&j);
        let grad_g = -4.0 * s1 * phi_m.transpose() + 4.0 * s2 * &g;
        phi_n * grad_g
    });
    Ok((value.max(0.0), grad))
}

pub fn l_kernel(
    basis_m: &SpectralBasis,
    basis_n: &SpectralBasis,
    times: &[f64],
    pi_nm: &DMatrix<f64>,
) -> Result<f64> {
    Ok(l_kernel_grad(basis_m, basis_n, times, pi_nm, false)?.0)
}

/// Gradients of the coupling energy.
pub struct CoupleGrad {
    pub c_mn: DMatrix<f64>,
    pub c_nm: DMatrix<f64>,
    pub pi_mn: DMatrix<f64>,
    pub pi_nm: DMatrix<f64>,
}

/// `|C_MN - Phi_N^T M_N Pi_NM Phi_M|^2 + |C_NM - Phi_M^T M_M Pi_MN Phi_N|^2`.
pub fn l_couple_grad(
    c_mn: &DMatrix<f64>,
    c_nm: &DMatrix<f64>,
    pi_mn: &DMatrix<f64>,
    pi_nm: &DMatrix<f64>,
    basis_m: &SpectralBasis,
    basis_n: &SpectralBasis,
    with_grad: bool,
) -> Result<(f64, Option<CoupleGrad>)> {
    check_maps(pi_mn, pi_nm)?;
    let (km, kn) = (basis_m.k(), basis_n.k());
    if c_mn.shape() != (kn, km) || c_nm.shape() != (km, kn) {
        return Err(Error::DimensionMismatch("functional maps do not fit the bases".into()));
    }
    let d1 = c_mn - basis_n.project(&(pi_nm * &basis_m.eigenvectors));
    let d2 = c_nm - basis_m.project(&(pi_mn * &basis_n.eigenvectors));
    let value = d1.norm_squared() + d2.norm_squared();
    let grad = with_grad.then(|| {
        let mphi_n = scale_rows(&basis_n.eigenvectors, &basis_n.mass);
        let mphi_m = scale_rows(&basis_m.eigenvectors, &basis_m.mass);
        CoupleGrad {
            pi_nm: -2.0 * &mphi_n * &d1 * basis_m.eigenvectors.transpose(),
            pi_mn: -2.0 * &mphi_m * &d2 * basis_n.eigenvectors.transpose(),
            c_mn: 2.0 * d1,
            c_nm: 2.0 * d2,
        }
    });
    Ok((value, grad))
}

pub fn l_couple(
    c_mn: &DMatrix<f64>,
    c_nm: &DMatrix<f64>,
    pi_mn: &DMatrix<f64>,
    pi_nm: &DMatrix<f64>,
    basis_m: &SpectralBasis,
    basis_n: &SpectralBasis,
) -> Result<f64> {
    Ok(l_couple_grad(c_mn, c_nm, pi_mn, pi_nm, basis_m, basis_n, false)?.0)
}

/// `lambda_bij (|C_MN C_NM - I|^2 + |C_NM C_MN - I|^2)
///  + lambda_orth (|C_MN^T C_MN - I|^2 + |C_NM^T C_NM - I|^2)`,
/// with gradients `(d C_MN, d C_NM)`.
pub fn l_struct_grad(
    c_mn: &DMatrix<f64>,
    c_nm: &DMatrix<f64>,
    lambda_bij: f64,
    lambda_orth: f64,
) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    if c_mn.nrows() != c_nm.ncols() || c_mn.ncols() != c_nm.nrows() {
        return Err(Error::DimensionMismatch("functional maps are not mutually transposed in shape".into()));
    }
    let (kn, km) = c_mn.shape();
    let ab = c_mn * c_nm - DMatrix::identity(kn, kn);
    let ba = c_nm * c_mn - DMatrix::identity(km, km);
    let oa = c_mn.tr_mul(c_mn) - DMatrix::identity(km, km);
    let ob = c_nm.tr_mul(c_nm) - DMatrix::identity(kn, kn);
    let value = lambda_bij * (ab.norm_squared() + ba.norm_squared())
        + lambda_orth * (oa.norm_squared() + ob.norm_squared());
    let d_mn = lambda_bij * 2.0 * (&ab * c_nm.transpose() + c_nm.transpose() * &ba)
        + lambda_orth * 4.0 * (c_mn * &oa);
    let d_nm = lambda_bij * 2.0 * (c_mn.transpose() * &ab + &ba * c_mn.transpose())
        + lambda_orth * 4.0 * (c_nm * &ob);
    Ok((value, d_mn, d_nm))
}

pub fn l_struct(c_mn: &DMatrix<f64>, c_nm: &DMatrix<f64>, lambda_bij: f64, lambda_orth: f64) -> Result<f64> {
    Ok(l_struct_grad(c_mn, c_nm, lambda_bij, lambda_orth)?.0)
}
