//! Functional maps, soft and hard pointwise maps, and conversions between them.
//!
//! Orientation convention: `Pi_MN` is `n_M x n_N` and row-stochastic. It moves
//! functions on N to M by left multiplication (`Pi_MN f_N`), and its row `i`
//! is the assignment of vertex `i` of M over the vertices of N. A functional
//! map is stored as `k_target x k_source`: `C_MN` takes coefficients on M to
//! coefficients on N, and the map induced by `Pi_MN` is
//! `C_NM = Phi_M^T M_M Pi_MN Phi_N`.

use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

/// Default softmax temperature.
pub const DEFAULT_TAU: f64 = 0.07;
/// Default Laplacian-commutativity weight (on max-normalised eigenvalues).
pub const DEFAULT_COMMUTATIVITY: f64 = 1e-3;
/// Largest side of a dense pointwise map.
pub const DEFAULT_MAP_CAP: usize = 5000;

/// `k_target x k_source` spectral map.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalMap {
    pub matrix: DMatrix<f64>,
}

impl FunctionalMap {
    pub fn source_k(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn target_k(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftCorrespondence {
    pub pi: DMatrix<f64>,
    pub tau: f64,
}

impl SoftCorrespondence {
    /// Row-major little-endian dump, for debugging only.
    pub fn to_debug_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.pi.len());
        out.extend_from_slice(&(self.pi.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(self.pi.ncols() as u64).to_le_bytes());
        for row in self.pi.row_iter() {
            for v in row.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// Per-source-vertex target index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardCorrespondence {
    indices: Vec<usize>,
    n_target: usize,
}

impl HardCorrespondence {
    pub fn new(indices: Vec<usize>, n_target: usize) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&j| j >= n_target) {
            return Err(Error::VertexOutOfRange {
                index: bad,
                len: n_target,
            });
        }
        Ok(HardCorrespondence { indices, n_target })
    }

    pub fn identity(n: usize) -> Self {
        HardCorrespondence {
            indices: (0..n).collect(),
            n_target: n,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn n_source(&self) -> usize {
        self.indices.len()
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    /// 0/1 matrix with a single one per row.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut pi = DMatrix::zeros(self.indices.len(), self.n_target);
        for (i, &j) in self.indices.iter().enumerate() {
            pi[(i, j)] = 1.0;
        }
        pi
    }

    /// One 0-based target index per line; line `i` is source vertex `i`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.indices.len() * 6);
        for j in &self.indices {
            s.push_str(&j.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, n_target: usize) -> Result<Self> {
        let indices = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::parse(format!("line {}", i + 1), format!("bad index '{l}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(indices, n_target)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, n_target: usize) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, n_target)
    }
}

/// A solved functional map together with what is needed to differentiate it.
pub struct FmapSolve {
    pub map: FunctionalMap,
    factors: Vec<Cholesky<f64, Dyn>>,
    a_source: DMatrix<f64>,
    a_target: DMatrix<f64>,
}

impl FmapSolve {
    /// Pulls a gradient on `C` back to the source and target coefficient
    /// matrices through the per-row normal equations (adjoint solves).
    pub fn backward(&self, grad_c: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let c = &self.map.matrix;
        let mut v = DMatrix::zeros(c.nrows(), c.ncols());
        for (i, chol) in self.factors.iter().enumerate() {
            let g: DVector<f64> = grad_c.row(i).transpose();
            v.set_row(i, &chol.solve(&g).transpose());
        }
        let vtc = v.tr_mul(c);
        let sym = &vtc + vtc.transpose();
        let grad_source = -(&sym * &self.a_source) + v.tr_mul(&self.a_target);
        let grad_target = &v * &self.a_source;
        (grad_source, grad_target)
    }
}

/// Minimises `|C A_s - A_t|^2 + lambda |C L_s - L_t C|^2` row by row.
///
/// `a_source` is `k_s x d`, `a_target` is `k_t x d`; the result is `k_t x k_s`.
pub fn solve_functional_map(
    a_source: &DMatrix<f64>,
    a_target: &DMatrix<f64>,
    evals_source: &DVector<f64>,
    evals_target: &DVector<f64>,
    lambda: f64,
) -> Result<FunctionalMap> {
    Ok(solve_functional_map_for_grad(a_source, a_target, evals_source, evals_target, lambda)?.map)
}

pub fn solve_functional_map_for_grad(
    a_source: &DMatrix<f64>,
    a_target: &DMatrix<f64>,
    evals_source: &DVector<f64>,
    evals_target: &DVector<f64>,
    lambda: f64,
) -> Result<FmapSolve> {
    let (ks, kt) = (a_source.nrows(), a_target.nrows());
    if a_source.ncols() != a_target.ncols() || evals_source.len() != ks || evals_target.len() != kt {
        return Err(Error::DimensionMismatch(format!(
            "descriptor coefficients {}x{} / {}x{} with {} / {} eigenvalues",
            ks,
            a_source.ncols(),
            kt,
            a_target.ncols(),
            evals_source.len(),
            evals_target.len()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("commutativity weight must be >= 0".into()));
    }
    let gram = a_source * a_source.transpose();
    let rhs = a_source * a_target.transpose(); // column i is A_s (row i of A_t)^T
    let scale = gram.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut matrix = DMatrix::zeros(kt, ks);
    let mut factors = Vec::with_capacity(kt);
    for i in 0..kt {
        let mut g = gram.clone();
        for j in 0..ks {
            let diff = evals_source[j] - evals_target[i];
            g[(j, j)] += lambda * diff * diff;
        }
        let chol = Cholesky::new(g).ok_or(Error::SingularRowSystem { row: i })?;
        let pivot_min = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if pivot_min * pivot_min < 1e-13 * scale {
            return Err(Error::SingularRowSystem { row: i });
        }
        let row = chol.solve(&rhs.column(i).into_owned());
        matrix.set_row(i, &row.transpose());
        factors.push(chol);
    }
    Ok(FmapSolve {
        map: FunctionalMap { matrix },
        factors,
        a_source: a_source.clone(),
        a_target: a_target.clone(),
    })
}

/// Eigenvalues of both shapes divided by their common maximum, as used in
/// the commutativity term.
pub fn normalized_eigenvalues(a: &DVector<f64>, b: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let scale = a.max().max(b.max());
    if scale > 0.0 {
        (a / scale, b / scale)
    } else {
        (a.clone(), b.clone())
    }
}

/// Row-wise softmax with max subtraction.
pub(crate) fn softmax_rows(scores: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = scores.clone();
    for mut row in out.row_iter_mut() {
        let max = row.max();
        row.apply(|x| *x = (*x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Gradient with respect to the softmax input given the gradient at its output.
pub(crate) fn softmax_rows_backward(pi: &DMatrix<f64>, grad_pi: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = pi.component_mul(grad_pi);
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let s = row.sum();
        for (j, v) in row.iter_mut().enumerate() {
            *v -= pi[(i, j)] * s;
        }
    }
    out
}

/// `Pi = softmax_rows(E_M E_N^T / tau)`.
pub fn soft_correspondence(e_m: &DMatrix<f64>, e_n: &DMatrix<f64>, tau: f64) -> Result<SoftCorrespondence> {
    soft_correspondence_capped(e_m, e_n, tau, DEFAULT_MAP_CAP)
}

pub fn soft_correspondence_capped(
    e_m: &DMatrix<f64>,
    e_n: &DMatrix<f64>,
    tau: f64,
    cap: usize,
) -> Result<SoftCorrespondence> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("temperature {tau} must be positive")));
    }
    if e_m.ncols() != e_n.ncols() {
        return Err(Error::DimensionMismatch("feature widths differ".into()));
    }
    let side = e_m.nrows().max(e_n.nrows());
    if side > cap {
        return Err(Error::SizeCap {
            what: "dense soft correspondence",
            requested: side,
            cap,
        });
    }
    if e_m.iter().chain(e_n.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("features".into()));
    }
    let scores = (e_m * e_n.transpose()) / tau;
    Ok(SoftCorrespondence {
        pi: softmax_rows(&scores),
        tau,
    })
}

/// Row-wise argmax; ties go to the smallest index.
pub fn hard_from_soft(soft: &SoftCorrespondence) -> HardCorrespondence {
    argmax_rows(&soft.pi)
}

pub(crate) fn argmax_rows(pi: &DMatrix<f64>) -> HardCorrespondence {
    let indices = pi
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    HardCorrespondence {
        indices,
        n_target: pi.ncols(),
    }
}

/// Decodes `C_NM` into the pointwise map M -> N by matching rows of
/// `Phi_M C_NM` to rows of `Phi_N` (Euclidean nearest neighbour).
pub fn fmap_to_pointwise(
    c_nm: &FunctionalMap,
    basis_m: &SpectralBasis,
    basis_n: &SpectralBasis,
) -> Result<HardCorrespondence> {
    let (km, kn) = (c_nm.target_k(), c_nm.source_k());
    if km > basis_m.k() || kn > basis_n.k() {
        return Err(Error::DimensionMismatch(format!(
            "map is {km}x{kn}, bases have {} and {} functions",
            basis_m.k(),
            basis_n.k()
        )));
    }
    let embedded = basis_m.eigenvectors.columns(0, km) * &c_nm.matrix;
    let target = basis_n.eigenvectors.columns(0, kn);
    let target_rows: Vec<Vec<f64>> = target.row_iter().map(|r| r.iter().copied().collect()).collect();
    let indices = embedded
        .row_iter()
        .map(|row| {
            let q: Vec<f64> = row.iter().copied().collect();
            let mut best = (f64::INFINITY, 0usize);
            for (j, t) in target_rows.iter().enumerate() {
                let d: f64 = q.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect();
    HardCorrespondence::new(indices, basis_n.n())
}

/// Either representation of a pointwise map, oriented rows -> columns.
#[derive(Debug, Clone, Copy)]
pub enum Pointwise<'a> {
    Soft(&'a DMatrix<f64>),
    Hard(&'a HardCorrespondence),
}

/// `Phi_rows^T M_rows Pi Phi_cols`; for `Pi_MN` this is `C_NM`.
pub fn pointwise_to_fmap(
    pi: Pointwise<'_>,
    basis_rows: &SpectralBasis,
    basis_cols: &SpectralBasis,
) -> Result<FunctionalMap> {
    let pulled = match pi {
        Pointwise::Soft(p) => {
            if p.nrows() != basis_rows.n() || p.ncols() != basis_cols.n() {
                return Err(Error::DimensionMismatch(format!(
                    "map is {}x{}, shapes have {} and {} vertices",
                    p.nrows(),
                    p.ncols(),
                    basis_rows.n(),
                    basis_cols.n()
                )));
            }
            p * &basis_cols.eigenvectors
        }
        Pointwise::Hard(h) => {
            if h.n_source() != basis_rows.n() || h.n_target() != basis_cols.n() {
                return Err(Error::DimensionMismatch("hard map does not fit the bases".into()));
            }
            let mut out = DMatrix::zeros(h.n_source(), basis_cols.k());
            for (i, &j) in h.indices().iter().enumerate() {
                out.set_row(i, &basis_cols.eigenvectors.row(j));
            }
            out
        }
    };
    Ok(FunctionalMap {
        matrix: basis_rows.project(&pulled),
    })
}
