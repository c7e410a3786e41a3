//! Spectral point descriptors (HKS, WKS) and raw positions.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::spectral::SpectralBasis;

pub const DEFAULT_DIM: usize = 128;

/// WKS bandwidth as a multiple of the energy step.
const WKS_VARIANCE: f64 = 7.0;

/// Eigenvalues below this fraction of the largest one count as zero.
const ZERO_EIGENVALUE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorKind {
    Hks,
    Wks,
    Xyz,
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hks" => Ok(DescriptorKind::Hks),
            "wks" => Ok(DescriptorKind::Wks),
            "xyz" => Ok(DescriptorKind::Xyz),
            _ => Err(Error::InvalidArgument(format!("unknown descriptor '{s}'"))),
        }
    }
}

/// `n x d` per-vertex features.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorMatrix {
    pub values: DMatrix<f64>,
    pub kind: DescriptorKind,
}

impl DescriptorMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.row_iter() {
            let mut first = true;
            for v in row.iter() {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{v:.17e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

pub fn compute_descriptor(
    kind: DescriptorKind,
    mesh: &TriangleMesh,
    basis: &SpectralBasis,
    d: usize,
) -> Result<DescriptorMatrix> {
    match kind {
        DescriptorKind::Hks => compute_hks(basis, d),
        DescriptorKind::Wks => compute_wks(basis, d),
        DescriptorKind::Xyz => Ok(compute_xyz(mesh)),
    }
}

/// Returns the index of the first nonzero eigenvalue, or an error if the
/// zero eigenvalue is repeated.
fn first_nonzero(basis: &SpectralBasis) -> Result<usize> {
    let max = basis.eigenvalues.max();
    let zeros = basis
        .eigenvalues
        .iter()
        .filter(|&&l| l <= ZERO_EIGENVALUE * max)
        .count();
    if zeros > 1 {
        return Err(Error::RepeatedZeroEigenvalue { count: zeros });
    }
    Ok(zeros)
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidArgument("descriptor dimension must be >= 1".into()));
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![lo];
    }
    (0..d).map(|i| lo + (hi - lo) * i as f64 / (d - 1) as f64).collect()
}

/// `d` times log-spaced over `[4 ln 10 / lambda_k, 4 ln 10 / lambda_2]`.
pub fn hks_times(basis: &SpectralBasis, d: usize) -> Result<Vec<f64>> {
    check_dim(d)?;
    if basis.k() < 2 {
        return Err(Error::InvalidArgument("HKS needs at least 2 eigenpairs".into()));
    }
    let first = first_nonzero(basis)?;
    let c = 4.0 * 10f64.ln();
    let lo = (c / basis.eigenvalues[basis.k() - 1]).ln();
    let hi = (c / basis.eigenvalues[first]).ln();
    Ok(linspace(lo, hi, d).into_iter().map(f64::exp).collect())
}

/// `HKS(x, t) = sum_i exp(-lambda_i t) phi_i(x)^2` at the given times.
pub fn hks_at_times(basis: &SpectralBasis, times: &[f64]) -> DMatrix<f64> {
    let squared = basis.eigenvectors.map(|v| v * v);
    let weights = DMatrix::from_fn(basis.k(), times.len(), |i, j| {
        (-basis.eigenvalues[i] * times[j]).exp()
    });
    squared * weights
}

pub fn compute_hks(basis: &SpectralBasis, d: usize) -> Result<DescriptorMatrix> {
    let times = hks_times(basis, d)?;
    Ok(DescriptorMatrix {
        values: hks_at_times(basis, &times),
        kind: DescriptorKind::Hks,
    })
}

/// Wave kernel signature with per-energy normalisation and unit-L2 columns.
/// The zero mode is left out since `ln 0` has no energy.
pub fn compute_wks(basis: &SpectralBasis, d: usize) -> Result<DescriptorMatrix> {
    check_dim(d)?;
    if basis.k() < 3 {
        return Err(Error::InvalidArgument("WKS needs at least 3 eigenpairs".into()));
    }
    let first = first_nonzero(basis)?;
    let k = basis.k();
    let log_evals: Vec<f64> = (first..k).map(|i| basis.eigenvalues[i].ln()).collect();
    let (e_min, e_max) = (log_evals[0], log_evals[log_evals.len() - 1]);
    let sigma = WKS_VARIANCE * (e_max - e_min) / d as f64;
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("WKS needs two distinct nonzero eigenvalues".into()));
    }
    let energies = linspace(e_min + 2.0 * sigma, e_max - 2.0 * sigma, d);

    let mut weights = DMatrix::from_fn(log_evals.len(), d, |i, j| {
        let z = energies[j] - log_evals[i];
        (-z * z / (2.0 * sigma * sigma)).exp()
    });
    for mut col in weights.column_iter_mut() {
        let total = col.sum();
        col /= total;
    }
    let squared = basis.eigenvectors.columns(first, k - first).map(|v| v * v);
    let mut values = squared * weights;
    for mut col in values.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("WKS".into()));
    }
    Ok(DescriptorMatrix {
        values,
        kind: DescriptorKind::Wks,
    })
}

pub fn compute_xyz(mesh: &TriangleMesh) -> DescriptorMatrix {
    let v = mesh.vertices();
    DescriptorMatrix {
        values: DMatrix::from_fn(v.len(), 3, |i, j| v[i][j]),
        kind: DescriptorKind::Xyz,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_operators, eigendecompose};
    use crate::synthetic::{icosphere, jittered, random_rotation};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis_of(mesh: &TriangleMesh, k: usize) -> SpectralBasis {
        eigendecompose(&build_operators(mesh).unwrap(), k).unwrap()
    }

    fn unit_sphere() -> (TriangleMesh, SpectralBasis) {
        let mesh = icosphere(2, 1.0).normalize_to_unit_area().unwrap();
        let basis = basis_of(&mesh, 25);
        (mesh, basis)
    }

    fn spread(col: nalgebra::DVectorView<'_, f64>) -> f64 {
        (col.max() - col.min()) / col.mean()
    }

    #[test]
    fn hks_limits_and_sign() {
        let (_, basis) = unit_sphere();
        let hks = compute_hks(&basis, 16).unwrap();
        assert!(hks.values.iter().all(|&v| v >= 0.0));
        // long times leave only the constant mode phi_0^2 = 1 / area
        let late = hks_at_times(&basis, &[1e4]);
        assert!(late.iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn hks_nearly_constant_on_sphere() {
        let (_, basis) = unit_sphere();
        let hks = compute_hks(&basis, 16).unwrap();
        for col in hks.values.column_iter() {
            // 5% on icosphere(2), 2% here: the residue is discretisation
            assert!(spread(col) < 0.03, "spread {}", spread(col));
        }
    }

    #[test]
    fn wks_matches_direct_formula() {
        let mesh = jittered(&icosphere(1, 1.0), 0.1, 3);
        let basis = basis_of(&mesh, 12);
        let d = 9;
        let wks = compute_wks(&basis, d).unwrap();
        let logs: Vec<f64> = (1..12).map(|i| basis.eigenvalues[i].ln()).collect();
        let sigma = 7.0 * (logs[10] - logs[0]) / d as f64;
        let (lo, hi) = (logs[0] + 2.0 * sigma, logs[10] - 2.0 * sigma);
        for j in 0..d {
            let e = lo + (hi - lo) * j as f64 / (d - 1) as f64;
            let g: Vec<f64> = logs.iter().map(|l| (-(e - l).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
            let c: f64 = g.iter().sum();
            let raw: Vec<f64> = (0..mesh.n_vertices())
                .map(|x| (0..11).map(|i| g[i] * basis.eigenvectors[(x, i + 1)].powi(2)).sum::<f64>() / c)
                .collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            for x in 0..mesh.n_vertices() {
                assert!((wks.values[(x, j)] - raw[x] / norm).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wks_columns_unit_and_sphere_flat() {
        let mesh = icosphere(3, 1.0).normalize_to_unit_area().unwrap();
        let basis = basis_of(&mesh, 25);
        let wks = compute_wks(&basis, 32).unwrap();
        for col in wks.values.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-12);
            assert!(col.iter().all(|&v| v >= 0.0 && v.is_finite()));
            // 5% on icosphere(2), 2% here: the residue is discretisation
            assert!(spread(col) < 0.03, "spread {}", spread(col));
        }
    }

    #[test]
    fn wks_permutes_with_vertices() {
        let mesh = jittered(&icosphere(2, 1.0), 0.1, 8);
        let mut perm: Vec<usize> = (0..mesh.n_vertices()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(2));
        let shuffled = mesh.permuted(&perm).unwrap();
        let a = compute_wks(&basis_of(&mesh, 25), 32).unwrap();
        let b = compute_wks(&basis_of(&shuffled, 25), 32).unwrap();
        for (old, &new) in perm.iter().enumerate() {
            let gap = (a.values.row(old) - b.values.row(new)).amax();
            assert!(gap < 1e-8, "{gap}");
        }
    }

    #[test]
    fn rigid_and_scale_invariance() {
        let mesh = jittered(&icosphere(2, 1.0), 0.1, 5).normalize_to_unit_area().unwrap();
        let rot = random_rotation(&mut ChaCha8Rng::seed_from_u64(9));
        let moved = mesh.transformed(&rot, 1.0, [0.3, -2.0, 5.0]);
        let scaled = mesh.transformed(&rot, 3.7, [1.0, 1.0, 1.0]).normalize_to_unit_area().unwrap();
        let reference = basis_of(&mesh, 24);
        for other in [moved, scaled] {
            let basis = basis_of(&other, 24);
            for kind in [DescriptorKind::Hks, DescriptorKind::Wks] {
                let a = compute_descriptor(kind, &mesh, &reference, 32).unwrap();
                let b = compute_descriptor(kind, &other, &basis, 32).unwrap();
                assert!((a.values - b.values).amax() < 1e-8, "{kind:?}");
            }
        }
    }

    #[test]
    fn argument_errors() {
        let (_, basis) = unit_sphere();
        assert!(compute_hks(&basis.truncated(1), 4).is_err());
        assert!(compute_wks(&basis.truncated(2), 4).is_err());
        assert!(compute_hks(&basis, 0).is_err());

        let mut twice = basis.clone();
        twice.eigenvalues[1] = 0.0;
        assert!(matches!(compute_wks(&twice, 4), Err(Error::RepeatedZeroEigenvalue { count: 2 })));
    }

    #[test]
    fn csv_shape() {
        let mesh = icosphere(0, 1.0);
        let xyz = compute_xyz(&mesh);
        let csv = xyz.to_csv();
        assert_eq!(csv.lines().count(), 12);
        assert!(csv.lines().all(|l| l.split(',').count() == 3));
        let first: f64 = csv.lines().next().unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, mesh.vertices()[0][0]);
    }
}
