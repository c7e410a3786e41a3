//! Correspondence quality: normalised geodesic error, PCK/AUC, coverage and
//! map smoothness.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::correspondence::HardCorrespondence;
use crate::error::{Error, Result};
use crate::mesh::{GeodesicTable, TriangleMesh};
use crate::spectral::Operators;

pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const MAX_THRESHOLD_NEAR_ISOMETRIC: f64 = 0.1;
pub const MAX_THRESHOLD_DEFAULT: f64 = 0.2;
pub const DEFAULT_PCK_SAMPLES: usize = 101;

/// Per-vertex geodesic errors divided by `sqrt(area)` of the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub per_vertex_errors: Vec<f64>,
    pub mean: f64,
}

impl ErrorProfile {
    pub fn from_errors(per_vertex_errors: Vec<f64>) -> Self {
        let mean = if per_vertex_errors.is_empty() {
            0.0
        } else {
            per_vertex_errors.iter().sum::<f64>() / per_vertex_errors.len() as f64
        };
        ErrorProfile { per_vertex_errors, mean }
    }

    /// The convention of published tables.
    pub fn mean_x100(&self) -> f64 {
        100.0 * self.mean
    }
}

pub fn geodesic_error(
    pred: &HardCorrespondence,
    gt: &HardCorrespondence,
    target: &TriangleMesh,
) -> Result<ErrorProfile> {
    if pred.n_source() != gt.n_source() {
        return Err(Error::DimensionMismatch(format!(
            "prediction covers {} vertices, ground truth {}",
            pred.n_source(),
            gt.n_source()
        )));
    }
    let n = target.n_vertices();
    for &j in pred.indices().iter().chain(gt.indices()) {
        if j >= n {
            return Err(Error::VertexOutOfRange { index: j, len: n });
        }
    }
    let scale = target.total_area().sqrt();
    if !(scale > 0.0) {
        return Err(Error::ZeroArea);
    }
    let mut table = GeodesicTable::new(target);
    let errors = pred
        .indices()
        .iter()
        .zip(gt.indices())
        .map(|(&p, &g)| Ok(table.distance(g, p)? / scale))
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorProfile::from_errors(errors))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PckCurve {
    pub thresholds: Vec<f64>,
    pub pck: Vec<f64>,
    /// Trapezoid area divided by `max_threshold`, so it lies in `[0, 1]`.
    pub auc: f64,
    pub max_threshold: f64,
}

impl PckCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,pck\n");
        for (t, p) in self.thresholds.iter().zip(&self.pck) {
            writeln!(out, "{t:.17e},{p:.17e}").unwrap();
        }
        out
    }
}

pub fn pck_and_auc(profile: &ErrorProfile, max_threshold: f64, num_samples: usize) -> Result<PckCurve> {
    if !(max_threshold > 0.0) || !max_threshold.is_finite() {
        return Err(Error::InvalidArgument(format!("max threshold {max_threshold} must be > 0")));
    }
    if num_samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 PCK samples".into()));
    }
    let mut sorted = profile.per_vertex_errors.clone();
    sorted.sort_by(f64::total_cmp);
    let count = sorted.len().max(1) as f64;
    let thresholds: Vec<f64> = (0..num_samples)
        .map(|i| max_threshold * i as f64 / (num_samples - 1) as f64)
        .collect();
    let pck: Vec<f64> = thresholds
        .iter()
        .map(|&t| sorted.partition_point(|&e| e <= t) as f64 / count)
        .collect();
    // trapezoid area with the threshold step divided out
    let area: f64 = pck.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum();
    Ok(PckCurve {
        thresholds,
        pck,
        auc: (area / (num_samples - 1) as f64).min(1.0),
        max_threshold,
    })
}

/// Fraction of target vertices hit by the map.
pub fn coverage(pred: &HardCorrespondence) -> f64 {
    if pred.n_target() == 0 {
        return 0.0;
    }
    let hit: HashSet<usize> = pred.indices().iter().copied().collect();
    hit.len() as f64 / pred.n_target() as f64
}

/// Dirichlet energy on N of the source coordinates pulled through `pi_nm`.
/// A hard map N -> M is lifted to its 0/1 matrix.
pub fn map_smoothness_soft(pi_nm: &DMatrix<f64>, v_m: &DMatrix<f64>, ops_n: &Operators) -> Result<f64> {
    crate::energies::l_dirichlet(pi_nm, v_m, ops_n)
}

pub fn map_smoothness(map_nm: &HardCorrespondence, source: &TriangleMesh, ops_n: &Operators) -> Result<f64> {
    if map_nm.n_source() != ops_n.n() || map_nm.n_target() != source.n_vertices() {
        return Err(Error::DimensionMismatch("map does not fit the shapes".into()));
    }
    let v = source.vertices();
    // the pulled coordinates of a 0/1 map are just looked-up positions
    let pulled = DMatrix::from_fn(map_nm.n_source(), 3, |i, c| v[map_nm.indices()[i]][c]);
    Ok(pulled.dot(&ops_n.stiffness_mul(&pulled)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub schema_version: u32,
    pub mean_geo_error_x100: f64,
    pub auc: f64,
    pub coverage: f64,
    pub smoothness: f64,
    pub max_threshold: f64,
    pub auc_normalisation: String,
}

impl MetricsSummary {
    pub fn new(profile: &ErrorProfile, curve: &PckCurve, coverage: f64, smoothness: f64) -> Self {
        MetricsSummary {
            schema_version: METRICS_SCHEMA_VERSION,
            mean_geo_error_x100: profile.mean_x100(),
            auc: curve.auc,
            coverage,
            smoothness,
            max_threshold: curve.max_threshold,
            auc_normalisation: "trapezoid area over [0, max_threshold] divided by max_threshold".into(),
        }
    }
}
