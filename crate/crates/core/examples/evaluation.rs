//! Geodesic error, PCK curve and AUC for a map with a few wrong vertices.

use syncdiff::correspondence::HardCorrespondence;
use syncdiff::evaluation::{coverage, geodesic_error, pck_and_auc, MetricsSummary};
use syncdiff::synthetic::icosphere;

fn main() -> syncdiff::Result<()> {
    let mesh = icosphere(3, 1.0).normalize_to_unit_area()?;
    let n = mesh.n_vertices();
    let gt = HardCorrespondence::identity(n);
    let pred: Vec<usize> = (0..n).map(|i| if i % 10 == 0 { (i + 37) % n } else { i }).collect();
    let pred = HardCorrespondence::new(pred, n)?;

    let profile = geodesic_error(&pred, &gt, &mesh)?;
    let curve = pck_and_auc(&profile, 0.2, 101)?;
    for (t, p) in curve.thresholds.iter().zip(&curve.pck).step_by(20) {
        println!("PCK({t:.3}) = {p:.3}");
    }
    let summary = MetricsSummary::new(&profile, &curve, coverage(&pred), f64::NAN);
    println!("geo x100 {:.3}, AUC {:.4}, coverage {:.3}", summary.mean_geo_error_x100, summary.auc, summary.coverage);
    Ok(())
}
